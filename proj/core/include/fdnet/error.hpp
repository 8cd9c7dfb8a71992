// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

#pragma once

#include <stdexcept>
#include <string>

namespace fdnet {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or image dimensions violate an operation's shape contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, or a numerical bound that did not hold.
class NumericsError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value or unknown configuration key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data violates a semantic precondition (non-binary mask, empty set).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class DatasetNotFound : public Error {
 public:
  using Error::Error;
};

/// An image has no matching mask, or a mask has no matching image.
class PairingError : public Error {
 public:
  PairingError(const std::string& what, std::string orphan)
      : Error(what), orphan_(std::move(orphan)) {}
  const std::string& orphan() const noexcept { return orphan_; }

 private:
  std::string orphan_;
};

class WeightLoadError : public Error {
 public:
  using Error::Error;
};

class IOError : public Error {
 public:
  using Error::Error;
};

/// A command declined to overwrite existing output.
class RefusalError : public Error {
 public:
  using Error::Error;
};

}  // namespace fdnet
