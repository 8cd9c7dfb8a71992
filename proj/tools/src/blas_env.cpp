// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

#include "blas_env.hpp"

#include <unistd.h>

#include <cstdlib>
#include <cstring>

extern "C" char* openblas_get_corename(void);

namespace fdnet::cli {

void maybe_reexec_for_blas(char** argv) {
  if (std::getenv("OPENBLAS_CORETYPE") != nullptr || std::getenv("FDNET_NO_REEXEC") != nullptr) {
    return;
  }
  const char* core = openblas_get_corename();
  if (core == nullptr || std::strcmp(core, "Prescott") != 0) return;
  const char* want = nullptr;
  if (__builtin_cpu_supports("avx512f")) {
    want = "SkylakeX";
  } else if (__builtin_cpu_supports("avx2")) {
    want = "Haswell";
  }
  if (want == nullptr) return;
  setenv("OPENBLAS_CORETYPE", want, 1);
  setenv("FDNET_NO_REEXEC", "1", 1);
  execv("/proc/self/exe", argv);
  // execv failed: carry on with the slow kernels.
}

}  // namespace fdnet::cli
