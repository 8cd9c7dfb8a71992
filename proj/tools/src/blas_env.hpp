// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

#pragma once

namespace fdnet::cli {

/// The distro OpenBLAS can misdetect AVX-512 cores as Prescott and run its
/// generic kernels, several times slower. When the user has not chosen a core
/// type and we see that case, set OPENBLAS_CORETYPE and re-exec once. The
/// core type is read at library load, so setting it in-process is too late.
/// Returns only if no re-exec happened.
void maybe_reexec_for_blas(char** argv);

}  // namespace fdnet::cli
