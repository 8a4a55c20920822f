#pragma once

#include <filesystem>

#include "damprank/krylov.hpp"

namespace damprank {

/// Binary layout (little-endian): magic "DKRYLOV1", u64 n, u64 m, f64 sigma,
/// f64 tol, H row-major (m*m doubles), Q column-major (n*m doubles).
/// A JSON sidecar at <path>.json carries graph hash, v provenance and the
/// residual history.
void save_basis(const std::filesystem::path& path, const KrylovBasis& basis);

KrylovBasis load_basis(const std::filesystem::path& path);

} // namespace damprank
