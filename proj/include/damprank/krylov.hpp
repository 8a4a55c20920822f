#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "damprank/column_stochastic.hpp"
#include "damprank/kernels.hpp"
#include "damprank/personalization.hpp"

namespace damprank {

/// Orthonormal basis Q of the Krylov space of (P, v) together with the small
/// upper Hessenberg representation H = Q^T P Q. Immutable once built; every
/// model evaluation at every parameter value reuses the same basis.
struct KrylovBasis {
    std::size_t n = 0;
    std::size_t m = 0;              // numerical dimension
    double sigma = 0.0;             // ||v||_2; Q e1 = v / sigma
    double tol = 0.0;               // breakdown tolerance used
    std::vector<std::vector<double>> Q; // m columns of length n
    Eigen::MatrixXd H;              // m x m
    std::vector<double> residuals;  // h_{k+1,k} per step, length m
    bool happy = false;             // terminated with h_{m+1,m} <= tol*sigma
    double v_l1 = 1.0;              // ||v||_1 (1 for nonnegative v)

    // provenance, carried into the persistence sidecar
    std::uint64_t graph_hash = 0;
    std::uint64_t v_seed = 0;
    PersonalizationMode v_mode = PersonalizationMode::nonnegative;
    bool v_generated = false;

    double breakdown_residual() const { return residuals.empty() ? 0.0 : residuals.back(); }
};

/// Arnoldi with modified Gram-Schmidt and one full reorthogonalization pass
/// per step. Stops at h_{m+1,m} <= tol*sigma (happy breakdown) or at
/// min(m_max, n) steps. Deterministic given (P, v, tol).
KrylovBasis arnoldi_build(const ColumnStochastic& P, const PersonalizationVector& v,
                          double tol = 1e-14, std::size_t m_max = 256);

/// A rank vector in Krylov coordinates: lift() maps it back to node space.
struct SpectralCoeffs {
    Eigen::VectorXd coeffs;   // length m
    std::string kernel_id;
    double rho = 0.0;
    std::uint64_t K_used = 0; // series truncation step
    double tail_bound = 0.0;  // guaranteed ambient l1 error bound
};

/// x_hat = sum_{k<=K} w_k(rho) H^k e1 with K chosen so the pmf tail is <= eps.
/// The reported tail_bound adds the breakdown residual propagated to first
/// order (residual * sum_k k w_k).
SpectralCoeffs eval_series_coeffs(const KrylovBasis& basis, const DampingKernel& kernel,
                                  double rho, double eps = 1e-12);

/// Trajectory coefficients: sum_{k<=K} w'_k(rho) H^k e1, truncated where the
/// derivative tail majorant drops below eps.
SpectralCoeffs eval_derivative_coeffs(const KrylovBasis& basis, const DampingKernel& kernel,
                                      double rho, double eps = 1e-12);

/// x = sigma * Q * coeffs.
std::vector<double> lift(const KrylovBasis& basis, const Eigen::VectorXd& coeffs);

/// Geometric-family cross check: (1 - alpha) (I - alpha H)^{-1} e1 by dense
/// LU on the small representation. Agrees with the truncated series up to the
/// truncation tail; no series is summed.
Eigen::VectorXd resolvent_coeffs(const KrylovBasis& basis, double alpha);

/// |R_kk| of a column-pivoted QR of the explicit Krylov matrix
/// [v, Pv, ..., P^{k_max-1} v], sorted descending. Memory-guarded: throws
/// numeric_error when n*k_max doubles would exceed budget_bytes.
std::vector<double> krylov_rrqr_diag(const ColumnStochastic& P, const PersonalizationVector& v,
                                     std::size_t k_max,
                                     std::size_t budget_bytes = std::size_t{2} << 30);

/// Count of diagonals above rel_cutoff * |R_11|.
std::size_t numerical_dimension(const std::vector<double>& rkk, double rel_cutoff = 1e-17);

struct RankJob {
    DampingKernel kernel;
    std::vector<double> rhos;
    bool want_derivative = false;
    bool want_lift = true;
};

struct RankRow {
    std::string kernel_id;
    double rho = 0.0;
    bool ok = false;
    std::string error;
    std::optional<SpectralCoeffs> coeffs;
    std::optional<SpectralCoeffs> derivative;
    std::optional<std::vector<double>> lifted;
    std::optional<std::vector<double>> lifted_derivative;
};

/// Evaluate all (kernel, rho) pairs against one shared basis. The Krylov
/// vector sequence h_k = H^k e1 is computed once to the largest truncation
/// step and shared read-only; rows fail independently. Row order follows the
/// job list regardless of thread count.
std::vector<RankRow> batch_rank(const KrylovBasis& basis, const std::vector<RankJob>& jobs,
                                double eps = 1e-12, int threads = 1);

} // namespace damprank
