#pragma once

#include <cstdint>
#include <vector>

#include "damprank/column_stochastic.hpp"
#include "damprank/kernels.hpp"
#include "damprank/personalization.hpp"
#include "damprank/scc.hpp"

namespace damprank {

struct IterationReport {
    std::size_t iterations = 0;
    double final_residual = 0.0; // l1
    bool converged = false;
    double wall_time = 0.0; // seconds
};

struct SolveResult {
    std::vector<double> x;
    IterationReport report;
};

/// x <- alpha P x + (1-alpha) v from x0 = v, until the l1 step difference is
/// below tol. Requires fully stochastic P and nonnegative v.
SolveResult power_method(const ColumnStochastic& P, const PersonalizationVector& v,
                         double alpha, double tol = 1e-12, std::size_t max_iter = 200000);

/// Forward Gauss-Seidel sweeps in natural order on (I - alpha P) x = (1-alpha) v,
/// stopping on the l1 residual. Any dangling mode; x0 optional warm start.
SolveResult gauss_seidel(const ColumnStochastic& P, const PersonalizationVector& v,
                         double alpha, double tol = 1e-12, std::size_t max_iter = 200000,
                         const std::vector<double>* x0 = nullptr);

struct SeriesResult {
    std::vector<double> x;
    std::uint64_t K_used = 0;
    double tail_bound = 0.0;
};

/// Ambient-space truncated series sum_{k<=K} w_k(rho) P^k v by repeated
/// products, with tail_mass(K, rho) <= eps.
SeriesResult direct_series(const ColumnStochastic& P, const PersonalizationVector& v,
                           const DampingKernel& kernel, double rho, double eps = 1e-12);

struct CascadeResult {
    std::vector<double> alphas;
    std::vector<SolveResult> warm;          // warm-started down the grid
    std::vector<IterationReport> cold;      // control runs; empty unless requested
};

/// Gauss-Seidel over a strictly ascending alpha grid, each solve warm-started
/// from the previous solution. with_control additionally runs each alpha cold
/// from x0 = v and reports its iteration count.
CascadeResult cascade_sweep(const ColumnStochastic& P, const PersonalizationVector& v,
                            const std::vector<double>& alpha_grid, double tol = 1e-12,
                            bool with_control = false, std::size_t max_iter = 200000);

/// Solve (I - alpha P) x = (1-alpha) v block by block along the SCC ordering
/// (sources first), Gauss-Seidel on each diagonal block with solved coupling
/// folded into the right side. The dangling patch is closed in rank-one form
/// after the block sweep. Throws data_error when ordering and P disagree.
std::vector<double> block_solve(const ColumnStochastic& P, const BlockOrdering& ordering,
                                const PersonalizationVector& v, double alpha,
                                double tol = 1e-12, std::size_t max_iter = 200000);

} // namespace damprank
