#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "damprank/kernels.hpp"
#include "damprank/krylov.hpp"

namespace damprank {

/// KL(x || x_o) = sum_i x_i ln(x_i / x_o_i), in nats. Entries below 1e-300
/// are clamped to that floor; a true zero in x_o facing mass in x yields
/// +infinity. Throws std::invalid_argument on negative entries or when either
/// vector's mass deviates from 1 by more than 1e-8.
double kl_divergence(std::span<const double> x, std::span<const double> x_o);

/// d/drho KL = xdot^T (ln x - ln x_o + e).
double kl_derivative_analytic(std::span<const double> xdot, std::span<const double> x,
                              std::span<const double> x_o);

struct KLRecord {
    double rho = 0.0;
    double kl = 0.0;                    // nats
    double dkl_analytic = 0.0;          // nats per unit rho
    std::vector<double> dkl_empirical;  // one per finite-difference step size
};

struct KLSweepResult {
    std::string kernel_id;
    double rho_o = 0.0;
    std::vector<double> fd_steps;
    std::vector<KLRecord> records;
};

/// Evaluate x(rho_o) once, then for every grid rho lift x and xdot from the
/// shared basis and record kl, the analytic derivative, and a central
/// difference of the KL curve per requested step size (one-sided at domain
/// edges). Grid points evaluate independently across threads.
KLSweepResult kl_sweep(const KrylovBasis& basis, const DampingKernel& kernel,
                       const std::vector<double>& rho_grid, double rho_o,
                       const std::vector<double>& fd_steps = {0.002, 0.008},
                       double eps = 1e-12, int threads = 1);

struct HistogramSpec {
    std::vector<double> bin_edges; // ascending, left-closed right-open bins
    std::vector<std::uint64_t> counts;
    std::uint64_t underflow = 0;
    std::uint64_t overflow = 0;
};

/// Bin the values n*x_i. Counts + underflow + overflow always equal n.
HistogramSpec histogram(std::span<const double> x, const std::vector<double>& edges);

/// Default edges: `bins` uniform bins over [0, p99.9 of n*x].
std::vector<double> default_histogram_edges(std::span<const double> x, std::size_t bins = 100);

struct FamilyComparison {
    std::string family;
    double rho_star = 0.0;  // parameter matching the reference mean
    double mean = 0.0;
    std::vector<double> x;
    HistogramSpec hist;
};

struct CompareResult {
    double reference_alpha = 0.0;
    double target_mean = 0.0;
    std::vector<FamilyComparison> families;
    std::vector<std::vector<double>> pairwise_kl; // [i][j] = KL(x_i || x_j)
};

/// Evaluate each family at its correspondence point mu = alpha/(1-alpha),
/// all from the same basis, with aligned histograms (shared default edges)
/// and pairwise KL values.
CompareResult correspondence_compare(const KrylovBasis& basis, double reference_alpha,
                                     const std::vector<DampingKernel>& families,
                                     double eps = 1e-12, std::size_t bins = 100);

} // namespace damprank
