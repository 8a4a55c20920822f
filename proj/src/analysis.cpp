#include "damprank/analysis.hpp"

#include "damprank/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

namespace damprank {

namespace {

constexpr double mass_floor = 1e-300;

void check_distribution(std::span<const double> x, const char* who) {
    double sum = 0.0;
    for (double t : x) {
        if (!(t >= 0.0))
            throw std::invalid_argument(std::string(who) + ": negative or NaN entry");
        sum += t;
    }
    if (std::abs(sum - 1.0) > 1e-8)
        throw std::invalid_argument(std::string(who) + ": mass deviates from 1");
}

} // namespace

double kl_divergence(std::span<const double> x, std::span<const double> x_o) {
    if (x.size() != x_o.size())
        throw std::invalid_argument("kl_divergence: length mismatch");
    check_distribution(x, "kl_divergence");
    check_distribution(x_o, "kl_divergence");

    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        if (xi <= mass_floor) continue; // x log x -> 0
        if (x_o[i] == 0.0) return std::numeric_limits<double>::infinity();
        s += xi * std::log(xi / std::max(x_o[i], mass_floor));
    }
    return s;
}

double kl_derivative_analytic(std::span<const double> xdot, std::span<const double> x,
                              std::span<const double> x_o) {
    if (xdot.size() != x.size() || x.size() != x_o.size())
        throw std::invalid_argument("kl_derivative_analytic: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        s += xdot[i] *
             (std::log(std::max(x[i], mass_floor)) - std::log(std::max(x_o[i], mass_floor)) + 1.0);
    return s;
}

KLSweepResult kl_sweep(const KrylovBasis& basis, const DampingKernel& kernel,
                       const std::vector<double>& rho_grid, double rho_o,
                       const std::vector<double>& fd_steps, double eps, int threads) {
    if (rho_grid.empty()) throw std::invalid_argument("kl_sweep: empty grid");
    if (threads < 1) throw std::invalid_argument("kl_sweep: threads must be >= 1");
    if (!kernel.in_domain(rho_o))
        throw std::domain_error("kl_sweep: rho_o out of domain");
    for (double r : rho_grid)
        if (!kernel.in_domain(r)) throw std::domain_error("kl_sweep: grid point out of domain");
    for (double h : fd_steps)
        if (!(h > 0.0)) throw std::invalid_argument("kl_sweep: fd steps must be positive");

    KLSweepResult out;
    out.rho_o = rho_o;
    out.fd_steps = fd_steps;
    out.records.resize(rho_grid.size());

    const SpectralCoeffs ref = eval_series_coeffs(basis, kernel, rho_o, eps);
    out.kernel_id = ref.kernel_id;
    const std::vector<double> x_o = lift(basis, ref.coeffs);

    auto kl_at = [&](double rho) {
        const SpectralCoeffs c = eval_series_coeffs(basis, kernel, rho, eps);
        return kl_divergence(lift(basis, c.coeffs), x_o);
    };

    auto run_point = [&](std::size_t i) {
        const double rho = rho_grid[i];
        KLRecord& rec = out.records[i];
        rec.rho = rho;
        const SpectralCoeffs c = eval_series_coeffs(basis, kernel, rho, eps);
        const SpectralCoeffs d = eval_derivative_coeffs(basis, kernel, rho, eps);
        const std::vector<double> x = lift(basis, c.coeffs);
        const std::vector<double> xdot = lift(basis, d.coeffs);
        rec.kl = kl_divergence(x, x_o);
        rec.dkl_analytic = kl_derivative_analytic(xdot, x, x_o);
        rec.dkl_empirical.reserve(fd_steps.size());
        for (double h : fd_steps) {
            const bool up_ok = kernel.in_domain(rho + h);
            const bool down_ok = kernel.in_domain(rho - h);
            double slope;
            if (up_ok && down_ok)
                slope = (kl_at(rho + h) - kl_at(rho - h)) / (2.0 * h);
            else if (up_ok)
                slope = (kl_at(rho + h) - rec.kl) / h;
            else if (down_ok)
                slope = (rec.kl - kl_at(rho - h)) / h;
            else
                throw std::domain_error("kl_sweep: fd step exceeds the parameter domain");
            rec.dkl_empirical.push_back(slope);
        }
    };

    const int nt = std::min<int>(threads, static_cast<int>(rho_grid.size()));
    if (nt <= 1) {
        for (std::size_t i = 0; i < rho_grid.size(); ++i) run_point(i);
    } else {
        std::vector<std::thread> pool;
        std::exception_ptr first_error;
        std::mutex err_mu;
        for (int t = 0; t < nt; ++t)
            pool.emplace_back([&, t] {
                for (std::size_t i = static_cast<std::size_t>(t); i < rho_grid.size();
                     i += static_cast<std::size_t>(nt)) {
                    try {
                        run_point(i);
                    } catch (...) {
                        std::lock_guard lock(err_mu);
                        if (!first_error) first_error = std::current_exception();
                        return;
                    }
                }
            });
        for (auto& th : pool) th.join();
        if (first_error) std::rethrow_exception(first_error);
    }
    return out;
}

HistogramSpec histogram(std::span<const double> x, const std::vector<double>& edges) {
    if (edges.size() < 2) throw std::invalid_argument("histogram: need at least two edges");
    for (std::size_t i = 1; i < edges.size(); ++i)
        if (!(edges[i] > edges[i - 1]))
            throw std::invalid_argument("histogram: edges must be strictly ascending");

    HistogramSpec h;
    h.bin_edges = edges;
    h.counts.assign(edges.size() - 1, 0);
    const double scale = static_cast<double>(x.size());
    for (double xi : x) {
        const double t = scale * xi;
        if (!std::isfinite(t)) throw std::invalid_argument("histogram: non-finite value");
        if (t < edges.front()) {
            ++h.underflow;
        } else if (t >= edges.back()) {
            ++h.overflow;
        } else {
            const auto it = std::upper_bound(edges.begin(), edges.end(), t);
            ++h.counts[static_cast<std::size_t>(it - edges.begin()) - 1];
        }
    }
    return h;
}

std::vector<double> default_histogram_edges(std::span<const double> x, std::size_t bins) {
    if (x.empty()) throw std::invalid_argument("histogram edges: empty vector");
    if (bins == 0) throw std::invalid_argument("histogram edges: need at least one bin");

    std::vector<double> scaled(x.begin(), x.end());
    const double scale = static_cast<double>(x.size());
    for (double& t : scaled) t *= scale;
    std::sort(scaled.begin(), scaled.end());
    const auto idx = static_cast<std::size_t>(
        std::min<double>(std::ceil(0.999 * static_cast<double>(scaled.size())),
                         static_cast<double>(scaled.size())));
    double hi = scaled[idx == 0 ? 0 : idx - 1];
    if (!(hi > 0.0)) hi = 1.0;

    std::vector<double> edges(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i)
        edges[i] = hi * static_cast<double>(i) / static_cast<double>(bins);
    return edges;
}

CompareResult correspondence_compare(const KrylovBasis& basis, double reference_alpha,
                                     const std::vector<DampingKernel>& families,
                                     double eps, std::size_t bins) {
    if (!(reference_alpha > 0.0 && reference_alpha < 1.0))
        throw std::domain_error("compare: reference alpha must lie in (0, 1)");
    if (families.empty()) throw std::invalid_argument("compare: no families given");

    CompareResult out;
    out.reference_alpha = reference_alpha;
    out.target_mean = reference_alpha / (1.0 - reference_alpha);

    for (const DampingKernel& kernel : families) {
        FamilyComparison fc;
        fc.rho_star = correspondence_solve(kernel, out.target_mean);
        fc.mean = kernel.mean_steps(fc.rho_star);
        const SpectralCoeffs c = eval_series_coeffs(basis, kernel, fc.rho_star, eps);
        fc.family = c.kernel_id;
        fc.x = lift(basis, c.coeffs);
        out.families.push_back(std::move(fc));
    }

    // one shared edge set so the histograms align bin for bin
    double hi = 0.0;
    for (const auto& fc : out.families) {
        const auto e = default_histogram_edges(fc.x, bins);
        hi = std::max(hi, e.back());
    }
    std::vector<double> edges(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i)
        edges[i] = hi * static_cast<double>(i) / static_cast<double>(bins);
    for (auto& fc : out.families) fc.hist = histogram(fc.x, edges);

    const std::size_t f = out.families.size();
    out.pairwise_kl.assign(f, std::vector<double>(f, 0.0));
    for (std::size_t i = 0; i < f; ++i)
        for (std::size_t j = 0; j < f; ++j)
            out.pairwise_kl[i][j] =
                i == j ? 0.0 : kl_divergence(out.families[i].x, out.families[j].x);
    return out;
}

} // namespace damprank
