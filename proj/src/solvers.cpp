#include "damprank/solvers.hpp"

#include "damprank/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace damprank {

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::domain_error("alpha must lie in (0, 1)");
}

double l1_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s;
}

} // namespace

SolveResult power_method(const ColumnStochastic& P, const PersonalizationVector& v,
                         double alpha, double tol, std::size_t max_iter) {
    check_alpha(alpha);
    const std::size_t n = P.dimension();
    if (v.size() != n) throw std::invalid_argument("power_method: vector length mismatch");
    if (!v.nonnegative())
        throw std::invalid_argument("power_method: needs a nonnegative personalization");
    if (!P.fully_stochastic())
        throw std::invalid_argument("power_method: operator loses mass; pick a dangling patch");
    if (!(tol > 0.0)) throw std::invalid_argument("power_method: tol must be positive");

    const auto t0 = clock_type::now();
    SolveResult r;
    r.x = v.v;
    std::vector<double> Px(n), next(n);
    for (std::size_t it = 1; it <= max_iter; ++it) {
        P.multiply(r.x, Px);
        for (std::size_t i = 0; i < n; ++i) next[i] = alpha * Px[i] + (1.0 - alpha) * v.v[i];
        const double diff = l1_diff(next, r.x);
        r.x.swap(next);
        r.report.iterations = it;
        r.report.final_residual = diff;
        if (diff <= tol) {
            r.report.converged = true;
            break;
        }
    }
    r.report.wall_time = seconds_since(t0);
    return r;
}

SolveResult gauss_seidel(const ColumnStochastic& P, const PersonalizationVector& v,
                         double alpha, double tol, std::size_t max_iter,
                         const std::vector<double>* x0) {
    check_alpha(alpha);
    const std::size_t n = P.dimension();
    if (v.size() != n) throw std::invalid_argument("gauss_seidel: vector length mismatch");
    if (x0 && x0->size() != n) throw std::invalid_argument("gauss_seidel: warm start length mismatch");
    if (!(tol > 0.0)) throw std::invalid_argument("gauss_seidel: tol must be positive");

    const auto t0 = clock_type::now();
    const RowMirror& rows = P.row_mirror();
    const auto patch = P.patch();
    const auto dang = P.dangling_nodes();
    const bool patched = !patch.empty() && !dang.empty();
    std::vector<char> is_dangling(n, 0);
    for (std::uint32_t j : dang) is_dangling[j] = 1;

    SolveResult r;
    r.x = x0 ? *x0 : v.v;
    std::vector<double>& x = r.x;
    std::vector<double> Px(n);

    for (std::size_t sweep = 1; sweep <= max_iter; ++sweep) {
        double s = 0.0; // dangling mass, kept current within the sweep
        if (patched)
            for (std::uint32_t j : dang) s += x[j];
        for (std::size_t i = 0; i < n; ++i) {
            double row = 0.0;
            for (std::size_t p = rows.row_ptr[i]; p < rows.row_ptr[i + 1]; ++p)
                row += rows.values[p] * x[rows.col_idx[p]];
            row -= rows.diag[i] * x[i];
            double diag = rows.diag[i];
            if (patched) {
                row += patch[i] * s;
                if (is_dangling[i]) {
                    row -= patch[i] * x[i];
                    diag += patch[i];
                }
            }
            const double xi = ((1.0 - alpha) * v.v[i] + alpha * row) / (1.0 - alpha * diag);
            if (patched && is_dangling[i]) s += xi - x[i];
            x[i] = xi;
        }
        P.multiply(x, Px);
        double resid = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            resid += std::abs((1.0 - alpha) * v.v[i] + alpha * Px[i] - x[i]);
        r.report.iterations = sweep;
        r.report.final_residual = resid;
        if (resid <= tol) {
            r.report.converged = true;
            break;
        }
    }
    r.report.wall_time = seconds_since(t0);
    return r;
}

SeriesResult direct_series(const ColumnStochastic& P, const PersonalizationVector& v,
                           const DampingKernel& kernel, double rho, double eps) {
    const std::size_t n = P.dimension();
    if (v.size() != n) throw std::invalid_argument("direct_series: vector length mismatch");
    if (!(eps > 0.0 && eps < 1.0))
        throw std::invalid_argument("direct_series: eps must be in (0, 1)");
    if (!kernel.in_domain(rho))
        throw std::domain_error(kernel.name() + ": " + kernel.param_name() + " out of domain");

    constexpr std::uint64_t step_cap = 1'000'000;
    std::uint64_t K = 0;
    {
        double prefix = 0.0, comp = 0.0;
        for (std::uint64_t k = 0;; ++k) {
            if (k > step_cap)
                throw numeric_error(kernel.name() + ": series truncation exceeded step cap");
            const double y = kernel.weight(k, rho) - comp;
            const double t = prefix + y;
            comp = (t - prefix) - y;
            prefix = t;
            if (1.0 - prefix > 0.5 * eps) continue;
            K = k;
            break;
        }
        while (kernel.tail_mass(K, rho) > eps)
            if (++K > step_cap)
                throw numeric_error(kernel.name() + ": series truncation exceeded step cap");
    }

    SeriesResult r;
    r.K_used = K;
    r.tail_bound = kernel.tail_mass(K, rho) * v.l1_norm();
    r.x.assign(n, 0.0);
    std::vector<double> pk = v.v, next(n);
    for (std::uint64_t k = 0; k <= K; ++k) {
        if (k > 0) {
            P.multiply(pk, next);
            pk.swap(next);
        }
        const double w = kernel.weight(k, rho);
        if (w != 0.0)
            for (std::size_t i = 0; i < n; ++i) r.x[i] += w * pk[i];
    }
    return r;
}

CascadeResult cascade_sweep(const ColumnStochastic& P, const PersonalizationVector& v,
                            const std::vector<double>& alpha_grid, double tol,
                            bool with_control, std::size_t max_iter) {
    if (alpha_grid.empty()) throw std::invalid_argument("cascade: empty alpha grid");
    for (std::size_t i = 0; i < alpha_grid.size(); ++i) {
        check_alpha(alpha_grid[i]);
        if (i > 0 && !(alpha_grid[i] > alpha_grid[i - 1]))
            throw std::invalid_argument("cascade: alpha grid must be strictly ascending");
    }

    CascadeResult out;
    out.alphas = alpha_grid;
    const std::vector<double>* prev = nullptr;
    for (double alpha : alpha_grid) {
        out.warm.push_back(gauss_seidel(P, v, alpha, tol, max_iter, prev));
        prev = &out.warm.back().x;
        if (with_control)
            out.cold.push_back(gauss_seidel(P, v, alpha, tol, max_iter).report);
    }
    return out;
}

std::vector<double> block_solve(const ColumnStochastic& P, const BlockOrdering& ordering,
                                const PersonalizationVector& v, double alpha,
                                double tol, std::size_t max_iter) {
    check_alpha(alpha);
    const std::size_t n = P.dimension();
    if (v.size() != n) throw std::invalid_argument("block_solve: vector length mismatch");
    if (!(tol > 0.0)) throw std::invalid_argument("block_solve: tol must be positive");
    if (ordering.source_graph_hash != P.source_graph_hash())
        throw data_error("block_solve: ordering was built from a different graph");
    if (ordering.perm.size() != n || ordering.block_id.size() != n)
        throw data_error("block_solve: ordering does not match operator size");

    const RowMirror& rows = P.row_mirror();

    // w = (I - alpha A)^-1 rhs for the link part A, blocks from sources down.
    auto triangular_solve = [&](const std::vector<double>& rhs) {
        std::vector<double> w(n, 0.0);
        std::vector<std::pair<std::uint32_t, double>> inner;
        std::vector<double> r_block;
        for (std::size_t b = ordering.block_count(); b-- > 0;) {
            const std::size_t first = ordering.block_starts[b];
            const std::size_t last = ordering.block_starts[b + 1];
            const std::size_t size = last - first;
            if (size == 1) {
                const std::uint32_t i = ordering.perm[first];
                double acc = rhs[i];
                double diag = 0.0;
                for (std::size_t p = rows.row_ptr[i]; p < rows.row_ptr[i + 1]; ++p) {
                    const std::uint32_t j = rows.col_idx[p];
                    if (j == i)
                        diag = rows.values[p];
                    else
                        acc += alpha * rows.values[p] * w[j];
                }
                w[i] = acc / (1.0 - alpha * diag);
                continue;
            }
            // fold solved blocks into the right side, keep in-block entries
            inner.clear();
            r_block.assign(size, 0.0);
            std::vector<std::size_t> inner_ptr(size + 1, 0);
            for (std::size_t q = 0; q < size; ++q) {
                const std::uint32_t i = ordering.perm[first + q];
                double acc = rhs[i];
                for (std::size_t p = rows.row_ptr[i]; p < rows.row_ptr[i + 1]; ++p) {
                    const std::uint32_t j = rows.col_idx[p];
                    if (ordering.block_id[j] == b)
                        inner.emplace_back(j, rows.values[p]);
                    else
                        acc += alpha * rows.values[p] * w[j];
                }
                r_block[q] = acc;
                inner_ptr[q + 1] = inner.size();
            }
            bool done = false;
            for (std::size_t sweep = 0; sweep < max_iter && !done; ++sweep) {
                for (std::size_t q = 0; q < size; ++q) {
                    const std::uint32_t i = ordering.perm[first + q];
                    double row = 0.0, diag = 0.0;
                    for (std::size_t p = inner_ptr[q]; p < inner_ptr[q + 1]; ++p) {
                        if (inner[p].first == i)
                            diag = inner[p].second;
                        else
                            row += inner[p].second * w[inner[p].first];
                    }
                    w[i] = (r_block[q] + alpha * row) / (1.0 - alpha * diag);
                }
                double resid = 0.0;
                for (std::size_t q = 0; q < size; ++q) {
                    const std::uint32_t i = ordering.perm[first + q];
                    double row = 0.0;
                    for (std::size_t p = inner_ptr[q]; p < inner_ptr[q + 1]; ++p)
                        row += inner[p].second * w[inner[p].first];
                    resid += std::abs(r_block[q] + alpha * row - w[i]);
                }
                done = resid <= tol;
            }
            if (!done) throw numeric_error("block_solve: diagonal block did not converge");
        }
        return w;
    };

    const std::vector<double> w = triangular_solve(v.v);
    const auto dang = P.dangling_nodes();
    const auto patch = P.patch();
    auto dangling_sum = [&](const std::vector<double>& y) {
        double s = 0.0;
        for (std::uint32_t j : dang) s += y[j];
        return s;
    };

    std::vector<double> x(n);
    if (dang.empty() || patch.empty()) {
        for (std::size_t i = 0; i < n; ++i) x[i] = (1.0 - alpha) * w[i];
        return x;
    }
    // Rank-one closure: with the patch column p on the dangling set,
    // x = (1-a) w + a (d^T x) z where z = (I - aA)^-1 p, and d^T x follows
    // from taking the dangling sum of both sides.
    const std::vector<double> z = triangular_solve({patch.begin(), patch.end()});
    const double dx = (1.0 - alpha) * dangling_sum(w) / (1.0 - alpha * dangling_sum(z));
    for (std::size_t i = 0; i < n; ++i) x[i] = (1.0 - alpha) * w[i] + alpha * dx * z[i];
    return x;
}

} // namespace damprank
