#include "damprank/krylov.hpp"

#include "damprank/errors.hpp"
#include "damprank/format.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace damprank {

namespace {

constexpr std::uint64_t step_cap = 1'000'000;

std::string kernel_id_of(const DampingKernel& k) {
    if (k.family() != KernelFamily::cmp) return k.name();
    return "cmp-nu" + format_double(k.shape());
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void axpy(double a, const std::vector<double>& x, std::vector<double>& y) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

double norm2(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

/// Smallest K with tail_mass(K) <= eps. A running 1-prefix screen finds the
/// candidate cheaply; the rigorous tail seals it.
std::pair<std::uint64_t, double> choose_mass_K(const DampingKernel& kernel, double rho,
                                               double eps) {
    double prefix = 0.0, comp = 0.0;
    for (std::uint64_t k = 0;; ++k) {
        if (k > step_cap)
            throw numeric_error(kernel.name() + ": series needs more than " +
                                std::to_string(step_cap) + " terms for eps=" +
                                format_double(eps));
        const double y = kernel.weight(k, rho) - comp;
        const double t = prefix + y;
        comp = (t - prefix) - y;
        prefix = t;
        if (1.0 - prefix > 0.5 * eps) continue;
        std::uint64_t K = k;
        double tail = kernel.tail_mass(K, rho);
        while (tail > eps) {
            if (++K > step_cap)
                throw numeric_error(kernel.name() + ": series truncation exceeded step cap");
            tail = kernel.tail_mass(K, rho);
        }
        return {K, tail};
    }
}

std::pair<std::uint64_t, double> choose_derivative_K(const DampingKernel& kernel, double rho,
                                                     double eps) {
    auto [K, ignored] = choose_mass_K(kernel, rho, eps);
    double bound = kernel.derivative_tail_bound(K, rho);
    while (bound > eps) {
        K += std::max<std::uint64_t>(8, K / 8);
        if (K > step_cap)
            throw numeric_error(kernel.name() + ": derivative truncation exceeded step cap");
        bound = kernel.derivative_tail_bound(K, rho);
    }
    return {K, bound};
}

/// Shared work loop behind both eval entry points and batch_rank. When a
/// precomputed power sequence is supplied the same multiply-accumulate order
/// is preserved, so results are bit-identical with the standalone path.
SpectralCoeffs eval_impl(const KrylovBasis& basis, const DampingKernel& kernel, double rho,
                         double eps, bool derivative,
                         const std::vector<Eigen::VectorXd>* powers) {
    if (basis.m == 0) throw std::invalid_argument("eval: empty basis");
    if (!(eps > 0.0 && eps < 1.0))
        throw std::invalid_argument("eval: eps must be in (0, 1)");
    if (!kernel.in_domain(rho))
        throw std::domain_error(kernel.name() + ": " + kernel.param_name() + "=" +
                                format_double(rho) + " out of domain");

    const auto [K, tail] = derivative ? choose_derivative_K(kernel, rho, eps)
                                      : choose_mass_K(kernel, rho, eps);

    const auto m = static_cast<Eigen::Index>(basis.m);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd h = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd tmp(m);
    h(0) = 1.0;
    double weighted_steps = 0.0; // sum_k k*|w_k|, scales the breakdown term
    for (std::uint64_t k = 0; k <= K; ++k) {
        if (k > 0 && powers == nullptr) {
            tmp.noalias() = basis.H * h;
            h.swap(tmp);
        }
        const Eigen::VectorXd& hk = powers ? (*powers)[k] : h;
        const double w = derivative ? kernel.weight_derivative(k, rho) : kernel.weight(k, rho);
        acc += w * hk;
        weighted_steps += static_cast<double>(k) * std::abs(w);
    }

    SpectralCoeffs out;
    out.coeffs = std::move(acc);
    out.kernel_id = kernel_id_of(kernel);
    out.rho = rho;
    out.K_used = K;
    out.tail_bound = basis.v_l1 * (tail + basis.breakdown_residual() * weighted_steps);
    return out;
}

} // namespace

KrylovBasis arnoldi_build(const ColumnStochastic& P, const PersonalizationVector& v,
                          double tol, std::size_t m_max) {
    const std::size_t n = P.dimension();
    if (v.size() != n)
        throw std::invalid_argument("arnoldi: vector length does not match operator");
    if (!(tol >= 0.0) || m_max == 0)
        throw std::invalid_argument("arnoldi: need tol >= 0 and m_max >= 1");

    KrylovBasis b;
    b.n = n;
    b.tol = tol;
    b.sigma = norm2(v.v);
    if (b.sigma == 0.0) throw std::invalid_argument("arnoldi: zero start vector");
    b.v_l1 = v.l1_norm();
    b.graph_hash = P.source_graph_hash();
    b.v_seed = v.seed;
    b.v_mode = v.mode;
    b.v_generated = v.generated;

    const std::size_t m_limit = std::min(m_max, n);
    std::vector<std::vector<double>> hcols; // column k holds h_{0..k+1,k}
    b.Q.emplace_back(v.v);
    for (double& x : b.Q.back()) x /= b.sigma;

    std::vector<double> w(n);
    for (std::size_t k = 0; k < m_limit; ++k) {
        P.multiply(b.Q[k], w);
        hcols.emplace_back(k + 2, 0.0);
        auto& hk = hcols.back();
        for (std::size_t j = 0; j <= k; ++j) {
            hk[j] = dot(b.Q[j], w);
            axpy(-hk[j], b.Q[j], w);
        }
        // second modified Gram-Schmidt pass restores orthogonality lost to
        // cancellation; the corrections fold into the same column
        for (std::size_t j = 0; j <= k; ++j) {
            const double c = dot(b.Q[j], w);
            axpy(-c, b.Q[j], w);
            hk[j] += c;
        }
        const double eta = norm2(w);
        hk[k + 1] = eta;
        b.residuals.push_back(eta);
        if (eta <= tol * b.sigma) {
            b.happy = true;
            break;
        }
        if (k + 1 == m_limit) break;
        b.Q.emplace_back(w);
        for (double& x : b.Q.back()) x /= eta;
    }

    b.m = hcols.size();
    b.H = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(b.m), static_cast<Eigen::Index>(b.m));
    for (std::size_t k = 0; k < b.m; ++k)
        for (std::size_t j = 0; j <= k + 1 && j < b.m; ++j)
            b.H(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = hcols[k][j];
    return b;
}

SpectralCoeffs eval_series_coeffs(const KrylovBasis& basis, const DampingKernel& kernel,
                                  double rho, double eps) {
    return eval_impl(basis, kernel, rho, eps, false, nullptr);
}

SpectralCoeffs eval_derivative_coeffs(const KrylovBasis& basis, const DampingKernel& kernel,
                                      double rho, double eps) {
    return eval_impl(basis, kernel, rho, eps, true, nullptr);
}

std::vector<double> lift(const KrylovBasis& basis, const Eigen::VectorXd& coeffs) {
    if (static_cast<std::size_t>(coeffs.size()) != basis.m)
        throw std::invalid_argument("lift: coefficient length does not match basis");
    std::vector<double> x(basis.n, 0.0);
    for (std::size_t j = 0; j < basis.m; ++j)
        axpy(basis.sigma * coeffs(static_cast<Eigen::Index>(j)), basis.Q[j], x);
    return x;
}

Eigen::VectorXd resolvent_coeffs(const KrylovBasis& basis, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::domain_error("resolvent_coeffs: alpha must lie in (0, 1)");
    const auto m = static_cast<Eigen::Index>(basis.m);
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(m, m) - alpha * basis.H;
    Eigen::VectorXd e1 = Eigen::VectorXd::Zero(m);
    e1(0) = 1.0;
    return (1.0 - alpha) * A.partialPivLu().solve(e1);
}

std::vector<double> krylov_rrqr_diag(const ColumnStochastic& P, const PersonalizationVector& v,
                                     std::size_t k_max, std::size_t budget_bytes) {
    const std::size_t n = P.dimension();
    if (v.size() != n)
        throw std::invalid_argument("rrqr: vector length does not match operator");
    if (k_max == 0) throw std::invalid_argument("rrqr: k_max must be >= 1");
    if (n > budget_bytes / sizeof(double) / k_max)
        throw numeric_error("rrqr: explicit Krylov matrix exceeds memory budget");

    Eigen::MatrixXd M(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k_max));
    std::vector<double> col = v.v, next(n);
    for (std::size_t k = 0; k < k_max; ++k) {
        for (std::size_t i = 0; i < n; ++i) M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = col[i];
        if (k + 1 < k_max) {
            P.multiply(col, next);
            col.swap(next);
        }
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(M);
    const Eigen::Index r = std::min(M.rows(), M.cols());
    std::vector<double> rkk(static_cast<std::size_t>(r));
    for (Eigen::Index i = 0; i < r; ++i) rkk[static_cast<std::size_t>(i)] = std::abs(qr.matrixR()(i, i));
    std::sort(rkk.begin(), rkk.end(), std::greater<>());
    return rkk;
}

std::size_t numerical_dimension(const std::vector<double>& rkk, double rel_cutoff) {
    if (rkk.empty() || rkk.front() == 0.0) return 0;
    const double cut = rel_cutoff * rkk.front();
    std::size_t d = 0;
    for (double r : rkk)
        if (r > cut) ++d;
    return d;
}

std::vector<RankRow> batch_rank(const KrylovBasis& basis, const std::vector<RankJob>& jobs,
                                double eps, int threads) {
    if (threads < 1) throw std::invalid_argument("batch_rank: threads must be >= 1");

    struct Row {
        const RankJob* job;
        double rho;
    };
    std::vector<Row> flat;
    for (const auto& job : jobs)
        for (double rho : job.rhos) flat.push_back({&job, rho});

    std::vector<RankRow> rows(flat.size());

    // Truncation depths first: they need only kernel math, and the largest one
    // sizes the shared power sequence.
    std::uint64_t K_max = 0;
    for (std::size_t i = 0; i < flat.size(); ++i) {
        rows[i].kernel_id = kernel_id_of(flat[i].job->kernel);
        rows[i].rho = flat[i].rho;
        try {
            auto [K, tail] = choose_mass_K(flat[i].job->kernel, flat[i].rho, eps);
            (void)tail;
            K_max = std::max(K_max, K);
            if (flat[i].job->want_derivative) {
                auto [Kd, bound] = choose_derivative_K(flat[i].job->kernel, flat[i].rho, eps);
                (void)bound;
                K_max = std::max(K_max, Kd);
            }
            rows[i].ok = true; // provisional; evaluation may still fail
        } catch (const std::exception& e) {
            rows[i].ok = false;
            rows[i].error = e.what();
        }
    }

    // Shared read-only sequence h_k = H^k e1, unless it would not fit.
    std::vector<Eigen::VectorXd> powers;
    const std::size_t seq_bytes = (static_cast<std::size_t>(K_max) + 1) * basis.m * sizeof(double);
    const std::vector<Eigen::VectorXd>* shared = nullptr;
    if (seq_bytes <= (std::size_t{1} << 30)) {
        const auto m = static_cast<Eigen::Index>(basis.m);
        powers.reserve(K_max + 1);
        powers.emplace_back(Eigen::VectorXd::Zero(m));
        powers[0](0) = 1.0;
        Eigen::VectorXd tmp(m);
        for (std::uint64_t k = 1; k <= K_max; ++k) {
            tmp.noalias() = basis.H * powers.back();
            powers.emplace_back(tmp);
        }
        shared = &powers;
    }

    auto run_row = [&](std::size_t i) {
        if (!rows[i].ok) return;
        const RankJob& job = *flat[i].job;
        try {
            SpectralCoeffs c = eval_impl(basis, job.kernel, flat[i].rho, eps, false, shared);
            if (job.want_lift) rows[i].lifted = lift(basis, c.coeffs);
            rows[i].coeffs = std::move(c);
            if (job.want_derivative) {
                SpectralCoeffs d = eval_impl(basis, job.kernel, flat[i].rho, eps, true, shared);
                if (job.want_lift) rows[i].lifted_derivative = lift(basis, d.coeffs);
                rows[i].derivative = std::move(d);
            }
        } catch (const std::exception& e) {
            rows[i].ok = false;
            rows[i].error = e.what();
            rows[i].coeffs.reset();
            rows[i].derivative.reset();
            rows[i].lifted.reset();
            rows[i].lifted_derivative.reset();
        }
    };

    const int nt = std::min<int>(threads, static_cast<int>(flat.size()));
    if (nt <= 1) {
        for (std::size_t i = 0; i < flat.size(); ++i) run_row(i);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(nt));
        for (int t = 0; t < nt; ++t)
            pool.emplace_back([&, t] {
                for (std::size_t i = static_cast<std::size_t>(t); i < flat.size();
                     i += static_cast<std::size_t>(nt))
                    run_row(i);
            });
        for (auto& th : pool) th.join();
    }
    return rows;
}

} // namespace damprank
