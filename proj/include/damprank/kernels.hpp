#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace damprank {

enum class KernelFamily { geometric, poisson, logarithmic, cmp };

/// A damping model: a discrete pmf w_k(rho) over walk lengths k.
///
///   geometric     w_k = (1-a) a^k            k >= 0,  a in (0,1)
///   poisson       w_k = e^-b b^k / k!        k >= 0,  b in (0,inf)
///   logarithmic   w_k = -g^k / (k ln(1-g))   k >= 1,  g in (0,1)
///   cmp           w_k = r^k / ((k!)^nu Z)    k >= 0,  nu >= 0
///
/// The CMP decay-rate limits nu=0 and nu=1 coincide with the geometric and
/// Poisson families; its parameter domain is (0,1) when nu=0 and (0,inf)
/// otherwise. Objects are cheap values; the CMP normalizer is cached per rho
/// behind a lock, so all operations are safe to call concurrently.
class DampingKernel {
public:
    static DampingKernel geometric();
    static DampingKernel poisson();
    static DampingKernel logarithmic();
    static DampingKernel cmp(double nu);

    KernelFamily family() const { return family_; }
    double shape() const { return nu_; }
    std::string name() const;       // "geometric" | "poisson" | "logarithmic" | "cmp"
    std::string param_name() const; // "alpha" | "beta" | "gamma" | "rho"

    std::uint64_t support_start() const {
        return family_ == KernelFamily::logarithmic ? 1 : 0;
    }
    std::pair<double, double> param_domain() const; // open interval
    bool in_domain(double rho) const;

    /// w_k(rho). Throws std::domain_error for rho outside the domain.
    double weight(std::uint64_t k, double rho) const;

    /// Analytic d w_k / d rho.
    double weight_derivative(std::uint64_t k, double rho) const;

    /// sum_{k > K} w_k(rho), in [0, 1].
    double tail_mass(std::uint64_t K, double rho) const;

    /// Upper bound on sum_{k > K} |w'_k(rho)|.
    double derivative_tail_bound(std::uint64_t K, double rho) const;

    /// Expected walk length mu = sum_k k w_k(rho).
    double mean_steps(double rho) const;

private:
    DampingKernel(KernelFamily f, double nu);

    struct CmpNorm {       // per-rho normalizer data
        double log_z;
        double mean;
    };
    const CmpNorm& cmp_norm(double rho) const;
    double cmp_log_term(std::uint64_t k, double rho) const;

    KernelFamily family_;
    double nu_ = 0.0;
    struct Cache;
    std::shared_ptr<Cache> cache_;
};

/// Solve mean_steps(kernel, rho*) = target_mean on the strictly increasing
/// mean curve; |mean(rho*) - target| <= 1e-10 * (1 + target). The Poisson
/// family returns target_mean exactly.
double correspondence_solve(const DampingKernel& kernel, double target_mean);

/// One CLI kernel spec: family plus the requested parameter values.
struct KernelSpec {
    DampingKernel kernel;
    std::vector<double> rhos;
};

/// Parse `geometric:alpha=0.85`, `poisson:beta=1,2,3`, `log:gamma=0.7:0.9:0.1`,
/// `cmp:rho=2.0,nu=1.5` (case-insensitive; values may mix scalars and
/// start:stop:step ranges). Throws std::invalid_argument on bad input.
KernelSpec parse_kernel_spec(const std::string& text);

} // namespace damprank
