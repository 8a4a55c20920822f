#include "damprank/kernels.hpp"

#include "damprank/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>

namespace damprank {

namespace {

constexpr std::uint64_t term_cap = 20'000'000; // per-sum iteration guard

struct KahanSum {
    double s = 0.0, c = 0.0;
    void add(double x) {
        const double y = x - c;
        const double t = s + y;
        c = (t - s) - y;
        s = t;
    }
    double value() const { return s; }
};

double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }

double log_poisson_term(std::uint64_t k, double b) {
    return static_cast<double>(k) * std::log(b) - b - std::lgamma(static_cast<double>(k) + 1.0);
}

} // namespace

struct DampingKernel::Cache {
    std::mutex mu;
    std::map<double, CmpNorm> by_rho;
};

DampingKernel::DampingKernel(KernelFamily f, double nu)
    : family_(f), nu_(nu), cache_(std::make_shared<Cache>()) {}

DampingKernel DampingKernel::geometric() { return DampingKernel(KernelFamily::geometric, 0.0); }
DampingKernel DampingKernel::poisson() { return DampingKernel(KernelFamily::poisson, 0.0); }
DampingKernel DampingKernel::logarithmic() { return DampingKernel(KernelFamily::logarithmic, 0.0); }

DampingKernel DampingKernel::cmp(double nu) {
    if (!std::isfinite(nu) || nu < 0.0)
        throw std::invalid_argument("cmp: nu must be finite and >= 0");
    return DampingKernel(KernelFamily::cmp, nu);
}

std::string DampingKernel::name() const {
    switch (family_) {
    case KernelFamily::geometric: return "geometric";
    case KernelFamily::poisson: return "poisson";
    case KernelFamily::logarithmic: return "logarithmic";
    case KernelFamily::cmp: return "cmp";
    }
    return {};
}

std::string DampingKernel::param_name() const {
    switch (family_) {
    case KernelFamily::geometric: return "alpha";
    case KernelFamily::poisson: return "beta";
    case KernelFamily::logarithmic: return "gamma";
    case KernelFamily::cmp: return "rho";
    }
    return {};
}

std::pair<double, double> DampingKernel::param_domain() const {
    const double inf = std::numeric_limits<double>::infinity();
    switch (family_) {
    case KernelFamily::geometric: return {0.0, 1.0};
    case KernelFamily::poisson: return {0.0, inf};
    case KernelFamily::logarithmic: return {0.0, 1.0};
    case KernelFamily::cmp: return nu_ == 0.0 ? std::pair{0.0, 1.0} : std::pair{0.0, inf};
    }
    return {0.0, 0.0};
}

bool DampingKernel::in_domain(double rho) const {
    if (std::isnan(rho)) return false;
    auto [lo, hi] = param_domain();
    return rho > lo && rho < hi;
}

double DampingKernel::cmp_log_term(std::uint64_t k, double rho) const {
    return static_cast<double>(k) * std::log(rho) -
           nu_ * std::lgamma(static_cast<double>(k) + 1.0);
}

const DampingKernel::CmpNorm& DampingKernel::cmp_norm(double rho) const {
    std::lock_guard lock(cache_->mu);
    auto it = cache_->by_rho.find(rho);
    if (it != cache_->by_rho.end()) return it->second;

    CmpNorm norm{};
    if (nu_ == 0.0) {
        norm.log_z = -std::log1p(-rho);
        norm.mean = rho / (1.0 - rho);
    } else {
        // Terms peak near k* = rho^(1/nu); log-sum-exp around the peak.
        const double k_star = std::pow(rho, 1.0 / nu_);
        if (!(k_star < static_cast<double>(term_cap)))
            throw numeric_error("cmp: normalizer peak beyond iteration budget");
        const auto k0 = static_cast<std::uint64_t>(std::max(0.0, std::floor(k_star)));
        const double big = cmp_log_term(k0, rho);
        KahanSum s0, s1;
        for (std::uint64_t k = k0 + 1;; ++k) {
            if (k - k0 > term_cap) throw numeric_error("cmp: normalizer sum did not converge");
            const double t = std::exp(cmp_log_term(k, rho) - big);
            s0.add(t);
            s1.add(static_cast<double>(k) * t);
            if (t <= 1e-22 * s0.value()) break;
        }
        for (std::uint64_t k = k0 + 1; k-- > 0;) {
            const double t = std::exp(cmp_log_term(k, rho) - big);
            s0.add(t);
            s1.add(static_cast<double>(k) * t);
            if (t <= 1e-22 * s0.value()) break;
        }
        norm.log_z = big + std::log(s0.value());
        norm.mean = s1.value() / s0.value();
    }
    return cache_->by_rho.emplace(rho, norm).first->second;
}

double DampingKernel::weight(std::uint64_t k, double rho) const {
    if (!in_domain(rho))
        throw std::domain_error(name() + ": " + param_name() + " out of domain");
    switch (family_) {
    case KernelFamily::geometric:
        return (1.0 - rho) * std::pow(rho, static_cast<double>(k));
    case KernelFamily::poisson:
        return k == 0 ? std::exp(-rho) : std::exp(log_poisson_term(k, rho));
    case KernelFamily::logarithmic: {
        if (k == 0) return 0.0;
        const double c = -1.0 / std::log1p(-rho);
        return c * std::pow(rho, static_cast<double>(k)) / static_cast<double>(k);
    }
    case KernelFamily::cmp:
        return std::exp(cmp_log_term(k, rho) - cmp_norm(rho).log_z);
    }
    return 0.0;
}

double DampingKernel::weight_derivative(std::uint64_t k, double rho) const {
    if (!in_domain(rho))
        throw std::domain_error(name() + ": " + param_name() + " out of domain");
    const auto kd = static_cast<double>(k);
    switch (family_) {
    case KernelFamily::geometric:
        if (k == 0) return -1.0;
        return std::pow(rho, kd - 1.0) * (kd - (kd + 1.0) * rho);
    case KernelFamily::poisson:
        return k == 0 ? -std::exp(-rho) : weight(k - 1, rho) - weight(k, rho);
    case KernelFamily::logarithmic: {
        if (k == 0) return 0.0;
        const double lg = std::log1p(-rho);
        const double c = -1.0 / lg;
        const double dc = -1.0 / ((1.0 - rho) * lg * lg);
        return dc * std::pow(rho, kd) / kd + c * std::pow(rho, kd - 1.0);
    }
    case KernelFamily::cmp:
        return weight(k, rho) * (kd - cmp_norm(rho).mean) / rho;
    }
    return 0.0;
}

double DampingKernel::tail_mass(std::uint64_t K, double rho) const {
    if (!in_domain(rho))
        throw std::domain_error(name() + ": " + param_name() + " out of domain");
    switch (family_) {
    case KernelFamily::geometric:
        return std::pow(rho, static_cast<double>(K) + 1.0);

    case KernelFamily::poisson: {
        if (static_cast<double>(K) < rho) {
            // Head is the smaller piece: sum it downward from k = K.
            if (K > term_cap) throw numeric_error("poisson: tail iteration budget exceeded");
            KahanSum head;
            double t = std::exp(log_poisson_term(K, rho));
            for (std::uint64_t k = K;; --k) {
                if ((K - k) % 1024 == 1023) t = std::exp(log_poisson_term(k, rho));
                head.add(t);
                if (k == 0) break;
                t *= static_cast<double>(k) / rho;
            }
            return clamp01(1.0 - head.value());
        }
        KahanSum tail;
        double t = std::exp(log_poisson_term(K + 1, rho));
        for (std::uint64_t k = K + 1;; ++k) {
            if (k - K > term_cap) throw numeric_error("poisson: tail sum did not converge");
            if ((k - K) % 1024 == 0) t = std::exp(log_poisson_term(k, rho));
            tail.add(t);
            const double r = rho / (static_cast<double>(k) + 2.0);
            if (t == 0.0 || (r < 1.0 && t * r / (1.0 - r) <= 1e-18 * tail.value())) break;
            t *= rho / (static_cast<double>(k) + 1.0);
        }
        return clamp01(tail.value());
    }

    case KernelFamily::logarithmic: {
        if (K == 0) return 1.0;
        const double c = -1.0 / std::log1p(-rho);
        KahanSum tail;
        double t = c * std::pow(rho, static_cast<double>(K) + 1.0) / (static_cast<double>(K) + 1.0);
        for (std::uint64_t k = K + 1;; ++k) {
            if (k - K > term_cap) throw numeric_error("logarithmic: tail sum did not converge");
            tail.add(t);
            // ratio t_{k+1}/t_k = rho * k/(k+1) < rho
            if (t * rho / (1.0 - rho) <= 1e-18 * tail.value()) break;
            t *= rho * static_cast<double>(k) / (static_cast<double>(k) + 1.0);
        }
        return clamp01(tail.value());
    }

    case KernelFamily::cmp: {
        const double log_z = cmp_norm(rho).log_z;
        const double k_star = nu_ == 0.0 ? 0.0 : std::pow(rho, 1.0 / nu_);
        if (static_cast<double>(K) < k_star) {
            KahanSum head;
            for (std::uint64_t k = 0; k <= K; ++k)
                head.add(std::exp(cmp_log_term(k, rho) - log_z));
            return clamp01(1.0 - head.value());
        }
        KahanSum tail;
        for (std::uint64_t k = K + 1;; ++k) {
            if (k - K > term_cap) throw numeric_error("cmp: tail sum did not converge");
            const double t = std::exp(cmp_log_term(k, rho) - log_z);
            tail.add(t);
            const double r = rho / std::pow(static_cast<double>(k) + 2.0, nu_);
            if (t == 0.0 || (r < 1.0 && t * r / (1.0 - r) <= 1e-18 * tail.value())) break;
        }
        return clamp01(tail.value());
    }
    }
    return 0.0;
}

double DampingKernel::derivative_tail_bound(std::uint64_t K, double rho) const {
    if (!in_domain(rho))
        throw std::domain_error(name() + ": " + param_name() + " out of domain");
    const auto Kd = static_cast<double>(K);
    switch (family_) {
    case KernelFamily::geometric:
        // sum_{k>K} a^{k-1}(k(1-a) + a), a >= |w'_k| termwise
        return std::pow(rho, Kd) * (Kd + 1.0 - (Kd - 1.0) * rho) / (1.0 - rho);
    case KernelFamily::poisson:
        // |w'_k| <= w_{k-1} + w_k
        return (K == 0 ? 1.0 : tail_mass(K - 1, rho)) + tail_mass(K, rho);
    case KernelFamily::logarithmic: {
        const double lg = std::log1p(-rho);
        const double c = -1.0 / lg;
        const double dc_abs = 1.0 / ((1.0 - rho) * lg * lg);
        return dc_abs * std::pow(rho, Kd + 1.0) / ((Kd + 1.0) * (1.0 - rho)) +
               c * std::pow(rho, Kd) / (1.0 - rho);
    }
    case KernelFamily::cmp: {
        // |w'_k| = w_k |k - mu| / rho <= (k w_k + mu w_k) / rho
        const double mu = cmp_norm(rho).mean;
        const double log_z = cmp_norm(rho).log_z;
        const double k_star = nu_ == 0.0 ? rho / (1.0 - rho) : std::pow(rho, 1.0 / nu_);
        double tail_k; // sum_{k>K} k w_k
        if (Kd < k_star) {
            KahanSum head;
            for (std::uint64_t k = 1; k <= K; ++k)
                head.add(static_cast<double>(k) * std::exp(cmp_log_term(k, rho) - log_z));
            tail_k = std::max(0.0, mu - head.value()) * (1.0 + 1e-12);
        } else {
            KahanSum tail;
            for (std::uint64_t k = K + 1;; ++k) {
                if (k - K > term_cap)
                    throw numeric_error("cmp: derivative tail sum did not converge");
                const double kd1 = static_cast<double>(k);
                const double t = kd1 * std::exp(cmp_log_term(k, rho) - log_z);
                tail.add(t);
                // step ratios are decreasing; the next one majorizes the rest
                const double r = ((kd1 + 2.0) / (kd1 + 1.0)) * rho / std::pow(kd1 + 2.0, nu_);
                if (t == 0.0 || (r < 1.0 && t * r / (1.0 - r) <= 1e-18 * tail.value())) break;
            }
            tail_k = tail.value();
        }
        return (tail_k + mu * tail_mass(K, rho)) / rho;
    }
    }
    return 0.0;
}

double DampingKernel::mean_steps(double rho) const {
    if (!in_domain(rho))
        throw std::domain_error(name() + ": " + param_name() + " out of domain");
    switch (family_) {
    case KernelFamily::geometric:
        return rho / (1.0 - rho);
    case KernelFamily::poisson:
        return rho;
    case KernelFamily::logarithmic:
        return -rho / ((1.0 - rho) * std::log1p(-rho));
    case KernelFamily::cmp:
        return cmp_norm(rho).mean;
    }
    return 0.0;
}

double correspondence_solve(const DampingKernel& kernel, double target_mean) {
    if (!std::isfinite(target_mean) || target_mean <= 0.0)
        throw std::invalid_argument("correspondence: target mean must be finite and > 0");
    const double tol = 1e-10 * (1.0 + target_mean);

    switch (kernel.family()) {
    case KernelFamily::poisson:
        return target_mean;
    case KernelFamily::geometric:
        return target_mean / (1.0 + target_mean);
    case KernelFamily::logarithmic:
        // mean = c(g) g/(1-g) decreases to 1 as g -> 0.
        if (target_mean <= 1.0)
            throw std::domain_error("correspondence: logarithmic mean exceeds 1 on its domain");
        break;
    case KernelFamily::cmp:
        break;
    }

    auto [dlo, dhi] = kernel.param_domain();
    const bool bounded = std::isfinite(dhi);
    double lo, hi;
    if (bounded) {
        lo = hi = 0.5 * (dlo + dhi);
        while (kernel.mean_steps(lo) >= target_mean) {
            lo *= 0.5;
            if (lo < 1e-300)
                throw std::domain_error("correspondence: target mean below attainable range");
        }
        while (kernel.mean_steps(hi) <= target_mean) {
            hi = dhi - 0.5 * (dhi - hi);
            if (dhi - hi < 1e-15)
                throw numeric_error("correspondence: target mean out of numeric reach");
        }
    } else {
        lo = hi = 1.0;
        while (kernel.mean_steps(lo) >= target_mean) {
            lo *= 0.5;
            if (lo < 1e-300)
                throw std::domain_error("correspondence: target mean below attainable range");
        }
        while (kernel.mean_steps(hi) <= target_mean) {
            hi *= 2.0;
            if (hi > 1e300)
                throw numeric_error("correspondence: target mean out of numeric reach");
        }
    }

    double mid = 0.5 * (lo + hi);
    for (int iter = 0; iter < 400; ++iter) {
        mid = 0.5 * (lo + hi);
        const double m = kernel.mean_steps(mid);
        if (std::abs(m - target_mean) <= tol) return mid;
        (m < target_mean ? lo : hi) = mid;
        if (hi - lo <= std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(mid)))
            break;
    }
    if (std::abs(kernel.mean_steps(mid) - target_mean) <= tol) return mid;
    throw numeric_error("correspondence: bisection stalled before tolerance");
}

namespace {

std::string lower_trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    std::string out(s.substr(a, b - a));
    for (char& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return out;
}

double parse_number(const std::string& tok) {
    double out = 0.0;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    auto res = std::from_chars(first, last, out);
    if (res.ec != std::errc() || res.ptr != last)
        throw std::invalid_argument("kernel spec: bad number `" + tok + "`");
    return out;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

// Scalar or inclusive start:stop:step range.
void expand_values(const std::string& piece, std::vector<double>& out) {
    const auto parts = split_on(piece, ':');
    if (parts.size() == 1) {
        out.push_back(parse_number(lower_trim(parts[0])));
        return;
    }
    if (parts.size() != 3)
        throw std::invalid_argument("kernel spec: range must be start:stop:step, got `" + piece + "`");
    const double start = parse_number(lower_trim(parts[0]));
    const double stop = parse_number(lower_trim(parts[1]));
    const double step = parse_number(lower_trim(parts[2]));
    if (!std::isfinite(start) || !std::isfinite(stop) || !(step > 0.0))
        throw std::invalid_argument("kernel spec: bad range `" + piece + "`");
    if (stop < start)
        throw std::invalid_argument("kernel spec: empty range `" + piece + "`");
    const double count = std::floor((stop - start) / step + 1e-9) + 1.0;
    if (count > 1e6)
        throw std::invalid_argument("kernel spec: range expands to too many values");
    for (double i = 0.0; i < count; i += 1.0) out.push_back(start + i * step);
}

} // namespace

KernelSpec parse_kernel_spec(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos)
        throw std::invalid_argument("kernel spec: expected family:param=values");
    const std::string fam = lower_trim(text.substr(0, colon));
    const std::string rest = text.substr(colon + 1);

    KernelFamily family;
    if (fam == "geometric") family = KernelFamily::geometric;
    else if (fam == "poisson") family = KernelFamily::poisson;
    else if (fam == "logarithmic" || fam == "log") family = KernelFamily::logarithmic;
    else if (fam == "cmp") family = KernelFamily::cmp;
    else throw std::invalid_argument("kernel spec: unknown family `" + fam + "`");

    // Comma-separated segments; `key=` starts a new key, bare segments extend
    // the current key's value list.
    std::vector<std::pair<std::string, std::vector<double>>> keys;
    for (const std::string& seg : split_on(rest, ',')) {
        const auto eq = seg.find('=');
        if (eq != std::string::npos) {
            const std::string key = lower_trim(seg.substr(0, eq));
            if (key.empty())
                throw std::invalid_argument("kernel spec: empty key in `" + seg + "`");
            auto it = std::find_if(keys.begin(), keys.end(),
                                   [&](const auto& kv) { return kv.first == key; });
            if (it == keys.end()) {
                keys.emplace_back(key, std::vector<double>{});
                it = std::prev(keys.end());
            }
            expand_values(lower_trim(seg.substr(eq + 1)), it->second);
        } else {
            if (keys.empty())
                throw std::invalid_argument("kernel spec: value before any key in `" + text + "`");
            expand_values(lower_trim(seg), keys.back().second);
        }
    }
    if (keys.empty()) throw std::invalid_argument("kernel spec: no parameters in `" + text + "`");

    KernelSpec spec{DampingKernel::geometric(), {}};
    if (family == KernelFamily::cmp) {
        double nu = std::numeric_limits<double>::quiet_NaN();
        for (const auto& [key, vals] : keys) {
            if (key == "nu") {
                if (vals.size() != 1)
                    throw std::invalid_argument("kernel spec: nu takes a single value");
                nu = vals[0];
            } else if (key == "rho") {
                spec.rhos.insert(spec.rhos.end(), vals.begin(), vals.end());
            } else {
                throw std::invalid_argument("kernel spec: cmp takes rho=... and nu=..., got `" + key + "`");
            }
        }
        if (std::isnan(nu))
            throw std::invalid_argument("kernel spec: cmp requires nu=...");
        spec.kernel = DampingKernel::cmp(nu);
    } else {
        DampingKernel k = family == KernelFamily::geometric ? DampingKernel::geometric()
                          : family == KernelFamily::poisson ? DampingKernel::poisson()
                                                            : DampingKernel::logarithmic();
        for (const auto& [key, vals] : keys) {
            if (key != k.param_name())
                throw std::invalid_argument("kernel spec: " + k.name() + " takes " +
                                            k.param_name() + "=..., got `" + key + "`");
            spec.rhos.insert(spec.rhos.end(), vals.begin(), vals.end());
        }
        spec.kernel = k;
    }

    if (spec.rhos.empty())
        throw std::invalid_argument("kernel spec: no parameter values in `" + text + "`");
    for (double r : spec.rhos)
        if (!spec.kernel.in_domain(r)) {
            auto [lo, hi] = spec.kernel.param_domain();
            throw std::invalid_argument("kernel spec: " + spec.kernel.param_name() + "=" +
                                        std::to_string(r) + " outside (" + std::to_string(lo) +
                                        ", " + std::to_string(hi) + ")");
        }
    return spec;
}

} // namespace damprank
