#include "damprank/personalization.hpp"

#include "damprank/errors.hpp"
#include "damprank/prng.hpp"

#include <cmath>
#include <stdexcept>

namespace damprank {

double PersonalizationVector::l1_norm() const {
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s;
}

PersonalizationVector gen_personalization(std::size_t n, std::uint64_t seed,
                                          PersonalizationMode mode) {
    if (n == 0) throw std::invalid_argument("gen_personalization: n must be positive");

    PersonalizationVector p;
    p.mode = mode;
    p.seed = seed;
    p.generated = true;
    p.v.resize(n);

    const double sum_floor = 1e-6 * std::sqrt(static_cast<double>(n));
    for (std::uint64_t attempt = 0;; ++attempt) {
        if (attempt == 64)
            throw numeric_error("gen_personalization: no usable draw in 64 attempts");
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double z = standard_normal(seed, attempt * n + j);
            if (mode == PersonalizationMode::nonnegative) z = std::abs(z);
            p.v[j] = z;
            sum += z;
        }
        if (std::abs(sum) < sum_floor) continue; // degenerate block, take next window
        for (double& x : p.v) x /= sum;
        return p;
    }
}

PersonalizationVector personalization_from_values(std::vector<double> values,
                                                  PersonalizationMode mode) {
    if (values.empty())
        throw std::invalid_argument("personalization_from_values: empty vector");

    double sum = 0.0;
    for (double x : values) {
        if (!std::isfinite(x))
            throw std::invalid_argument("personalization_from_values: non-finite entry");
        if (mode == PersonalizationMode::nonnegative && x < 0.0)
            throw std::invalid_argument(
                "personalization_from_values: negative entry in nonnegative mode");
        sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw std::invalid_argument("personalization_from_values: entries must sum to 1");

    PersonalizationVector p;
    p.v = std::move(values);
    p.mode = mode;
    return p;
}

} // namespace damprank
