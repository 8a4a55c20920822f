#pragma once

#include <cstdint>
#include <vector>

namespace damprank {

enum class PersonalizationMode { nonnegative, signed_sum };

/// Restart / customization distribution v with sum(v) = 1.
/// In signed_sum mode entries may be negative (KL analysis is then disabled).
struct PersonalizationVector {
    std::vector<double> v;
    PersonalizationMode mode = PersonalizationMode::nonnegative;
    std::uint64_t seed = 0;
    bool generated = false; // true when produced by gen_personalization

    std::size_t size() const { return v.size(); }
    bool nonnegative() const { return mode == PersonalizationMode::nonnegative; }
    double l1_norm() const;
};

/// Draw n standard normals from the counter-based stream (see prng.hpp).
/// nonnegative: absolute values, then l1-normalized. signed_sum: divided by
/// the raw sum; when |sum| < 1e-6*sqrt(n) the whole block is redrawn from the
/// next counter window (attempt a uses counters [a*2n, (a+1)*2n)).
PersonalizationVector gen_personalization(std::size_t n, std::uint64_t seed,
                                          PersonalizationMode mode);

/// Wrap externally supplied values; validates sum(v) = 1 within 1e-12 and,
/// in nonnegative mode, that no entry is negative.
PersonalizationVector personalization_from_values(std::vector<double> values,
                                                  PersonalizationMode mode);

} // namespace damprank
