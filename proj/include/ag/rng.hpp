#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace ag {

/// Deterministic portable RNG: xoshiro256** 1.0, state seeded with splitmix64.
/// Pure 64-bit integer arithmetic, so the u64 stream for a given seed is
/// bit-identical on every platform; uniform doubles are derived from the top
/// 53 bits and are equally portable. Normal draws (Marsaglia polar) go through
/// libm log/sqrt and are reproducible on a given platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform in [0, 1).
    double next_double();
    double uniform(double lo, double hi);

    // Uniform integer in [0, bound), unbiased. bound must be positive.
    std::uint64_t below(std::uint64_t bound);

    double normal(double mean, double stddev);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::array<std::uint64_t, 4> state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace ag
