#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace porrl {

/**
 * @brief Seeded random stream with platform-independent derived draws.
 *
 * The engine is std::mt19937_64, whose output sequence is fixed by the
 * standard. Uniform, Bernoulli, Gaussian and categorical draws are derived
 * here rather than through <random> distributions, whose algorithms are
 * implementation-defined, so that a seed reproduces the same run everywhere.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Rejection sampling keeps the draw exactly uniform.
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal draw via the Box-Muller transform (no cached pair).
    double normal();

    /// Index drawn from a probability vector by inverse CDF.
    int categorical(const std::vector<double>& probs);

    std::uint64_t next_u64() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

}  // namespace porrl
