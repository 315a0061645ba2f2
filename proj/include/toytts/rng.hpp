#pragma once

#include <array>
#include <cstdint>

namespace toytts {

/// xoshiro256** seeded through splitmix64. Normal deviates use Box-Muller
/// without a cached spare, so every call consumes exactly two uniforms and
/// the stream depends only on the seed and the call sequence.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64();
    // Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi);
    // Uniform integer on the closed range [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
    double normal();

    // Independent generator for a named sub-stream of this seed.
    Rng fork(std::uint64_t stream) const;

private:
    std::uint64_t seed_;
    std::array<std::uint64_t, 4> s_{};
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace toytts
