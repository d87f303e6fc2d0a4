#pragma once

#include <array>
#include <cstdint>

namespace sauc {

// xoshiro256** 1.0 (Blackman & Vigna), seeded through splitmix64.
//
// Every sampler in this library draws from this generator and converts the
// raw 64-bit output with integer/IEEE arithmetic only, so a (seed, call
// sequence) pair produces the same stream on every platform.
class Xoshiro256 {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256(std::uint64_t seed) noexcept;

    std::uint64_t next() noexcept;
    std::uint64_t operator()() noexcept { return next(); }

    // Uniform double in [0, 1) with 53 bits of randomness.
    double uniform() noexcept;
    // Uniform double in (0, 1).
    double uniform_open() noexcept;

    // Independent stream derived from this generator's seed material.
    Xoshiro256 fork(std::uint64_t stream) const noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~std::uint64_t{0}; }

private:
    std::array<std::uint64_t, 4> s_{};
};

std::uint64_t splitmix64(std::uint64_t &state) noexcept;

} // namespace sauc
