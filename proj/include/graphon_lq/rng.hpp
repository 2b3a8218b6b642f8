// ---------------------------------------------------------------------------
// rng.hpp
//
// Counter-based random numbers: Philox4x32-10 (Salmon, Moraes, Dror, Shaw,
// "Parallel random numbers: as easy as 1, 2, 3", SC'11).
//
// Why counter-based: every Gaussian increment in the simulators is addressed
// by WHAT it is, not by WHEN it is drawn —
//
//     key     = (seed, stream role)
//     counter = (player k, path j, step i, slot)
//
// so the same Brownian increment dB^{x_k}_i(path j) can drive both the
// continuum-policy particle and the N-player particle bit-exactly (the
// coupling the propagation-of-chaos estimator needs), results are independent
// of loop order and thread schedule, and reruns with the same seed are
// byte-identical. C++ gains std::philox_engine only in a later standard, so
// the ~40-line bijection is implemented here and pinned by the published
// known-answer vectors in the test suite.
// ---------------------------------------------------------------------------
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace glq {

struct PhiloxBlock {
    std::array<std::uint32_t, 4> x;
};

// One Philox4x32 round: multiply-hi/lo mix with round keys.
namespace detail {
inline void philox_round(std::array<std::uint32_t, 4>& ctr, std::array<std::uint32_t, 2>& key) {
    constexpr std::uint64_t M0 = 0xD2511F53u;
    constexpr std::uint64_t M1 = 0xCD9E8D57u;
    const std::uint64_t p0 = M0 * ctr[0];
    const std::uint64_t p1 = M1 * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += 0x9E3779B9u;  // Weyl constants (golden ratio, sqrt 3)
    key[1] += 0xBB67AE85u;
}
}  // namespace detail

// The 10-round Philox4x32 bijection: 128-bit counter + 64-bit key -> 128 bits.
inline PhiloxBlock philox4x32(std::array<std::uint32_t, 4> counter,
                              std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) detail::philox_round(counter, key);
    return {counter};
}

// Addressed uniform/Gaussian draws on top of the bijection. A "role"
// separates independent stream families (state noise, initial conditions,
// index sampling, ...) under one user seed.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint32_t role) : seed_(seed), role_(role) {}

    // Two iid uniforms in (0,1), 53-bit mantissas, from one 128-bit block.
    [[nodiscard]] std::array<double, 2> uniform2(std::uint32_t player, std::uint32_t path,
                                                 std::uint32_t step) const {
        const PhiloxBlock b = block(player, path, step);
        return {to_unit_double(b.x[0], b.x[1]), to_unit_double(b.x[2], b.x[3])};
    }

    // Two iid standard normals (Box-Muller on the block above).
    [[nodiscard]] std::array<double, 2> normal2(std::uint32_t player, std::uint32_t path,
                                                std::uint32_t step) const {
        const auto u = uniform2(player, path, step);
        const double radius = std::sqrt(-2.0 * std::log(u[0]));
        const double angle = 2.0 * std::numbers::pi * u[1];
        return {radius * std::cos(angle), radius * std::sin(angle)};
    }

    [[nodiscard]] double normal(std::uint32_t player, std::uint32_t path,
                                std::uint32_t step) const {
        return normal2(player, path, step)[0];
    }

    [[nodiscard]] double uniform(std::uint32_t player, std::uint32_t path,
                                 std::uint32_t step) const {
        return uniform2(player, path, step)[0];
    }

private:
    [[nodiscard]] PhiloxBlock block(std::uint32_t player, std::uint32_t path,
                                    std::uint32_t step) const {
        const std::array<std::uint32_t, 4> counter = {player, path, step, role_};
        const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed_),
                                                  static_cast<std::uint32_t>(seed_ >> 32)};
        return philox4x32(counter, key);
    }

    // 53 random bits -> (0,1); offset by half an ulp so 0 is never returned
    // (Box-Muller takes a log).
    static double to_unit_double(std::uint32_t hi, std::uint32_t lo) {
        const std::uint64_t bits =
            (static_cast<std::uint64_t>(hi) << 21) ^ (static_cast<std::uint64_t>(lo) >> 11);
        return (static_cast<double>(bits & ((1ull << 53) - 1)) + 0.5) * 0x1p-53;
    }

    std::uint64_t seed_;
    std::uint32_t role_;
};

// Stream roles used across the suite (stable numbering: part of the
// reproducibility contract, do not reorder).
namespace rng_role {
inline constexpr std::uint32_t state_noise = 0;     // Brownian increments
inline constexpr std::uint32_t initial_state = 1;   // xi^x draws
inline constexpr std::uint32_t index_sampling = 2;  // x_k ~ Uniform(0,1)
}  // namespace rng_role

}  // namespace glq
