#pragma once

#include <array>
#include <cstdint>

namespace tslpm {

/// SplitMix64 finaliser; maps any 64-bit value to a well-mixed one.
std::uint64_t splitmix64(std::uint64_t& state);

/// Seed for an independent stream `stream` derived from a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

/// xoshiro256** generator (Blackman & Vigna), state filled from SplitMix64.
///
/// The variates below are portable: every implementation following the same
/// recipe produces identical streams.
///  - uniform():  (next() >> 11) * 2^-53, in [0, 1)
///  - normal():   Box-Muller, cos branch, two uniforms per draw, u1 mapped to (0, 1]
///  - poisson():  sequential inversion for lambda < 10, Hormann's PTRS
///                transformed rejection for lambda >= 10
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed);

    std::uint64_t next();
    std::uint64_t operator()() { return next(); }
    static constexpr std::uint64_t min() { return 0; }
    static constexpr std::uint64_t max() { return ~std::uint64_t{0}; }

    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();
    double normal(double mean, double sd) { return mean + sd * normal(); }
    std::int64_t poisson(double lambda);
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

private:
    std::array<std::uint64_t, 4> s_{};
};

}  // namespace tslpm
