#pragma once

#include <cstdint>

#include <boost/random/normal_distribution.hpp>

namespace ocs {

/// splitmix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based stream: draw k of path p under seed s is a pure function
/// of (s, p, k), so paths can be generated in any order or in parallel.
class PathRng {
public:
    PathRng(std::uint64_t seed, std::uint64_t path) noexcept
        : key_(mix64(seed ^ mix64(path * 0xd1342543de82ef95ULL + 0x632be59bd9b4e019ULL))) {}

    std::uint64_t next_u64() noexcept { return mix64(key_ + 0x9e3779b97f4a7c15ULL * counter_++); }

    /// Uniform on the open interval (0, 1).
    double uniform() noexcept {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal (Boost's ziggurat sampler).
    double normal() noexcept { return normal_(*this); }

    // UniformRandomBitGenerator interface.
    using result_type = std::uint64_t;
    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }
    result_type operator()() noexcept { return next_u64(); }

    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    boost::random::normal_distribution<double> normal_;
};

}  // namespace ocs
