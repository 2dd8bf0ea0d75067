#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace kcgm {

// Stream tags keep draws for different purposes independent under one seed.
enum class Stream : std::uint64_t {
    gaussian_sketch = 1,
    rademacher_sketch = 2,
    ros_sketch = 3,
    nystrom_plain = 4,
    nystrom_als = 5,
    als_perturbation = 6,
    data = 7,
    trial = 8,
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Counter-based generator: output k of the stream keyed by (seed, tag, index)
/// is a pure function of those four numbers, so any draw can be reproduced or
/// computed out of order. Satisfies UniformRandomBitGenerator.
class CounterRng {
public:
    using result_type = std::uint64_t;

    CounterRng(std::uint64_t seed, Stream tag, std::uint64_t index = 0)
        : key_(derive_key(seed, static_cast<std::uint64_t>(tag), index)) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return splitmix64(key_ ^ splitmix64(counter_++)); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1]; safe as a logarithm argument.
    double uniform_open_zero() { return 1.0 - uniform(); }

    // Standard normal via Box-Muller; both variates are used.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double radius = std::sqrt(-2.0 * std::log(uniform_open_zero()));
        const double angle = 2.0 * std::numbers::pi * uniform();
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    bool coin() { return ((*this)() >> 63) != 0; }

    // Uniform integer in [0, bound) without modulo bias (Lemire).
    std::uint64_t below(std::uint64_t bound) {
        std::uint64_t x = (*this)();
        __uint128_t m = static_cast<__uint128_t>(x) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = -bound % bound;
            while (low < threshold) {
                x = (*this)();
                m = static_cast<__uint128_t>(x) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    static constexpr std::uint64_t derive_key(std::uint64_t seed, std::uint64_t tag,
                                              std::uint64_t index) {
        return splitmix64(splitmix64(seed) ^ splitmix64(tag * 0xd1b54a32d192ed03ULL) ^
                          splitmix64(index + 0x632be59bd9b4e019ULL));
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace kcgm
