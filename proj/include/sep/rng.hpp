#pragma once

#include <cmath>
#include <cstdint>

namespace sep {

// Addresses one replica's random stream. The pair (seed, stream) fully
// determines every draw, so ensembles never need stream coordination.
struct SeedSpec {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
};

namespace detail {
// SplitMix64 finalizer (Stafford mix13).
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
}  // namespace detail

// Counter-based 64-bit generator: output_k = mix(key + k*gamma). Distinct
// (seed, stream) pairs give decorrelated keys, so replica streams are
// independent by construction and any draw is reproducible from SeedSpec.
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit CounterRng(SeedSpec s)
        : state_(detail::mix64(detail::mix64(s.seed) ^
                               detail::mix64(s.stream ^ 0x632be59bd9b4e019ULL))) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t x = state_;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    // Uniform on the open interval (0,1); never returns 0 or 1, so
    // -log(u) is always finite and exponential holding times are positive.
    double next_double() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    bool next_bernoulli(double p) { return next_double() < p; }

    double next_exponential(double rate) { return -std::log(next_double()) / rate; }

    // Unbiased uniform draw in [0, bound) (Lemire's multiply-shift with rejection).
    std::uint64_t next_below(std::uint64_t bound) {
        while (true) {
            std::uint64_t x = next_u64();
            __uint128_t m = static_cast<__uint128_t>(x) * bound;
            std::uint64_t lo = static_cast<std::uint64_t>(m);
            if (lo < bound) {
                std::uint64_t threshold = (0 - bound) % bound;
                if (lo < threshold) continue;
            }
            return static_cast<std::uint64_t>(m >> 64);
        }
    }

    // UniformRandomBitGenerator interface (std::shuffle etc.).
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~0ULL; }
    result_type operator()() { return next_u64(); }

private:
    std::uint64_t state_;
};

}  // namespace sep
