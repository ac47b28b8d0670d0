#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace forr {

namespace detail {
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
inline uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) { h ^= uint8_t(c); h *= 0x100000001b3ULL; }
    return h;
}
}  // namespace detail

// Deterministic random stream. Substreams are derived by stable hashing of
// (seed, label, counters) so results do not depend on worker scheduling.
class RngStream {
public:
    explicit RngStream(uint64_t seed) : eng_(detail::splitmix64(seed)) {}

    static RngStream derive(uint64_t master, std::string_view label, uint64_t a = 0, uint64_t b = 0) {
        uint64_t h = detail::splitmix64(master ^ detail::fnv1a(label));
        h = detail::splitmix64(h ^ a);
        h = detail::splitmix64(h ^ b);
        return RngStream(h);
    }

    uint64_t u64() { return eng_(); }

    bool bit() { return u64() >> 63; }

    // uniform in [0,1)
    double real() { return double(u64() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, n)
    uint64_t index(uint64_t n) {
        uint64_t mask = ~uint64_t(0);
        if (n <= 1) return 0;
        int bits = 64 - __builtin_clzll(n - 1);
        mask = (bits >= 64) ? mask : ((uint64_t(1) << bits) - 1);
        uint64_t r;
        do { r = u64() & mask; } while (r >= n);
        return r;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * real(); }

    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
};

}  // namespace forr
