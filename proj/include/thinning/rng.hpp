#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace thinning {

// splitmix64, used for seed expansion and stream derivation. The constants are
// the standard ones from Steele, Lea and Flood's reference implementation.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t mix64(uint64_t x) {
    uint64_t s = x;
    return splitmix64(s);
}

// xoshiro256++ random stream. Self-contained so that identical seeds give
// identical streams on every platform and standard library.
//
// Streams are derived, never shared: derive_stream(master, trial, role) hashes
// its arguments into a fresh seed. The derivation is part of the output
// contract (same master seed + trial index => same stream) and must stay
// stable within a major release.
class RandomStream {
public:
    explicit RandomStream(uint64_t seed = 0x1d872b41b577ecdULL) { reseed(seed); }

    void reseed(uint64_t seed) {
        uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on [0,1) with 53 random bits.
    double uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // Unbiased uniform integer in [0, bound). bound must be positive.
    uint64_t below(uint64_t bound) {
        // Lemire's multiply-shift with rejection for exact uniformity.
        uint64_t x = next_u64();
        __uint128_t m = __uint128_t(x) * bound;
        uint64_t lo = uint64_t(m);
        if (lo < bound) {
            const uint64_t threshold = (0 - bound) % bound;
            while (lo < threshold) {
                x = next_u64();
                m = __uint128_t(x) * bound;
                lo = uint64_t(m);
            }
        }
        return uint64_t(m >> 64);
    }

    int64_t index(int64_t n) { return int64_t(below(uint64_t(n))); }

    // Exponential with the given rate. Uses -log1p(-u) so u == 0 is safe.
    double exponential(double rate) { return -std::log1p(-uniform01()) / rate; }

    // Exact Poisson sampling. Knuth's product method for small means, sum of
    // independent chunks for larger ones (exact, just slower; this is a
    // test/oracle path, not the allocation hot loop).
    int64_t poisson(double mean) {
        int64_t total = 0;
        while (mean > 16.0) {
            total += poisson_small(16.0);
            mean -= 16.0;
        }
        return total + poisson_small(mean);
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    int64_t poisson_small(double mean) {
        if (mean <= 0) return 0;
        const double limit = std::exp(-mean);
        double prod = uniform01();
        int64_t count = 0;
        while (prod > limit) {
            ++count;
            prod *= uniform01();
        }
        return count;
    }

    uint64_t s_[4];
};

// Derives the seed of an independent stream from (master seed, trial index,
// role tag). Role 0 is reserved for the primary-draw stream so paired
// experiments can share primaries across strategies.
inline uint64_t derive_stream_seed(uint64_t master, uint64_t trial, uint64_t role) {
    uint64_t h = master;
    h = mix64(h ^ 0x243f6a8885a308d3ULL);
    h = mix64(h ^ trial);
    h = mix64(h ^ (role * 0x9e3779b97f4a7c15ULL + 0x13198a2e03707344ULL));
    return h;
}

inline RandomStream derive_stream(uint64_t master, uint64_t trial, uint64_t role) {
    return RandomStream(derive_stream_seed(master, trial, role));
}

// Compensated (Kahan) accumulator for continuous time in the point-process
// samplers: many small exponential waits are added to a growing total.
class KahanSum {
public:
    void add(double x) {
        const double y = x - comp_;
        const double t = sum_ + y;
        comp_ = (t - sum_) - y;
        sum_ = t;
    }
    double value() const { return sum_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

}  // namespace thinning
