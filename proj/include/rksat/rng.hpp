#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace rksat {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_key(std::uint64_t h, std::uint64_t v) {
    std::uint64_t s = h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
    return splitmix64(s);
}

// xoshiro256** with explicit substream derivation. Distribution code is
// hand-written so streams are bit-identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    // Independent stream keyed by (seed, a, b, c); used for per-index substreams.
    static Rng stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
        std::uint64_t h = mix_key(mix_key(mix_key(mix_key(0x5eedULL, seed), a), b), c);
        return Rng(h);
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on [0,1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    // Uniform integer in [0, n).
    std::uint64_t index(std::uint64_t n) {
        __uint128_t m = static_cast<__uint128_t>(next()) * n;
        return static_cast<std::uint64_t>(m >> 64);
    }

    // Draw from a cumulative table whose last entry is the total mass.
    int categorical(const std::vector<double>& cdf) {
        double u = uniform() * cdf.back();
        int lo = 0, hi = static_cast<int>(cdf.size()) - 1;
        while (lo < hi) {
            int mid = (lo + hi) / 2;
            if (u < cdf[mid]) hi = mid; else lo = mid + 1;
        }
        return lo;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4];
};

inline std::vector<double> cumulative(const std::vector<double>& w) {
    std::vector<double> cdf(w.size());
    double acc = 0;
    for (std::size_t i = 0; i < w.size(); ++i) cdf[i] = (acc += w[i]);
    return cdf;
}

}  // namespace rksat
