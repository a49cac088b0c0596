#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace qosc::rng {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// xoshiro256++ with state expanded from (seed, stream) via SplitMix64.
// Streams with distinct ids are statistically independent; a given
// (seed, stream) pair always yields the same sequence.
class Xoshiro256pp {
  public:
    Xoshiro256pp(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t sm = seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
        for (auto& w : s_) w = splitmix64(sm);
        if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // 53-bit mantissa uniform in [0, 1).
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::array<std::uint64_t, 4> s_;
};

// 256-layer ziggurat for the standard normal. Tables are built once at
// first use from the layer-area constant; construction asserts the
// recurrence closes at the mode.
class ZigguratNormal {
  public:
    static const ZigguratNormal& instance();

    double sample(Xoshiro256pp& g) const {
        for (;;) {
            const std::uint64_t bits = g.next();
            const int i = static_cast<int>(bits & 255u);
            const bool neg = (bits & 256u) != 0;
            const double u = static_cast<double>(bits >> 11) * 0x1.0p-53;
            const double x = u * w_[i];
            if (x < w_[i + 1]) return neg ? -x : x;
            if (i == 0) {
                double t = tail(g);
                return neg ? -t : t;
            }
            const double ylo = y_[i - 1];
            const double yy = ylo + (y_[i] - ylo) * g.uniform01();
            if (yy < std::exp(-0.5 * x * x)) return neg ? -x : x;
        }
    }

  private:
    ZigguratNormal();

    double tail(Xoshiro256pp& g) const {
        double xx, yy;
        do {
            xx = -std::log1p(-g.uniform01()) / r_;
            yy = -std::log1p(-g.uniform01());
        } while (yy + yy < xx * xx);
        return r_ + xx;
    }

    double r_;
    std::array<double, 257> w_;  // layer widths; w_[1] is the tail cut
    std::array<double, 256> y_;  // layer top ordinates of exp(-x^2/2)
};

inline double normal(Xoshiro256pp& g) { return ZigguratNormal::instance().sample(g); }

}  // namespace qosc::rng
