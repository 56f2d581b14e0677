#pragma once

// Counter-keyed random streams: every consumer derives an independent
// generator from (master seed, stream index), so results never depend on
// thread scheduling. No global RNG state anywhere.

#include <cmath>
#include <cstdint>
#include <limits>

namespace sojourn {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// xoshiro256++ (Blackman/Vigna), state seeded via splitmix64.
class Xoshiro256pp {
 public:
  explicit Xoshiro256pp(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) {
      sm += 0x9e3779b97f4a7c15ULL;
      word = splitmix64(sm);
    }
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
  }

  // Stream keyed by (master, stream): reproducible independently of order.
  static Xoshiro256pp for_stream(std::uint64_t master, std::uint64_t stream) {
    return Xoshiro256pp(splitmix64(master ^ (0x9e3779b97f4a7c15ULL * (stream + 1))));
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0,1) with 53-bit resolution.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0,1], safe as a log() argument.
  double next_unit_pos() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

 private:
  static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }
  std::uint64_t state_[4];
};

// Marsaglia-Tsang ziggurat for standard normals, 128 layers, 52-bit
// magnitudes drawn from a single u64 per sample on the fast path.
class ZigguratNormal {
 public:
  ZigguratNormal() {
    constexpr double r = kTailCut;
    constexpr double v = 9.91256303526217e-3;
    double dn = r, tn = r;
    const double q = v / std::exp(-0.5 * r * r);
    kn_[0] = static_cast<std::uint64_t>((dn / q) * kM);
    kn_[1] = 0;
    wn_[0] = q / kM;
    wn_[127] = dn / kM;
    fn_[0] = 1.0;
    fn_[127] = std::exp(-0.5 * dn * dn);
    for (int i = 126; i >= 1; --i) {
      dn = std::sqrt(-2.0 * std::log(v / dn + std::exp(-0.5 * dn * dn)));
      kn_[i + 1] = static_cast<std::uint64_t>((dn / tn) * kM);
      tn = dn;
      fn_[i] = std::exp(-0.5 * dn * dn);
      wn_[i] = dn / kM;
    }
  }

  template <class Rng>
  double operator()(Rng& rng) const {
    for (;;) {
      const std::uint64_t u = rng.next_u64();
      const std::uint64_t j = u >> 12;  // 52-bit magnitude
      const int i = static_cast<int>(u & 127);
      const bool neg = (u & 0x800) != 0;
      if (j < kn_[i]) {
        const double x = static_cast<double>(j) * wn_[i];
        return neg ? -x : x;
      }
      if (i == 0) {  // tail beyond r
        double x, y;
        do {
          x = -std::log(rng.next_unit_pos()) * (1.0 / kTailCut);
          y = -std::log(rng.next_unit_pos());
        } while (y + y < x * x);
        return neg ? -(kTailCut + x) : (kTailCut + x);
      }
      const double x = static_cast<double>(j) * wn_[i];
      if (fn_[i] + rng.next_unit() * (fn_[i - 1] - fn_[i]) < std::exp(-0.5 * x * x)) {
        return neg ? -x : x;
      }
    }
  }

 private:
  static constexpr double kTailCut = 3.442619855899;
  static constexpr double kM = 4503599627370496.0;  // 2^52
  std::uint64_t kn_[128];
  double wn_[128];
  double fn_[128];
};

}  // namespace sojourn
