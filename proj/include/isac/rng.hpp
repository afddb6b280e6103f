#pragma once

#include <cmath>
#include <complex>
#include <cstdint>

#include "isac/types.hpp"

namespace isac {

// Counter-based generator (Philox-4x32-10). A draw is addressed by
// (seed, stream, sample_index, element), so any sample of any stream can be
// regenerated in isolation and in any order; parallel consumers never share
// mutable state.
namespace philox {

struct Block {
  uint32_t v[4];
};

inline void mulhilo(uint32_t a, uint32_t b, uint32_t& hi, uint32_t& lo) {
  uint64_t p = static_cast<uint64_t>(a) * b;
  hi = static_cast<uint32_t>(p >> 32);
  lo = static_cast<uint32_t>(p);
}

inline Block block(uint64_t key, uint32_t c0, uint32_t c1, uint32_t c2, uint32_t c3) {
  uint32_t k0 = static_cast<uint32_t>(key);
  uint32_t k1 = static_cast<uint32_t>(key >> 32);
  uint32_t x0 = c0, x1 = c1, x2 = c2, x3 = c3;
  for (int round = 0; round < 10; ++round) {
    uint32_t hi0, lo0, hi1, lo1;
    mulhilo(0xD2511F53u, x0, hi0, lo0);
    mulhilo(0xCD9E8D57u, x2, hi1, lo1);
    uint32_t y0 = hi1 ^ x1 ^ k0;
    uint32_t y1 = lo1;
    uint32_t y2 = hi0 ^ x3 ^ k1;
    uint32_t y3 = lo0;
    x0 = y0; x1 = y1; x2 = y2; x3 = y3;
    k0 += 0x9E3779B9u;
    k1 += 0xBB67AE85u;
  }
  return Block{{x0, x1, x2, x3}};
}

}  // namespace philox

/// Stream identifiers keep draws for different purposes statistically
/// independent under one scenario seed.
enum class RngStream : uint32_t {
  comm_error = 1,    // + user index << 8
  warden_error = 2,  // + target index << 8
  radar_error = 3,
  comm_channel = 4,  // + user index << 8
  warden_obs_h0 = 5,
  warden_obs_h1 = 6,
  generic = 7,
};

inline uint32_t stream_id(RngStream s, uint32_t index = 0) {
  return static_cast<uint32_t>(s) | (index << 8);
}

/// Stateless view of one stream of one seed.
class Rng {
 public:
  Rng(uint64_t seed, uint32_t stream) : seed_(seed), stream_(stream) {}

  /// 64 uniform bits for (sample, element).
  uint64_t bits(uint64_t sample, uint32_t element) const {
    auto b = philox::block(seed_, static_cast<uint32_t>(sample),
                           static_cast<uint32_t>(sample >> 32), element, stream_);
    return (static_cast<uint64_t>(b.v[0]) << 32) | b.v[1];
  }

  /// Uniform in [0,1) with 53-bit resolution.
  double uniform(uint64_t sample, uint32_t element) const {
    return static_cast<double>(bits(sample, element) >> 11) * 0x1.0p-53;
  }

  /// Standard circularly-symmetric complex normal, E|z|^2 = 1.
  /// One counter block yields one sample via Box-Muller.
  cxd cnormal(uint64_t sample, uint32_t element) const {
    auto b = philox::block(seed_, static_cast<uint32_t>(sample),
                           static_cast<uint32_t>(sample >> 32), element, stream_);
    uint64_t w0 = (static_cast<uint64_t>(b.v[0]) << 32) | b.v[1];
    uint64_t w1 = (static_cast<uint64_t>(b.v[2]) << 32) | b.v[3];
    double u1 = static_cast<double>(w0 >> 11) * 0x1.0p-53;
    double u2 = static_cast<double>(w1 >> 11) * 0x1.0p-53;
    // 1-u1 in (0,1] keeps the log finite.
    double r = std::sqrt(-std::log(1.0 - u1));  // radius for unit complex variance
    return cxd(r * std::cos(2.0 * pi * u2), r * std::sin(2.0 * pi * u2));
  }

  /// Vector of iid CN(0,1) entries for one sample index.
  VecC cnormal_vector(uint64_t sample, int n) const {
    VecC v(n);
    for (int i = 0; i < n; ++i) v(i) = cnormal(sample, static_cast<uint32_t>(i));
    return v;
  }

 private:
  uint64_t seed_;
  uint32_t stream_;
};

}  // namespace isac
