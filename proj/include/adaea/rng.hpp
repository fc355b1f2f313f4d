// Deterministic counter-based random streams.
//
// Every stochastic component (model init, dataset synthesis, DI transform)
// owns its own stream derived from a master seed, so runs are reproducible
// and independent streams never share state.

#pragma once

#include <cstdint>
#include <cmath>

namespace adaea {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derive an independent child seed from a master seed and a stream index.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master ^ splitmix64(stream + 0x12345678ULL));
}

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(splitmix64(seed)) {}

  std::uint64_t next_u64() {
    state_ = splitmix64(state_);
    return state_;
  }

  // uniform in [0, 1)
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // uniform in [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // uniform integer in [0, n)
  std::uint64_t next_below(std::uint64_t n) {
    return n == 0 ? 0 : next_u64() % n;
  }

  // standard normal via Box-Muller (one value per call, no caching so the
  // stream position stays a pure function of the call count)
  double normal() {
    double u1 = next_double();
    double u2 = next_double();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

 private:
  std::uint64_t state_;
};

}  // namespace adaea
