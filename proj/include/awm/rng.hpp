#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace awm {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Combines seed components (run seed, scenario id, rollout id, step, ...)
// into one stream seed. Order-sensitive.
inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x243F6A8885A308D3ull;
  for (std::uint64_t p : parts) {
    h ^= p;
    (void)splitmix64(h);
    h ^= h >> 33;
  }
  return h;
}

// Deterministic across platforms (std:: distributions are not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) { (void)splitmix64(state_); }

  std::uint64_t next_u64() { return splitmix64(state_); }

  // [0, 1)
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // [0, n)
  int uniform_int(int n) {
    int v = static_cast<int>(uniform01() * n);
    return v >= n ? n - 1 : v;
  }

  // Box-Muller; one draw per call, the spare is discarded so the stream
  // layout stays independent of call sites.
  double normal() {
    double u1 = 1.0 - uniform01();  // (0, 1]
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  std::uint64_t state_;
};

}  // namespace awm
