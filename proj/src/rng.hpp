#pragma once

#include <cmath>
#include <cstdint>

namespace sdb {

// splitmix64: tiny, fast, and identical output on every platform.  Used both as
// the sample-stream generator and to derive independent per-sample seeds so that
// worker partitioning never changes the numbers.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() { return splitmix64(state_); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Signed angle with the invariant-measure density cos(phi)/2 on [-pi/2, pi/2].
    double cosine_phi() { return std::asin(uniform(-1.0, 1.0)); }

    int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<uint64_t>(n)); }

  private:
    uint64_t state_;
};

// Derive a decorrelated child seed for sample index i (stable across worker counts).
inline uint64_t child_seed(uint64_t seed, uint64_t index) {
    uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL * (index + 1));
    splitmix64(s);
    return splitmix64(s);
}

}  // namespace sdb
