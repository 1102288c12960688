#pragma once

#include <cmath>
#include <cstdint>

#include "attnq/matrix.hpp"

namespace attnq {

// splitmix64: counter-based 64-bit generator. The state advances by a fixed
// odd constant and each output is a finalizing hash of the state, so the
// stream is a pure function of (seed, counter). Used for every sampled value
// so generated files are identical across runs and platforms.
class SplitMix64 {
  public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    static uint64_t mix(uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    uint64_t next() {
        state_ += 0x9e3779b97f4a7c15ull;
        return mix(state_);
    }

    // Derives an independent child stream without advancing this one.
    SplitMix64 split(uint64_t stream) const {
        return SplitMix64(mix(state_ ^ mix(stream + 0x632be59bd9b4e019ull)));
    }

    // Uniform in [0, 1), 53 significant bits.
    double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller; consumes exactly two draws per call.
    double next_gaussian() {
        const double u1 = (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53; // (0, 1]
        const double u2 = static_cast<double>(next() >> 11) * 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

  private:
    uint64_t state_;
};

inline DenseMatrix random_gaussian(SplitMix64& rng, int rows, int cols, double stddev = 1.0) {
    DenseMatrix m(rows, cols);
    for (double& v : m.data()) {
        v = stddev * rng.next_gaussian();
    }
    return m;
}

} // namespace attnq
