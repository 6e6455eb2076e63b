#pragma once

#include <cmath>
#include <cstdint>

namespace relearn {

// Splittable counter-based generator (splitmix64 core). We avoid the
// standard-library distributions so that streams are bit-identical across
// compilers and so that child streams can be derived without sharing state.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Child stream independent of future draws from this one.
    Rng split(uint64_t stream) const {
        uint64_t z = state_ ^ (0x9e3779b97f4a7c15ULL * (stream + 0x632be59bd9b4e019ULL));
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return Rng(z ^ (z >> 31));
    }

    // Uniform in [0, 1).
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, n).
    int uniform_int(int n) {
        return n <= 1 ? 0 : static_cast<int>(next_u64() % static_cast<uint64_t>(n));
    }

    // Box-Muller, no cached spare so draw counts stay predictable.
    double normal(double mu = 0.0, double sigma = 1.0) {
        double u1 = uniform01();
        double u2 = uniform01();
        if (u1 < 1e-300) u1 = 1e-300;
        double r = std::sqrt(-2.0 * std::log(u1));
        return mu + sigma * r * std::cos(2.0 * M_PI * u2);
    }

private:
    uint64_t state_;
};

}  // namespace relearn
