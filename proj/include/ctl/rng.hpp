#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace ctl {

// splitmix64 finalizer, used to derive independent seeds for sub-streams
// (splits, recordings, epochs) from one master seed.
inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
    uint64_t x = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

// Deterministic RNG. The engine is std::mt19937_64 (bit-exact everywhere);
// the value transforms are spelled out here because the standard library's
// distributions are implementation-defined and would break byte-for-byte
// reproducibility of generated corpora and training runs.
class Rng {
  public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1): 53 random mantissa bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi], inclusive.
    int uniform_int(int lo, int hi) {
        const uint64_t range = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(eng_() % range);
    }

    // Box-Muller; consumes two uniforms per call.
    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925 * u2);
    }

    // Knuth's product method; fine for the small rates used here.
    int poisson(double lambda) {
        const double limit = std::exp(-lambda);
        int k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform();
        } while (p > limit);
        return k - 1;
    }

    // Fisher-Yates with this engine (std::shuffle is implementation-defined).
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
            const int j = uniform_int(0, i);
            std::swap(v[i], v[j]);
        }
    }

  private:
    std::mt19937_64 eng_;
};

}  // namespace ctl
