#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "glab/common.hpp"
#include "glab/errors.hpp"

namespace glab {

// splitmix64 step; used to whiten seeds and to derive independent
// per-chain streams from (base seed, stream index).
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_stream_seed(std::uint64_t base, std::uint64_t stream) {
    return splitmix64(splitmix64(base) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

// Deterministic random source. Distributions are generated in-house
// (Box-Muller for normals) so a given seed produces the same stream on
// every platform and standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    // Uniform on [0, 1).
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; the pair's second value is cached.
    double normal() {
        ++normal_draws_;
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] keeps the log finite.
        const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    Vec normal_vec(int d) {
        Vec out(d);
        for (int i = 0; i < d; ++i) out[i] = normal();
        return out;
    }

    // Index drawn from an unnormalized-free probability vector.
    template <typename Probs>
    int categorical(const Probs& probs) {
        const double u = uniform();
        double acc = 0.0;
        const int n = static_cast<int>(probs.size());
        for (int i = 0; i < n; ++i) {
            acc += probs[i];
            if (u < acc) return i;
        }
        return n - 1;
    }

    // Total normal() calls so far; used by white-box sampler tests.
    std::uint64_t normal_draws() const { return normal_draws_; }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
    std::uint64_t normal_draws_ = 0;
};

}  // namespace glab
