#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace lbcnet {

// splitmix64 finalizer; used to derive independent child seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seed for stream `index` of a master seed. Monte Carlo repetitions and
// bootstrap replicates each use their own stream so results do not depend
// on execution order or thread count.
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(seed ^ splitmix64(index + 1));
}

// Deterministic generator: mt19937_64 (fully specified output sequence),
// uniforms from the top 53 bits, normals via Box-Muller. Distribution
// adapters from <random> are avoided on purpose: their output is not
// pinned by the standard.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // Uniform on (0,1); never returns 0 so log() stays finite.
    double uniform() {
        const double u = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
        return u > 0.0 ? u : 0x1.0p-53;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    int bernoulli(double p) { return uniform() < p ? 1 : 0; }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // multiply-shift rejection-free mapping is fine here; statistical
        // bias for n << 2^64 is negligible for resampling purposes
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace lbcnet
