#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "dtmnav/geometry.hpp"

namespace dtmnav {

/// mt19937_64 with distribution code written out here, because the standard
/// distributions are not bit-reproducible across library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    Rng(std::uint64_t seed, std::uint64_t stream) : engine_(mix(seed, stream)) {}

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // Box-Muller; 1 - u keeps the log argument in (0, 1]
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }
    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    /// Uniformly distributed unit vector.
    Vec3 unit_vector() {
        const double z = uniform(-1.0, 1.0);
        const double a = uniform(0.0, 2.0 * std::numbers::pi);
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        return {r * std::cos(a), r * std::sin(a), z};
    }

    std::uint64_t next_u64() { return engine_(); }

    static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
        // splitmix64 finaliser over the combined value
        std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace dtmnav
