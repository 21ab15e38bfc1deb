#pragma once

#include "ottolab/measures.hpp"

#include <cstdint>
#include <random>

namespace ottolab {

/// Seeded generator whose draws are identical on every platform: uniforms take the
/// top 53 bits of mt19937_64 and normals use Box-Muller (the std distributions
/// are implementation defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
    double normal();
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

private:
    std::mt19937_64 engine_;
    bool cached_ = false;
    double spare_ = 0.0;
};

/// sum over 0 < |k|_inf <= kmax of amplitude / (1 + |k|^2) (a cos + b sin), a, b uniform in [-1, 1].
PotentialField random_potential(const Grid& g, int kmax, Rng& rng, double amplitude = 1.0);

/// Density proportional to exp(p) for such a p, normalized to unit mass.
GridDensity random_density(const Grid& g, int kmax, Rng& rng, double amplitude = 0.5);

} // namespace ottolab
