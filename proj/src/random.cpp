#include "ottolab/random.hpp"

#include <cmath>
#include <numbers>

namespace ottolab {

double Rng::normal()
{
    if (cached_) {
        cached_ = false;
        return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    cached_ = true;
    return r * std::cos(a);
}

PotentialField random_potential(const Grid& g, int kmax, Rng& rng, double amplitude)
{
    struct Term {
        int k0, k1;
        double a, b;
    };
    std::vector<Term> terms;
    for (int k0 = 0; k0 <= kmax; ++k0)
        for (int k1 = (g.dim == 2 ? -kmax : 0); k1 <= (g.dim == 2 ? kmax : 0); ++k1) {
            if (k0 == 0 && k1 <= 0) continue;
            double decay = amplitude / (1.0 + k0 * k0 + k1 * k1);
            double a = decay * rng.uniform(-1.0, 1.0);
            double b = decay * rng.uniform(-1.0, 1.0);
            terms.push_back({k0, k1, a, b});
        }
    const double two_pi = 2.0 * std::numbers::pi;
    return PotentialField(sample(g, [&](const Coords& x) {
        double s = 0.0;
        for (auto& t : terms) {
            double ph = two_pi * (t.k0 * x[0] + t.k1 * x[1]);
            s += t.a * std::cos(ph) + t.b * std::sin(ph);
        }
        return s;
    }));
}

GridDensity random_density(const Grid& g, int kmax, Rng& rng, double amplitude)
{
    auto p = random_potential(g, kmax, rng, amplitude);
    std::vector<double> v(g.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::exp(p.values[i]);
    return normalize(GridDensity(g, std::move(v)));
}

} // namespace ottolab
