#include <doctest.h>

#include "oracles.hpp"
#include "ottolab/calculus.hpp"
#include "ottolab/connection.hpp"
#include "ottolab/error.hpp"
#include "ottolab/spectral.hpp"
#include "ottolab/transport.hpp"

#include <cmath>
#include <numbers>

using namespace ottolab;

namespace {

constexpr double pi = std::numbers::pi;

PotentialField sample(const oracle::TrigPoly& p, const Grid& g) { return PotentialField(p.sample(g)); }

GridDensity uniform(const Grid& g) { return GridDensity(g, std::vector<double>(g.size(), 1.0)); }

double sup(const GridFunction& f)
{
    double s = 0.0;
    for (double v : f.values) s = std::max(s, std::abs(v));
    return s;
}

double sup(const VectorGridField& u)
{
    double s = 0.0;
    for (int c = 0; c < u.grid.dim; ++c)
        for (double v : u.comp[c]) s = std::max(s, std::abs(v));
    return s;
}

// int Hess p2 (grad p1, grad q) dmu by grid quadrature of closed forms
double hessian_pairing(const oracle::TrigPoly& p1, const oracle::TrigPoly& p2, const oracle::TrigPoly& q,
                       const GridDensity& mu)
{
    const Grid& g = mu.grid;
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        Coords x = g.point(i);
        auto h = p2.hessian(x);
        auto a = p1.gradient(x), b = q.gradient(x);
        double v = g.dim == 1 ? h[0] * a[0] * b[0]
                              : h[0] * a[0] * b[0] + h[1] * (a[0] * b[1] + a[1] * b[0]) + h[2] * a[1] * b[1];
        s += v * mu.values[i];
    }
    return s * g.cell_volume();
}

// Cauchy-Schwarz scale for the pairing above
double pairing_scale(const oracle::TrigPoly& p1, const oracle::TrigPoly& p2, const oracle::TrigPoly& q,
                     const GridDensity& mu)
{
    const Grid& g = mu.grid;
    double hs = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto h = p2.hessian(g.point(i));
        hs = std::max(hs, std::abs(h[0]) + std::abs(h[1]) + std::abs(h[2]));
    }
    return hs * std::sqrt(norm2_mu(p1.sample_gradient(g), mu) * norm2_mu(q.sample_gradient(g), mu));
}

std::vector<GridDensity> test_measures(std::mt19937_64& rng)
{
    return {uniform(Grid(1, 128)), oracle::random_density(Grid(1, 128), 3, rng),
            oracle::random_density(Grid(2, 32), 2, rng)};
}

oracle::TrigPoly cos_poly(int k, double a = 1.0, double b = 0.0)
{
    oracle::TrigPoly p;
    p.dim = 1;
    p.terms.push_back({k, 0, a, b});
    return p;
}

} // namespace

TEST_CASE("spectral coefficients reproduce the eigenbasis expansion")
{
    Grid g(2, 32);
    std::mt19937_64 rng(11);
    auto p = oracle::random_trig(2, 3, rng);
    auto f = p.sample(g);
    auto sc = spectral_coefficients(f);
    CHECK(sc.n_max == 8);
    CHECK(sc.sobolev_k == 4);
    CHECK(sc.tail_energy < 1e-12);
    // TrigPoly a cos + b sin = (a / sqrt2) sqrt2 cos + (b / sqrt2) sqrt2 sin
    for (auto& t : p.terms) {
        bool found = false;
        for (auto& s : sc.terms) {
            int sign = 0;
            if (s.k0 == t.k0 && s.k1 == t.k1) sign = 1;
            if (s.k0 == -t.k0 && s.k1 == -t.k1) sign = -1;
            if (!sign) continue;
            found = true;
            CHECK(std::abs(s.a_cos - t.a / std::numbers::sqrt2) < 1e-12);
            CHECK(std::abs(s.a_sin - sign * t.b / std::numbers::sqrt2) < 1e-12);
        }
        CHECK(found);
    }

    // a mode above the cut goes to the tail with its Sobolev weight
    auto q = cos_poly(20);
    auto sq = spectral_coefficients(q.sample(Grid(1, 64)));
    CHECK(sq.terms.size() == 16);
    double lambda = 4.0 * pi * pi * 400.0;
    CHECK(sq.tail_energy == doctest::Approx(0.5 * std::pow(1.0 + lambda, 3)).epsilon(1e-10));

    auto tr = truncate_modes(f, 1);
    auto back = spectral_coefficients(tr);
    for (auto& s : back.terms)
        if (std::max(std::abs(s.k0), std::abs(s.k1)) > 1) CHECK(std::abs(s.a_cos) + std::abs(s.a_sin) < 1e-14);
}

TEST_CASE("gradient of polynomial functionals")
{
    Grid g(1, 128);
    std::mt19937_64 rng(3);
    auto phi = oracle::random_trig(1, 3, rng);
    auto mu = oracle::random_density(g, 3, rng);

    auto single = grad_F_polynomial({phi.sample(g)}, mu);
    CHECK(sup(single.vectors - phi.sample_gradient(g)) < 1e-10);

    auto squared = grad_F_polynomial({phi.sample(g), phi.sample(g)}, uniform(g));
    CHECK(sup(squared.vectors) < 1e-13);

    // directional derivative along the flow of grad psi
    auto psi = oracle::random_trig(1, 3, rng, 0.2);
    auto phi2 = oracle::random_trig(1, 2, rng);
    std::vector<GridFunction> factors{phi.sample(g), phi2.sample(g)};
    auto F = [&](const GridDensity& m) { return moments(m, factors[0]) * moments(m, factors[1]); };
    auto grad = grad_F_polynomial(factors, mu);
    double analytic = inner_mu(grad.vectors, psi.sample_gradient(g), mu);
    auto P = sample(psi, g);
    double eps = 1e-4;
    auto diff = [&](double e) { return (F(pushforward_density_flow(mu, P, e)) - F(mu)) / e; };
    double rich = 2.0 * diff(0.5 * eps) - diff(eps);
    CHECK(std::abs(rich - analytic) <= 1e-4 * std::max(1.0, std::abs(analytic)));
}

TEST_CASE("bracket of constant fields")
{
    std::mt19937_64 rng(5);
    for (auto& mu : test_measures(rng)) {
        const Grid& g = mu.grid;
        auto p1 = sample(oracle::random_trig(g.dim, 3, rng), g);
        auto p2 = sample(oracle::random_trig(g.dim, 3, rng), g);
        auto b12 = bracket_constant_fields(p1, p2, mu);
        auto b21 = bracket_constant_fields(p2, p1, mu);
        CHECK(sup(b12.phi_tilde + b21.phi_tilde) <= 1e-10);
        auto self = bracket_constant_fields(p1, p1, mu);
        CHECK(sup(self.phi_tilde) <= 1e-12);
        CHECK(b12.field.potential.has_value());
    }

    // cos and sin at uniform: C is the constant -8 pi^3 and the projection vanishes
    Grid g(1, 64);
    auto c = sample(cos_poly(1), g), s = sample(cos_poly(1, 0.0, 1.0), g);
    GridDensity u = uniform(g);
    auto C = apply_Lmu(c, u) * spectral::gradient(s) - apply_Lmu(s, u) * spectral::gradient(c);
    for (double v : C.comp[0]) CHECK(std::abs(v + 8.0 * pi * pi * pi) < 1e-8);
    auto b = bracket_constant_fields(c, s, u);
    CHECK(sup(b.phi_tilde) < 1e-8);
    CHECK(sup(b.field.vectors) < 1e-8);
}

TEST_CASE("projected bracket pairs like the Euclidean Lie bracket")
{
    // <Pi[V1, V2], grad q>_mu = int <grad q, Hess p2 grad p1 - Hess p1 grad p2> dmu
    std::mt19937_64 rng(7);
    for (auto& mu : test_measures(rng)) {
        const Grid& g = mu.grid;
        for (int trial = 0; trial < 5; ++trial) {
            auto p1 = oracle::random_trig(g.dim, 3, rng), p2 = oracle::random_trig(g.dim, 3, rng);
            auto q = oracle::random_trig(g.dim, 3, rng);
            auto b = bracket_constant_fields(sample(p1, g), sample(p2, g), mu);
            double lhs = -inner_mu(b.field.vectors, q.sample_gradient(g), mu);
            double rhs = hessian_pairing(p1, p2, q, mu) - hessian_pairing(p2, p1, q, mu);
            double scale = pairing_scale(p1, p2, q, mu) + pairing_scale(p2, p1, q, mu);
            CHECK(std::abs(lhs - rhs) <= 1e-7 * scale);
        }
    }
}

TEST_CASE("covariant derivative of constant fields")
{
    std::mt19937_64 rng(9);
    auto measures = test_measures(rng);

    SUBCASE("pairing identity on 20 triples per measure")
    {
        for (auto& mu : measures) {
            const Grid& g = mu.grid;
            for (int trial = 0; trial < 20; ++trial) {
                auto p1 = oracle::random_trig(g.dim, 3, rng), p2 = oracle::random_trig(g.dim, 3, rng);
                auto q = oracle::random_trig(g.dim, 3, rng);
                auto cov = covariant_derivative_constant(sample(p1, g), sample(p2, g), mu);
                double lhs = inner_mu(cov.vectors, q.sample_gradient(g), mu);
                double rhs = hessian_pairing(p1, p2, q, mu);
                CHECK(std::abs(lhs - rhs) <= 1e-7 * std::max(std::abs(rhs), pairing_scale(p1, p2, q, mu)));
            }
        }
    }

    SUBCASE("pairing with a single eigenmode")
    {
        auto& mu = measures[1];
        const Grid& g = mu.grid;
        for (int k = 1; k <= 4; ++k) {
            auto p1 = oracle::random_trig(1, 3, rng);
            auto p2 = cos_poly(k, std::numbers::sqrt2);
            for (int j = 1; j <= 3; ++j) {
                auto q = cos_poly(j, 0.0, std::numbers::sqrt2);
                auto cov = covariant_derivative_constant(sample(p1, g), sample(p2, g), mu);
                double lhs = inner_mu(cov.vectors, q.sample_gradient(g), mu);
                double rhs = hessian_pairing(p1, p2, q, mu);
                CHECK(std::abs(lhs - rhs) <= 1e-7 * std::max(std::abs(rhs), pairing_scale(p1, p2, q, mu)));
            }
        }
    }

    SUBCASE("equal arguments and the cos/sin closed form")
    {
        auto& mu = measures[2];
        const Grid& g = mu.grid;
        auto p = sample(oracle::random_trig(2, 3, rng), g);
        auto cov = covariant_derivative_constant(p, p, mu);
        auto gp = spectral::gradient(p);
        auto expect = spectral::gradient(0.5 * dot(gp, gp));
        CHECK(sup(cov.vectors - expect) < 1e-10);

        Grid g1(1, 64);
        auto c = sample(cos_poly(1), g1), s = sample(cos_poly(1, 0.0, 1.0), g1);
        auto cs = covariant_derivative_constant(c, s, uniform(g1));
        for (std::size_t i = 0; i < g1.size(); ++i) {
            double x = g1.point(i)[0];
            CHECK(std::abs(cs.vectors.comp[0][i] + 4.0 * pi * pi * pi * std::cos(4.0 * pi * x)) < 1e-9);
        }
    }

    SUBCASE("torsion free")
    {
        for (auto& mu : measures) {
            const Grid& g = mu.grid;
            auto p1 = oracle::random_trig(g.dim, 3, rng), p2 = oracle::random_trig(g.dim, 3, rng);
            auto P1 = sample(p1, g), P2 = sample(p2, g);
            auto c12 = covariant_derivative_constant(P1, P2, mu);
            auto c21 = covariant_derivative_constant(P2, P1, mu);
            auto br = bracket_constant_fields(P1, P2, mu);
            auto torsion = c12.vectors - c21.vectors + br.field.vectors;
            CHECK(std::sqrt(norm2_mu(torsion, mu)) <= 1e-8);

            auto q = oracle::random_trig(g.dim, 3, rng);
            double lhs = inner_mu(c12.vectors - c21.vectors, q.sample_gradient(g), mu);
            double rhs = hessian_pairing(p1, p2, q, mu) - hessian_pairing(p2, p1, q, mu);
            CHECK(std::abs(lhs - rhs) <= 1e-7 * (pairing_scale(p1, p2, q, mu) + pairing_scale(p2, p1, q, mu)));
        }
    }

    SUBCASE("metric compatibility along the flow")
    {
        for (auto& mu : measures) {
            const Grid& g = mu.grid;
            auto P1 = sample(oracle::random_trig(g.dim, 3, rng, 0.3), g);
            auto P2 = sample(oracle::random_trig(g.dim, 3, rng), g);
            auto P3 = sample(oracle::random_trig(g.dim, 3, rng), g);
            auto G2 = spectral::gradient(P2), G3 = spectral::gradient(P3);
            auto metric = [&](double t) { return inner_mu(G2, G3, pushforward_density_flow(mu, P1, t)); };
            double h = 1e-3;
            auto d = [&](double e) { return (metric(e) - metric(-e)) / (2.0 * e); };
            double fd = (4.0 * d(0.5 * h) - d(h)) / 3.0;
            double analytic = inner_mu(covariant_derivative_constant(P1, P2, mu).vectors, G3, mu) +
                              inner_mu(G2, covariant_derivative_constant(P1, P3, mu).vectors, mu);
            CHECK(std::abs(fd - analytic) <= 1e-4);
        }
    }

    SUBCASE("stable under spectral truncation")
    {
        for (auto& mu : measures) {
            const Grid& g = mu.grid;
            auto P1 = sample(oracle::random_trig(g.dim, 3, rng), g);
            auto P2 = sample(oracle::random_trig(g.dim, 3, rng), g);
            int n = g.n / 8;
            auto a = covariant_derivative_constant(PotentialField(truncate_modes(P1, n)),
                                                   PotentialField(truncate_modes(P2, n)), mu);
            auto b = covariant_derivative_constant(PotentialField(truncate_modes(P1, 2 * n)),
                                                   PotentialField(truncate_modes(P2, 2 * n)), mu);
            CHECK(sup(a.vectors - b.vectors) <= 1e-6);
            CHECK(spectral_coefficients(P1, n).tail_energy < 1e-12);
        }
    }
}

TEST_CASE("covariant derivative of measure dependent fields")
{
    std::mt19937_64 rng(13);
    Grid g(1, 128);
    auto mu = oracle::random_density(g, 3, rng);
    auto psi = sample(oracle::random_trig(1, 3, rng, 0.3), g);

    SUBCASE("constant field reduces to the constant formula")
    {
        auto P2 = sample(oracle::random_trig(1, 3, rng), g);
        auto gen = covariant_derivative_general(constant_field(P2), psi, mu);
        auto ref = covariant_derivative_constant(psi, P2, mu);
        CHECK(sup(gen.field.vectors - ref.vectors) <= 1e-6);
        CHECK(sup(gen.directional) < 1e-12);
        CHECK(gen.coefficients.tail_energy < 1e-8);
    }

    SUBCASE("product rule")
    {
        auto f = oracle::random_trig(1, 2, rng);
        auto P2 = sample(oracle::random_trig(1, 3, rng), g);
        auto Z = moment_weighted_field({f.sample(g)}, {P2});
        auto gen = covariant_derivative_general(Z, psi, mu);
        // (V_psi F_f) grad psi2 + F_f(mu) nabla_{V_psi} V_psi2
        double dF = inner_mu(f.sample_gradient(g), spectral::gradient(psi), mu);
        double F = moments(mu, f.sample(g));
        auto expect = dF * spectral::gradient(P2) + F * covariant_derivative_constant(psi, P2, mu).vectors;
        CHECK(sup(gen.field.vectors - expect) <= 1e-5);
    }

    SUBCASE("test field along itself")
    {
        // Z = sum_i F_{f_i} grad psi_i; at mu the direction is Z(mu) = grad(sum_j F_j psi_j)
        std::vector<GridFunction> fs;
        std::vector<PotentialField> ps;
        std::vector<oracle::TrigPoly> fp;
        for (int i = 0; i < 3; ++i) {
            fp.push_back(oracle::random_trig(1, 2, rng));
            fs.push_back(fp.back().sample(g));
            ps.push_back(sample(oracle::random_trig(1, 3, rng, 0.5), g));
        }
        auto Z = moment_weighted_field(fs, ps);
        std::vector<double> F(3);
        GridFunction dir(g);
        for (int i = 0; i < 3; ++i) {
            F[i] = moments(mu, fs[i]);
            dir = dir + F[i] * ps[i];
        }
        auto gen = covariant_derivative_general(Z, PotentialField(dir), mu);

        VectorGridField expect(g);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double dF = inner_mu(fp[i].sample_gradient(g), spectral::gradient(ps[j]), mu);
                expect = expect + (F[j] * dF) * spectral::gradient(ps[i]) +
                         (F[j] * F[i]) * covariant_derivative_constant(ps[j], ps[i], mu).vectors;
            }
        CHECK(sup(gen.field.vectors - expect) <= 1e-5);
    }

    SUBCASE("non-derivable evaluators are rejected")
    {
        auto f = oracle::random_trig(1, 2, rng).sample(g);
        double F0 = moments(mu, f);
        auto P2 = sample(oracle::random_trig(1, 3, rng), g);
        MeasureVectorField Z;
        Z.evaluator = [=](const Measure& m, const Grid&) { return std::cbrt(moments(m, f) - F0) * P2; };
        try {
            covariant_derivative_general(Z, psi, mu);
            FAIL("expected not_derivable");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::not_derivable);
        }

        std::vector<double> noise(g.size());
        for (auto& v : noise) v = oracle::uniform01(rng);
        GridFunction rough(g, noise);
        MeasureVectorField R;
        R.evaluator = [=](const Measure&, const Grid&) { return rough; };
        CHECK_THROWS_AS(covariant_derivative_general(R, psi, mu), Error);
    }
}

TEST_CASE("directional derivative of the squared distance")
{
    Grid g(1, 128);
    std::mt19937_64 rng(17);
    auto sigma = oracle::random_density(g, 3, rng);
    CHECK(std::abs(w2sq_directional_derivative(sigma, sigma, sample(oracle::random_trig(1, 3, rng), g))) < 1e-12);

    int worst_fail = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        auto s = oracle::random_density(g, 3, rng);
        auto m = oracle::random_density(g, 3, rng);
        auto psi = sample(oracle::random_trig(1, 3, rng, 0.05), g);
        double analytic = w2sq_directional_derivative(s, m, psi);
        auto w = [&](double t) {
            double d = w2_distance(s, pushforward_density_flow(m, psi, t));
            return d * d;
        };
        double h = 1e-4;
        double fd = (w(h) - w(-h)) / (2.0 * h);
        double rel = std::abs(fd - analytic) / std::abs(fd);
        worst = std::max(worst, rel);
        if (rel > 1e-3) ++worst_fail;
    }
    MESSAGE("worst relative gap " << worst);
    CHECK(worst_fail == 0);

    // moving mu along its own Monge potential towards sigma decreases the distance
    auto s = oracle::random_density(g, 3, rng);
    auto m = oracle::random_density(g, 3, rng);
    auto grad = w2sq_gradient(s, m);
    CHECK(w2sq_directional_derivative(s, m, grad.phi_tilde) < 0.0);
}

TEST_CASE("gradient of the squared distance")
{
    Grid g(1, 128);
    std::mt19937_64 rng(19);
    auto mu = oracle::random_density(g, 3, rng);
    auto self = w2sq_gradient(mu, mu);
    CHECK(sup(self.field.vectors) < 1e-8);

    auto sigma = oracle::bump_1d(g, 0.3, 0.03);
    auto bump = oracle::bump_1d(g, 0.5, 0.03);
    auto shift = w2sq_gradient(sigma, bump);
    auto d = spectral::gradient(shift.phi_tilde);
    double peak = *std::max_element(bump.values.begin(), bump.values.end());
    for (std::size_t i = 0; i < g.size(); ++i)
        if (bump.values[i] > 0.4 * peak) CHECK(std::abs(d.comp[0][i] + 0.2) < 2e-2);

    for (int trial = 0; trial < 20; ++trial) {
        auto s = oracle::random_density(g, 3, rng);
        auto m = oracle::random_density(g, 3, rng);
        auto psi = sample(oracle::random_trig(1, 3, rng), g);
        auto gr = w2sq_gradient(s, m);
        double pairing = inner_mu(gr.field.vectors, spectral::gradient(psi), m);
        double direct = w2sq_directional_derivative(s, m, psi);
        CHECK(std::abs(pairing - direct) <= 1e-3 * std::abs(direct));
    }
}
