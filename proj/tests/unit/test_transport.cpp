#include <doctest.h>

#include "oracles.hpp"
#include "ottolab/error.hpp"
#include "ottolab/spectral.hpp"
#include "ottolab/torus.hpp"
#include "ottolab/transport.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

using namespace ottolab;

namespace {

ParticleCloud atoms(std::vector<double> x, std::vector<double> w)
{
    std::vector<Coords> p;
    for (double v : x) p.push_back({v, 0.0});
    double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& v : w) v /= total;
    return ParticleCloud(1, p, w);
}

ParticleCloud random_atoms(std::mt19937_64& rng, int count, bool equal = false)
{
    std::vector<double> x(count), w(count);
    for (int i = 0; i < count; ++i) {
        x[i] = oracle::uniform01(rng);
        w[i] = equal ? 1.0 : 0.05 + oracle::uniform01(rng);
    }
    return atoms(x, w);
}

double plan_cost(const TransportPlan& p)
{
    std::vector<Coords> x, y;
    std::vector<double> a, b;
    support(p.source, x, a);
    support(p.target, y, b);
    int dim = measure_dim(p.source);
    double c = 0.0;
    for (auto& e : p.entries()) c += e.mass * dist2_coords(dim, x[e.i], y[e.j]);
    return c;
}

// Random coupling with the given marginals (greedy fill in a random order).
double random_coupling_cost(const std::vector<Coords>& x, std::vector<double> a, const std::vector<Coords>& y,
                            std::vector<double> b, std::mt19937_64& rng)
{
    std::vector<std::size_t> oi(a.size()), oj(b.size());
    std::iota(oi.begin(), oi.end(), 0);
    std::iota(oj.begin(), oj.end(), 0);
    std::shuffle(oi.begin(), oi.end(), rng);
    std::shuffle(oj.begin(), oj.end(), rng);
    std::size_t p = 0, q = 0;
    double c = 0.0;
    while (p < oi.size() && q < oj.size()) {
        std::size_t i = oi[p], j = oj[q];
        double m = std::min(a[i], b[j]);
        c += m * dist2_coords(1, x[i], y[j]);
        a[i] -= m;
        b[j] -= m;
        if (a[i] <= 1e-15) ++p;
        else ++q;
    }
    return c;
}

} // namespace

TEST_CASE("exact1d examples")
{
    auto mu = atoms({0.3, 0.7, 0.1}, {0.2, 0.5, 0.3});
    auto same = w2_exact_1d(mu, mu);
    CHECK(std::abs(same.cost) <= 1e-15);
    for (auto& e : same.coupling) CHECK(e.i == e.j);

    auto p = w2_exact_1d(atoms({0.2}, {1.0}), atoms({0.5}, {1.0}));
    CHECK(p.cost == doctest::Approx(0.09).epsilon(1e-12));

    // the short way round the circle
    CHECK(w2_exact_1d(atoms({0.1}, {1.0}), atoms({0.9}, {1.0})).cost == doctest::Approx(0.04).epsilon(1e-12));

    Grid g(1, 64);
    auto b0 = oracle::bump_1d(g, 0.25, 0.03), b1 = oracle::bump_1d(g, 0.45, 0.03);
    auto bump = w2_exact_1d(b0, b1);
    CHECK(std::abs(bump.cost - 0.04) <= 1e-6);
    CHECK(bump.marginal_residual <= 1e-9);

    CHECK_THROWS_AS(w2_exact_1d(ParticleCloud(1, {}, {}), mu), Error);
    CHECK_THROWS_AS(w2_exact_1d(GridDensity(Grid(2, 8), std::vector<double>(64, 1.0)), mu), Error);
}

TEST_CASE("exact1d matches brute-force matchings")
{
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 40; ++trial) {
        int n = 1 + trial % 7;
        std::vector<double> x(n), y(n);
        for (auto& v : x) v = oracle::uniform01(rng);
        for (auto& v : y) v = oracle::uniform01(rng);
        std::vector<double> w(n, 1.0);
        double ref = oracle::brute_force_w2sq_1d(x, y);
        CHECK(w2_exact_1d(atoms(x, w), atoms(y, w)).cost == doctest::Approx(ref).epsilon(1e-10).scale(1e-3));
        CHECK(w2_lp_oracle(atoms(x, w), atoms(y, w)).cost == doctest::Approx(ref).epsilon(1e-10).scale(1e-3));
    }
}

TEST_CASE("LP oracle examples and limits")
{
    auto two = atoms({0.0, 0.5}, {0.5, 0.5});
    CHECK(std::abs(w2_lp_oracle(two, two).cost) <= 1e-15);
    CHECK(w2_lp_oracle(two, atoms({0.25, 0.75}, {0.5, 0.5})).cost == doctest::Approx(0.0625).epsilon(1e-12));

    std::mt19937_64 rng(5);
    CHECK_THROWS_AS(w2_lp_oracle(random_atoms(rng, 300), random_atoms(rng, 300)), Error);
    try {
        w2_lp_oracle(random_atoms(rng, 300), random_atoms(rng, 300));
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::resource_limit);
    }
}

TEST_CASE("LP oracle beats random feasible couplings")
{
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 3; ++trial) {
        auto mu = random_atoms(rng, 32), nu = random_atoms(rng, 32);
        auto plan = w2_lp_oracle(mu, nu);
        CHECK(plan.marginal_residual <= 1e-9);
        CHECK(plan.duality_gap >= -1e-9);
        CHECK(std::abs(plan.duality_gap) <= 1e-9);
        CHECK(plan_cost(plan) == doctest::Approx(plan.cost).epsilon(1e-12));
        std::vector<Coords> x, y;
        std::vector<double> a, b;
        support(mu, x, a);
        support(nu, y, b);
        int worse = 0;
        for (int k = 0; k < 10000; ++k)
            if (random_coupling_cost(x, a, y, b, rng) < plan.cost - 1e-12) ++worse;
        CHECK(worse == 0);
    }
}

TEST_CASE("exact1d and LP agree on random discrete pairs")
{
    std::mt19937_64 rng(2025);
    double worst = 0.0, worst_gap = 0.0, worst_marg = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        int n = 1 + static_cast<int>(oracle::uniform01(rng) * 64), m = 1 + static_cast<int>(oracle::uniform01(rng) * 64);
        auto mu = random_atoms(rng, n), nu = random_atoms(rng, m);
        auto e = w2_exact_1d(mu, nu);
        auto l = w2_lp_oracle(mu, nu);
        worst = std::max(worst, std::abs(e.cost - l.cost));
        worst_gap = std::min({worst_gap, e.duality_gap, l.duality_gap});
        worst_marg = std::max({worst_marg, e.marginal_residual, l.marginal_residual});
        CHECK(plan_cost(e) == doctest::Approx(e.cost).epsilon(1e-10).scale(1e-6));
    }
    CHECK(worst <= 1e-8);
    CHECK(worst_gap >= -1e-9);
    CHECK(worst_marg <= 1e-9);
}

TEST_CASE("exact1d on grid densities matches the LP on fine atoms")
{
    // a histogram is the limit of many equal atoms inside each cell
    Grid g(1, 16);
    std::mt19937_64 rng(8);
    auto mu = oracle::random_density(g, 2, rng, 0.6), nu = oracle::random_density(g, 2, rng, 0.6);
    auto e = w2_exact_1d(mu, nu);
    auto refine = [&](const GridDensity& d) {
        std::vector<double> x, w;
        const int sub = 14;
        for (std::size_t i = 0; i < d.size(); ++i)
            for (int s = 0; s < sub; ++s) {
                x.push_back(g.point(i)[0] + (s + 0.5) / sub / 16.0 - 0.5 / 16.0);
                w.push_back(d.values[i]);
            }
        return atoms(x, w);
    };
    auto l = w2_lp_oracle(refine(mu), refine(nu));
    // each histogram is within W2 = (h / sub) / sqrt(12) of its atom refinement
    const double gap = 2.0 * (1.0 / 16.0 / 14.0) / std::sqrt(12.0);
    CHECK(std::abs(std::sqrt(e.cost) - std::sqrt(l.cost)) <= gap);
    CHECK(e.cost < l.cost);
    CHECK(e.duality_gap >= -1e-12);
}

TEST_CASE("Sinkhorn examples")
{
    Grid g(1, 64);
    auto b0 = oracle::bump_1d(g, 0.25, 0.03), b1 = oracle::bump_1d(g, 0.45, 0.03);
    auto self = sinkhorn(b0, b0, 1e-3);
    CHECK(self.cost <= 2e-3 * std::log(64.0));
    CHECK(self.marginal_residual <= 1e-8);

    auto lp = w2_lp_oracle(b0, b1);
    auto s = sinkhorn(b0, b1, 5e-4);
    CHECK(std::abs(s.cost - lp.cost) <= 5e-3);
    double mean = 0.0;
    for (std::size_t i = 0; i < s.f.size(); ++i) mean += b0.values[i] / 64.0 * s.f[i];
    CHECK(std::abs(mean) <= 1e-12);

    auto big = sinkhorn(b0, b1, 1e3);
    double worst = 0.0;
    for (std::size_t i = 0; i < 64; ++i)
        for (std::size_t j = 0; j < 64; ++j)
            worst = std::max(worst, std::abs(big.dense[i * 64 + j] - b0.values[i] * b1.values[j] / 4096.0));
    CHECK(worst <= 1e-6);

    CHECK_THROWS_AS(sinkhorn(b0, b1, 0.0), Error);
    SinkhornOptions tight;
    tight.max_iterations = 3;
    try {
        sinkhorn(b0, b1, 1e-4, tight);
        CHECK(false);
    } catch (const NumericalFailure& e) {
        CHECK(e.iterations() == 3);
        CHECK(e.residual() > 0.0);
    }
}

TEST_CASE("Sinkhorn against LP on random grid pairs")
{
    Grid g(1, 64);
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 3; ++trial) {
        auto mu = oracle::random_density(g, 3, rng, 0.8), nu = oracle::random_density(g, 3, rng, 0.8);
        auto s = sinkhorn(mu, nu, 5e-4);
        auto l = w2_lp_oracle(mu, nu);
        CHECK(std::abs(s.cost - l.cost) <= 5e-3);
        CHECK(s.marginal_residual <= 1e-8);
    }
    Grid g2(2, 8);
    auto mu = oracle::random_density(g2, 2, rng), nu = oracle::random_density(g2, 2, rng);
    CHECK(std::abs(sinkhorn(mu, nu, 5e-4).cost - w2_lp_oracle(mu, nu).cost) <= 5e-3);
}

TEST_CASE("monge potential")
{
    Grid g(1, 128);
    auto b0 = oracle::bump_1d(g, 0.25, 0.03), b1 = oracle::bump_1d(g, 0.45, 0.03);
    auto same = monge_potential(w2_exact_1d(b0, b0));
    for (double v : same.displacement.comp[0]) CHECK(std::abs(v) <= 1e-12);

    for (auto plan : {w2_exact_1d(b0, b1), sinkhorn(b0, b1, 1e-4)}) {
        INFO(to_string(plan.method));
        auto mp = monge_potential(plan);
        auto grad = spectral::derivative(mp.phi, 0);
        double worst = 0.0, energy = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            energy += grad.values[i] * grad.values[i] * b0.values[i] / 128.0;
            // effective support: where the bump carries its mass
            if (b0.values[i] > 0.05 * 8.0) worst = std::max(worst, std::abs(grad.values[i] - 0.2));
        }
        CHECK(worst <= 2e-2);
        CHECK(energy == doctest::Approx(plan.cost).epsilon(1e-3));
        CHECK(mp.pushforward_residual <= 2e-2);
    }

    TransportPlan empty;
    empty.source = b0;
    CHECK_THROWS_AS(monge_potential(empty), Error);
}

TEST_CASE("geodesic interpolation")
{
    auto mid = geodesic_interpolate(w2_exact_1d(atoms({0.2}, {1.0}), atoms({0.4}, {1.0})), 0.5);
    auto& c = std::get<ParticleCloud>(mid);
    REQUIRE(c.size() == 1);
    CHECK(c.points[0][0] == doctest::Approx(0.3).epsilon(1e-12));

    Grid g(1, 128);
    auto b0 = oracle::bump_1d(g, 0.25, 0.03), b1 = oracle::bump_1d(g, 0.45, 0.03);
    auto plan = w2_exact_1d(b0, b1);
    CHECK(std::get<GridDensity>(geodesic_interpolate(plan, 0.0)).values == b0.values);
    CHECK(std::get<GridDensity>(geodesic_interpolate(plan, 1.0)).values == b1.values);
    CHECK_THROWS_AS(geodesic_interpolate(plan, 1.5), Error);

    std::vector<double> ts{0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<Measure> path;
    for (double t : ts) path.push_back(geodesic_interpolate(plan, t));
    double w = std::sqrt(plan.cost), dev = 0.0;
    for (std::size_t s = 0; s < ts.size(); ++s)
        for (std::size_t t = 0; t < ts.size(); ++t)
            dev = std::max(dev, std::abs(w2_distance(path[s], path[t]) - std::abs(ts[t] - ts[s]) * w) / w);
    CHECK(dev <= 0.02);

    // LP and entropic routes in 2D
    Grid g2(2, 8);
    std::mt19937_64 rng(4);
    auto mu = oracle::random_density(g2, 1, rng), nu = oracle::random_density(g2, 1, rng);
    auto lp = w2_lp_oracle(mu, nu);
    auto half = geodesic_interpolate(lp, 0.5);
    CHECK(w2_distance(Measure(mu), half) == doctest::Approx(0.5 * std::sqrt(lp.cost)).epsilon(1e-6));
    auto sk = geodesic_interpolate(sinkhorn(mu, nu, 1e-2), 0.5);
    CHECK(std::get<ParticleCloud>(sk).size() == g2.size());
}

TEST_CASE("quantile coupling integral reproduces the cost")
{
    Grid g(1, 64);
    std::mt19937_64 rng(12);
    auto mu = oracle::random_density(g, 3, rng), nu = oracle::random_density(g, 3, rng);
    auto plan = w2_exact_1d(mu, nu);
    double c = quantile_coupling_integral(plan, [](double x, double y) { return (y - x) * (y - x); });
    CHECK(c == doctest::Approx(plan.cost).epsilon(1e-12));
}
