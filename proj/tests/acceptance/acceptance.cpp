// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Inputs and reference values come from the closed-form oracles in tests/support.

#include "oracles.hpp"
#include "ottolab/calculus.hpp"
#include "ottolab/connection.hpp"
#include "ottolab/error.hpp"
#include "ottolab/flows.hpp"
#include "ottolab/io.hpp"
#include "ottolab/parallel.hpp"
#include "ottolab/scenarios.hpp"
#include "ottolab/spectral.hpp"
#include "ottolab/torus.hpp"
#include "ottolab/transport.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>

using namespace ottolab;
namespace fs = std::filesystem;

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

struct Outcome {
    bool passed = false;
    std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name, double budget_s, const std::function<Outcome()>& body)
{
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool in_time = budget_s <= 0.0 || secs <= budget_s;
    bool ok = o.passed && in_time;
    if (!ok) ++failures;
    std::printf("%s %d %s: %s (%.2f s%s)\n", ok ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), secs,
                budget_s > 0.0 ? (in_time ? ", within budget" : ", over budget") : "");
    std::fflush(stdout);
}

std::string num(double v)
{
    char b[32];
    std::snprintf(b, sizeof b, "%.3g", v);
    return b;
}

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

double l2mu(const GridFunction& f, const GridDensity& mu)
{
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += f[i] * f[i] * mu.values[i];
    return std::sqrt(s * mu.grid.cell_volume());
}

double field_dist(const VectorGridField& a, const VectorGridField& b, const GridDensity& mu)
{
    return std::sqrt(norm2_mu(a - b, mu));
}

VectorGridField random_field(const Grid& g, std::mt19937_64& rng)
{
    VectorGridField u(g);
    for (int a = 0; a < g.dim; ++a) u.comp[a] = oracle::random_trig(g.dim, 4, rng).sample(g).values;
    return u;
}

// int Hess p2 (grad p1, grad q) dmu from closed-form derivatives
double hessian_pairing(const oracle::TrigPoly& p1, const oracle::TrigPoly& p2, const oracle::TrigPoly& q,
                       const GridDensity& mu, double* scale)
{
    const Grid& g = mu.grid;
    double s = 0.0, hs = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        Coords x = g.point(i);
        auto h = p2.hessian(x);
        auto a = p1.gradient(x), b = q.gradient(x);
        double v = g.dim == 1 ? h[0] * a[0] * b[0]
                              : h[0] * a[0] * b[0] + h[1] * (a[0] * b[1] + a[1] * b[0]) + h[2] * a[1] * b[1];
        s += v * mu.values[i];
        hs = std::max(hs, std::abs(h[0]) + std::abs(h[1]) + std::abs(h[2]));
    }
    *scale = hs * std::sqrt(norm2_mu(p1.sample_gradient(g), mu) * norm2_mu(q.sample_gradient(g), mu));
    return s * g.cell_volume();
}

// equal-weight quantiles of 1 + 0.6 cos(2 pi (x - 0.3)) by Newton on the closed-form CDF
ParticleCloud skewed_cloud(int count)
{
    std::vector<Coords> p(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        double u = (i + 0.5) / count, x = u;
        for (int it = 0; it < 60; ++it) {
            double F = x + 0.6 / two_pi * (std::sin(two_pi * (x - 0.3)) + std::sin(two_pi * 0.3)) - u;
            x -= F / (1.0 + 0.6 * std::cos(two_pi * (x - 0.3)));
        }
        p[static_cast<std::size_t>(i)] = {wrap_unit(x), 0.0};
    }
    return ParticleCloud::uniform_weights(1, p);
}

ParticleCloud random_atoms(std::mt19937_64& rng, int count, bool equal)
{
    std::vector<Coords> p(static_cast<std::size_t>(count));
    std::vector<double> w(p.size());
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = {oracle::uniform01(rng), 0.0};
        w[i] = equal ? 1.0 : 0.05 + oracle::uniform01(rng);
        total += w[i];
    }
    for (double& v : w) v /= total;
    return ParticleCloud(1, std::move(p), std::move(w));
}

double sup_w2(const MeasureCurve& coarse, const MeasureCurve& fine)
{
    double s = 0.0;
    std::size_t ratio = (fine.size() - 1) / (coarse.size() - 1);
    for (std::size_t k = 0; k < coarse.size(); ++k) s = std::max(s, w2_distance(coarse.states[k], fine.states[k * ratio]));
    return s;
}

Outcome geodesics()
{
    Grid g(1, 128);
    auto plan = w2_exact_1d(oracle::bump_1d(g, 0.25, 0.03), oracle::bump_1d(g, 0.45, 0.03));
    std::vector<double> ts{0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<Measure> path;
    for (double t : ts) path.push_back(geodesic_interpolate(plan, t));
    double w = w2_distance(path.front(), path.back()), dev = 0.0;
    for (std::size_t s = 0; s < ts.size(); ++s)
        for (std::size_t t = 0; t < ts.size(); ++t)
            dev = std::max(dev, std::abs(w2_distance(path[s], path[t]) - std::abs(ts[t] - ts[s]) * w) / w);
    // the bumps are 0.2 apart, so W2 itself is known up to the floor and wrapping
    bool distance_ok = std::abs(w - 0.2) < 2e-3;
    return {dev <= 0.02 && distance_ok, "max relative deviation " + num(dev) + " (limit 0.02), W2 " + num(w) + " vs shift 0.2"};
}

Outcome integration_by_parts()
{
    Grid g(1, 256);
    std::mt19937_64 rng(101);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        auto mu = oracle::random_density(g, 4, rng, 0.6);
        auto fp = oracle::random_trig(1, 5, rng);
        auto f = fp.sample(g);
        VectorGridField A(g);
        A.comp[0] = oracle::random_trig(1, 5, rng).sample(g).values;
        double lhs = inner_mu(fp.sample_gradient(g), A, mu) +
                     integrate_weighted((f * divergence_mu(A, mu)).values, mu.values, g.cell_volume());
        worst = std::max(worst, std::abs(lhs) / (l2mu(f, mu) * std::sqrt(norm2_mu(A, mu))));
    }
    return {worst <= 1e-7, "worst normalized residual " + num(worst) + " over 50 triples (limit 1e-7)"};
}

Outcome projection()
{
    std::mt19937_64 rng(103);
    double idem = 0.0, adj = 0.0, fix = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        Grid g = trial % 2 ? Grid(2, 48) : Grid(1, 128);
        auto mu = oracle::random_density(g, 3, rng);
        auto u = random_field(g, rng), v = random_field(g, rng);
        auto pu = project_tangent(u, mu), pv = project_tangent(v, mu);
        double nu = std::sqrt(norm2_mu(u, mu)), nv = std::sqrt(norm2_mu(v, mu));
        idem = std::max(idem, field_dist(project_tangent(pu, mu).vectors, pu.vectors, mu) / nu);
        adj = std::max(adj, std::abs(inner_mu(pu.vectors, v, mu) - inner_mu(u, pv.vectors, mu)) / (nu * nv));
        auto gp = oracle::random_trig(g.dim, 4, rng).sample_gradient(g);
        fix = std::max(fix, field_dist(project_tangent(gp, mu).vectors, gp, mu) / std::sqrt(norm2_mu(gp, mu)));
    }
    bool ok = idem <= 1e-8 && adj <= 1e-8 && fix <= 1e-8;
    return {ok, "idempotence " + num(idem) + ", self-adjointness " + num(adj) + ", gradients fixed " + num(fix) +
                    " (limit 1e-8 each)"};
}

Outcome euler_scheme()
{
    auto mu = skewed_cloud(512);
    auto Z = interaction_field(0.5);
    std::vector<MeasureCurve> curves;
    for (int n = 4; n <= 9; ++n) curves.push_back(mckean_vlasov_flow(Z, mu, n));
    const MeasureCurve& c = curves[2];

    int modulus = 0;
    for (std::size_t s = 0; s < c.size(); ++s)
        for (std::size_t t = s + 1; t < c.size(); ++t)
            if (w2_distance(c.states[s], c.states[t]) > 2.0 * c.C1 * (c.times[t] - c.times[s])) ++modulus;

    std::mt19937_64 rng(107);
    int lipschitz = 0;
    for (int k = 0; k < 1000; ++k) {
        Coords x{oracle::uniform01(rng), 0.0}, y{oracle::uniform01(rng), 0.0};
        double t = c.times[1 + static_cast<std::size_t>(oracle::uniform01(rng) * double(c.size() - 1))];
        double d0 = std::sqrt(dist2_coords(1, x, y));
        double d1 = std::sqrt(dist2_coords(1, c.flow->map(x, 0.0, t), c.flow->map(y, 0.0, t)));
        if (d1 > std::exp(*c.C2 * t) * d0 + 1e-6) ++lipschitz;
    }

    std::vector<double> gaps;
    for (std::size_t k = 0; k + 1 < curves.size(); ++k) gaps.push_back(sup_w2(curves[k], curves[k + 1]));
    double rmin = 1e300, rmax = 0.0;
    std::string ratios;
    for (std::size_t k = 0; k + 1 < gaps.size(); ++k) {
        double r = gaps[k + 1] / gaps[k];
        rmin = std::min(rmin, r);
        rmax = std::max(rmax, r);
        ratios += (k ? " " : "") + num(r);
    }
    bool ok = modulus == 0 && lipschitz == 0 && rmin >= 0.3 && rmax <= 0.7;
    return {ok, std::to_string(modulus) + " modulus and " + std::to_string(lipschitz) +
                    " Lipschitz violations, contraction ratios " + ratios + " (need [0.3, 0.7])"};
}

Outcome bracket_and_connection()
{
    std::mt19937_64 rng(109);
    std::vector<GridDensity> measures{uniform(Grid(1, 128)), oracle::random_density(Grid(1, 128), 3, rng),
                                      oracle::random_density(Grid(2, 32), 2, rng)};
    double anti = 0.0, pairing = 0.0, metric = 0.0;
    for (auto& mu : measures) {
        const Grid& g = mu.grid;
        for (int trial = 0; trial < 20; ++trial) {
            auto p1 = oracle::random_trig(g.dim, 3, rng), p2 = oracle::random_trig(g.dim, 3, rng);
            auto q = oracle::random_trig(g.dim, 3, rng);
            auto P1 = sample(p1, g), P2 = sample(p2, g);
            anti = std::max(anti, sup(bracket_constant_fields(P1, P2, mu).phi_tilde +
                                      bracket_constant_fields(P2, P1, mu).phi_tilde));
            double scale = 0.0;
            double rhs = hessian_pairing(p1, p2, q, mu, &scale);
            double lhs = inner_mu(covariant_derivative_constant(P1, P2, mu).vectors, q.sample_gradient(g), mu);
            pairing = std::max(pairing, std::abs(lhs - rhs) / std::max(std::abs(rhs), scale));
        }
        auto P1 = sample(oracle::random_trig(g.dim, 3, rng, 0.3), g);
        auto P2 = sample(oracle::random_trig(g.dim, 3, rng), g), P3 = sample(oracle::random_trig(g.dim, 3, rng), g);
        auto G2 = spectral::gradient(P2), G3 = spectral::gradient(P3);
        auto ip = [&](double t) { return inner_mu(G2, G3, pushforward_density_flow(mu, P1, t)); };
        auto d = [&](double e) { return (ip(e) - ip(-e)) / (2.0 * e); };
        double fd = (4.0 * d(0.5e-3) - d(1e-3)) / 3.0;
        double analytic = inner_mu(covariant_derivative_constant(P1, P2, mu).vectors, G3, mu) +
                          inner_mu(G2, covariant_derivative_constant(P1, P3, mu).vectors, mu);
        metric = std::max(metric, std::abs(fd - analytic));
    }

    Grid g1(1, 64);
    oracle::TrigPoly c, s;
    c.terms.push_back({1, 0, 1.0, 0.0});
    s.terms.push_back({1, 0, 0.0, 1.0});
    auto cs = bracket_constant_fields(sample(c, g1), sample(s, g1), uniform(g1));
    double cos_sin = std::max(sup(cs.phi_tilde), sup(cs.field.vectors));

    bool ok = anti <= 1e-10 && pairing <= 1e-7 && cos_sin <= 1e-8 && metric <= 1e-4;
    return {ok, "antisymmetry " + num(anti) + ", pairing " + num(pairing) + ", cos/sin bracket " + num(cos_sin) +
                    ", metric compatibility " + num(metric)};
}

Outcome w2_derivative()
{
    Grid g(1, 128);
    std::mt19937_64 rng(113);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        auto s = oracle::random_density(g, 3, rng), m = oracle::random_density(g, 3, rng);
        auto psi = sample(oracle::random_trig(1, 3, rng, 0.05), g);
        double analytic = w2sq_directional_derivative(s, m, psi);
        auto w = [&](double t) { return w2_exact_1d(s, pushforward_density_flow(m, psi, t)).cost; };
        const double h = 1e-4;
        double fd = (w(h) - w(-h)) / (2.0 * h);
        worst = std::max(worst, std::abs(fd - analytic) / std::abs(fd));
    }
    return {worst <= 1e-3, "worst relative gap " + num(worst) + " over 20 triples (limit 1e-3)"};
}

Outcome parallel_translation()
{
    Grid g(1, 128);
    std::mt19937_64 rng(127);
    auto mu = oracle::random_density(g, 2, rng, 0.4);
    auto psi0 = sample(oracle::random_trig(1, 3, rng), g);
    auto c = mckean_vlasov_flow(interaction_field(0.05), mu, 6);
    const GridDensity& c1 = c.densities.back();
    auto gap = [&](const PotentialField& a, const PotentialField& b) {
        return std::sqrt(norm2_mu(spectral::gradient(a - b), c1));
    };

    std::vector<TransportedField> runs;
    for (std::size_t stride : {16, 8, 4, 2, 1}) runs.push_back(parallel_transport_discrete(c, psi0, stride));
    const auto& fine = runs.back();
    double drift = 0.0;
    for (double d : norm_drift(fine)) drift = std::max(drift, std::abs(d));
    drift /= fine.norms.front();

    bool monotone = true;
    std::string cauchy;
    double prev = 0.0;
    for (std::size_t j = 0; j + 1 < runs.size(); ++j) {
        double d = gap(runs[j].fields.back(), runs[j + 1].fields.back());
        if (j && d >= prev) monotone = false;
        prev = d;
        cauchy += (j ? " " : "") + num(d);
    }

    auto ode = parallel_transport_ode(c, psi0);
    double agree = gap(ode.fields.back(), fine.fields.back()) / std::sqrt(norm2_mu(spectral::gradient(ode.fields.back()), c1));

    bool ok = c.size() == 65 && drift <= 5e-3 && monotone && agree <= 2e-3;
    return {ok, "relative norm drift " + num(drift) + " (limit 5e-3), Cauchy gaps " + cauchy +
                    (monotone ? " decreasing" : " NOT decreasing") + ", ODE vs discrete " + num(agree) + " (limit 2e-3)"};
}

Outcome oracle_equivalence()
{
    std::mt19937_64 rng(131);
    double lp_gap = 0.0, brute_gap = 0.0;
    for (int t = 0; t < 100; ++t) {
        int a = 1 + static_cast<int>(oracle::uniform01(rng) * 64), b = 1 + static_cast<int>(oracle::uniform01(rng) * 64);
        auto mu = random_atoms(rng, a, false), nu = random_atoms(rng, b, false);
        lp_gap = std::max(lp_gap, std::abs(w2_exact_1d(mu, nu).cost - w2_lp_oracle(mu, nu).cost));
    }
    // small equal-weight pairs also go through the permutation brute force
    for (int t = 0; t < 20; ++t) {
        int n = 1 + t % 7;
        auto mu = random_atoms(rng, n, true), nu = random_atoms(rng, n, true);
        std::vector<double> x, y;
        for (auto& p : mu.points) x.push_back(p[0]);
        for (auto& p : nu.points) y.push_back(p[0]);
        brute_gap = std::max(brute_gap, std::abs(w2_exact_1d(mu, nu).cost - oracle::brute_force_w2sq_1d(x, y)));
    }
    Grid g(1, 64);
    double sk_gap = 0.0;
    for (int t = 0; t < 3; ++t) {
        auto mu = oracle::random_density(g, 3, rng, 0.8), nu = oracle::random_density(g, 3, rng, 0.8);
        sk_gap = std::max(sk_gap, std::abs(sinkhorn(mu, nu, 5e-4).cost - w2_lp_oracle(mu, nu).cost));
    }
    bool ok = lp_gap <= 1e-8 && brute_gap <= 1e-8 && sk_gap <= 5e-3;
    return {ok, "exact1d vs LP " + num(lp_gap) + ", exact1d vs brute force " + num(brute_gap) + " (limit 1e-8), Sinkhorn vs LP " +
                    num(sk_gap) + " (limit 5e-3)"};
}

Outcome determinism()
{
    fs::path root = fs::temp_directory_path() / "ottolab_acceptance_determinism";
    fs::remove_all(root);
    int compared = 0;
    std::string differing;
    for (const auto& s : scenario_names()) {
        auto cfg = parse_config("{\"scenario\": \"" + s + "\", \"seed\": 2024}");
        fs::path a = root / (s + "_a"), b = root / (s + "_b");
        run_scenario(cfg, a);
        run_scenario(cfg, b);
        for (const auto& entry : fs::directory_iterator(a)) {
            fs::path other = b / entry.path().filename();
            ++compared;
            if (!fs::exists(other) || io::read_file(entry.path()) != io::read_file(other))
                differing += " " + s + "/" + entry.path().filename().string();
        }
        std::size_t na = std::distance(fs::directory_iterator(a), fs::directory_iterator{});
        std::size_t nb = std::distance(fs::directory_iterator(b), fs::directory_iterator{});
        if (na != nb) differing += " " + s + "/(file count)";
    }
    fs::remove_all(root);
    return {differing.empty(), std::to_string(compared) + " files over " + std::to_string(scenario_names().size()) +
                                   " scenarios" + (differing.empty() ? " byte-identical" : ", differing:" + differing)};
}

} // namespace

int main()
{
    criterion(1, "constant-speed geodesics", 10.0, geodesics);
    criterion(2, "integration by parts", 5.0, integration_by_parts);
    criterion(3, "tangent projection", 0.0, projection);
    criterion(4, "Euler and McKean-Vlasov scheme", 60.0, euler_scheme);
    criterion(5, "bracket and connection", 0.0, bracket_and_connection);
    criterion(6, "squared-distance derivative", 30.0, w2_derivative);
    criterion(7, "parallel translation", 120.0, parallel_translation);
    criterion(8, "transport oracle equivalence", 0.0, oracle_equivalence);
    criterion(9, "determinism", 0.0, determinism);
    std::printf("%d of 9 criteria passed\n", 9 - failures);
    return failures ? 1 : 0;
}
