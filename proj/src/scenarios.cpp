#include "ottolab/scenarios.hpp"

#include "ottolab/calculus.hpp"
#include "ottolab/connection.hpp"
#include "ottolab/flows.hpp"
#include "ottolab/parallel.hpp"
#include "ottolab/random.hpp"
#include "ottolab/spectral.hpp"
#include "ottolab/torus.hpp"
#include "ottolab/transport.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

namespace ottolab {

namespace {

namespace fs = std::filesystem;
using json = io::json;

constexpr double two_pi = 2.0 * std::numbers::pi;
constexpr double nan = std::numeric_limits<double>::quiet_NaN();

class Run {
public:
    Run(const ScenarioConfig& cfg, fs::path dir) : cfg(cfg), dir(std::move(dir)), rng(cfg.seed)
    {
        config["scenario"] = cfg.scenario;
        config["dimension"] = cfg.dimension;
        config["seed"] = cfg.seed;
    }

    const ScenarioConfig& cfg;
    fs::path dir;
    Rng rng;
    json config;
    json quantities = json::object();
    std::vector<Check> checks;
    std::vector<std::string> files;

    int param(const char* name, const std::optional<int>& v, int def)
    {
        int x = v.value_or(def);
        config[name] = x;
        return x;
    }

    double param(const char* name, const std::optional<double>& v, double def)
    {
        double x = v.value_or(def);
        config[name] = x;
        return x;
    }

    MeasureSpec measure(const char* role, const std::optional<MeasureSpec>& s, const MeasureSpec& def)
    {
        MeasureSpec m = s.value_or(def);
        config["measures"][role] = spec_json(m, cfg.dimension);
        return m;
    }

    void check(const std::string& name, const std::string& op, double value, double def, const std::string& rel = "<=")
    {
        Check c;
        c.name = name;
        c.operation = op;
        c.value = value;
        auto it = cfg.tolerances.find(name);
        c.threshold = it != cfg.tolerances.end() ? it->second : def;
        c.relation = rel;
        if (rel == "<=") c.passed = value <= c.threshold;
        else if (rel == ">=") c.passed = value >= c.threshold;
        else c.passed = value < c.threshold;
        checks.push_back(c);
    }

    void write(const std::string& name, const std::string& content)
    {
        io::write_atomic(dir / name, content);
        files.push_back(name);
    }

    void adopt(const json& exported, const std::string& stem, const char* list)
    {
        files.push_back(stem + ".json");
        for (auto& f : exported[list]) files.push_back(f.get<std::string>());
    }
};

double sup_abs(const GridFunction& f)
{
    double s = 0.0;
    for (double v : f.values) s = std::max(s, std::abs(v));
    return s;
}

double sup_abs(const VectorGridField& u)
{
    double s = 0.0;
    for (int a = 0; a < u.grid.dim; ++a)
        for (double v : u.comp[a]) s = std::max(s, std::abs(v));
    return s;
}

double dist_mu(const VectorGridField& a, const VectorGridField& b, const GridDensity& mu)
{
    return std::sqrt(norm2_mu(a - b, mu));
}

GridDensity uniform_density(const Grid& g) { return GridDensity(g, std::vector<double>(g.size(), 1.0)); }

MeasureSpec bump(Coords c, double w)
{
    MeasureSpec s;
    s.preset = "bump";
    s.center = c;
    s.width = w;
    return s;
}

MeasureSpec tilt(double a, double phase = 0.0)
{
    MeasureSpec s;
    s.preset = "cosine-tilt";
    s.amplitude = a;
    s.phase = phase;
    return s;
}

VectorGridField random_vector_field(const Grid& g, int kmax, Rng& rng)
{
    VectorGridField u(g);
    for (int a = 0; a < g.dim; ++a) u.comp[a] = random_potential(g, kmax, rng).values;
    return u;
}

// int Hess p2 (grad p1, grad q) dmu with spectral derivatives
double hessian_pairing(const PotentialField& p1, const PotentialField& p2, const PotentialField& q, const GridDensity& mu,
                       double* scale)
{
    const Grid& g = mu.grid;
    auto H = spectral::hessian(p2);
    auto a = spectral::gradient(p1), b = spectral::gradient(q);
    double s = 0.0, hs = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        double v = 0.0, hn = 0.0;
        for (int r = 0; r < g.dim; ++r)
            for (int c = 0; c < g.dim; ++c) {
                v += H[r][c].values[i] * a.comp[r][i] * b.comp[c][i];
                hn += std::abs(H[r][c].values[i]);
            }
        s += v * mu.values[i];
        hs = std::max(hs, hn);
    }
    if (scale) *scale = hs * std::sqrt(norm2_mu(a, mu) * norm2_mu(b, mu));
    return s * g.cell_volume();
}

std::string numbered(const std::string& stem, std::size_t k)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "_%04zu.csv", k);
    return stem + buf;
}

void run_geodesic(Run& r)
{
    const int dim = r.cfg.dimension;
    const int N = r.param("grid", r.cfg.grid, dim == 1 ? 128 : 8);
    const int steps = r.param("steps", r.cfg.steps, 4);
    Grid g(dim, N);
    auto s0 = r.measure("source", r.cfg.source, dim == 1 ? bump({0.25, 0.0}, 0.03) : bump({0.3, 0.3}, 0.08));
    auto s1 = r.measure("target", r.cfg.target, dim == 1 ? bump({0.45, 0.0}, 0.03) : bump({0.6, 0.5}, 0.08));
    auto mu = build_measure(s0, g), nu = build_measure(s1, g);

    TransportPlan plan = dim == 1 ? w2_exact_1d(mu, nu) : 2 * g.size() <= 512 ? w2_lp_oracle(mu, nu) : sinkhorn(mu, nu, 1e-3);
    io::export_plan(r.dir, "plan", plan);
    r.files.push_back("plan.csv");
    r.files.push_back("plan.json");

    std::vector<Measure> path;
    std::vector<double> ts;
    for (int k = 0; k <= steps; ++k) {
        ts.push_back(static_cast<double>(k) / steps);
        path.push_back(geodesic_interpolate(plan, ts.back()));
        r.write(numbered("geodesic", static_cast<std::size_t>(k)), io::measure_csv(path.back()));
    }
    double w = w2_distance(path.front(), path.back());
    double dev = 0.0;
    std::vector<std::vector<double>> rows;
    for (std::size_t s = 0; s < ts.size(); ++s)
        for (std::size_t t = 0; t < ts.size(); ++t) {
            double d = s == t ? 0.0 : w2_distance(path[s], path[t]);
            double expect = std::abs(ts[t] - ts[s]) * w;
            double rel = std::abs(d - expect) / w;
            dev = std::max(dev, rel);
            rows.push_back({ts[s], ts[t], d, expect, rel});
        }
    r.write("geodesic_table.csv", io::table_csv({"s", "t", "w2", "expected", "relative_deviation"}, rows));
    r.quantities["plan_method"] = std::string(to_string(plan.method));
    r.quantities["w2"] = w;
    r.quantities["max_relative_deviation"] = dev;
    r.check("constant_speed", "geodesic_interpolate", dev, 0.02);
}

void run_flow(Run& r)
{
    const int dim = r.cfg.dimension;
    const int N = r.param("grid", r.cfg.grid, dim == 1 ? 128 : 16);
    const int steps = r.param("steps", r.cfg.steps, dim == 1 ? 100 : 200);
    const double amp = r.param("amplitude", r.cfg.amplitude, 0.05);
    Grid g(dim, N);
    auto mu = build_measure(r.measure("source", r.cfg.source, tilt(0.3)), g);
    auto psi = random_potential(g, 3, r.rng, amp);
    r.write("velocity_potential.csv", io::function_csv(psi));

    // node quadrature of the preset; a density track would re-differentiate log rho every step
    auto c = constant_field_flow(psi, density_to_particles(mu), steps);
    r.adopt(io::export_curve(r.dir, "curve", c), "curve", "states");
    double residual = continuity_residual(c, eigenbasis(dim, 1)[0].sample(g));

    // every pair in 1D; steps from the start and consecutive steps in 2D
    int pairs = 0, violations = 0;
    double worst_ratio = 0.0;
    auto test_pair = [&](std::size_t s, std::size_t t) {
        double d = w2_distance(c.states[s], c.states[t]);
        double bound = 2.0 * c.C1 * (c.times[t] - c.times[s]);
        ++pairs;
        if (d > bound) ++violations;
        worst_ratio = std::max(worst_ratio, d / bound);
    };
    for (std::size_t s = 0; s < c.size(); ++s)
        for (std::size_t t = s + 1; t < c.size(); ++t)
            if (dim == 1 || s == 0 || t == s + 1) test_pair(s, t);

    double mass = 0.0;
    for (auto& s : c.states) {
        auto& p = std::get<ParticleCloud>(s);
        double m = 0.0;
        for (double w : p.weights) m += w;
        mass = std::max(mass, std::abs(m - 1.0));
    }
    for (auto& d : c.densities) mass = std::max(mass, std::abs(d.mass() - 1.0));

    r.quantities["C1"] = c.C1;
    r.quantities["continuity_residual"] = residual;
    r.quantities["modulus_pairs"] = pairs;
    r.quantities["modulus_violations"] = violations;
    r.quantities["max_modulus_ratio"] = worst_ratio;
    r.quantities["mass_drift"] = mass;
    r.check("continuity_residual", "continuity_residual", residual, 1e-4);
    r.check("modulus_violations", "constant_field_flow", violations, 0.0);
    r.check("mass_drift", "constant_field_flow", mass, 1e-12);
}

double sup_w2(const MeasureCurve& coarse, const MeasureCurve& fine)
{
    double s = 0.0;
    std::size_t ratio = (fine.size() - 1) / (coarse.size() - 1);
    for (std::size_t k = 0; k < coarse.size(); ++k) s = std::max(s, w2_distance(coarse.states[k], fine.states[k * ratio]));
    return s;
}

void run_mckean_vlasov(Run& r)
{
    const int count = r.param("particles", r.cfg.particles, 512);
    const int n = r.param("n", r.cfg.n, 6);
    const int trials = r.param("trials", r.cfg.trials, 1000);
    const double kappa = r.param("kappa", r.cfg.kappa, 0.5);
    auto spec = r.measure("source", r.cfg.source, tilt(0.6, 0.3));
    auto cloud = quantile_cloud(build_measure(spec, Grid(1, 4096)), count);
    auto Z = interaction_field(kappa);

    const int lo = 4, hi = std::max(n, lo) + 3;
    std::vector<MeasureCurve> curves;
    for (int level = lo; level <= hi; ++level) curves.push_back(mckean_vlasov_flow(Z, cloud, level));
    MeasureCurve c = n >= lo ? curves[static_cast<std::size_t>(n - lo)] : mckean_vlasov_flow(Z, cloud, n);
    json cm = io::export_curve(r.dir, "curve", c);
    r.adopt(cm, "curve", "states");

    int modulus = 0;
    for (std::size_t s = 0; s < c.size(); ++s)
        for (std::size_t t = s + 1; t < c.size(); ++t)
            if (w2_distance(c.states[s], c.states[t]) > 2.0 * c.C1 * (c.times[t] - c.times[s])) ++modulus;

    int lipschitz = 0;
    double worst_slack = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < trials; ++k) {
        Coords x{r.rng.uniform(), 0.0}, y{r.rng.uniform(), 0.0};
        double t = c.times[1 + r.rng.index(c.size() - 1)];
        double d0 = std::sqrt(dist2_coords(1, x, y));
        double d1 = std::sqrt(dist2_coords(1, c.flow->map(x, 0.0, t), c.flow->map(y, 0.0, t)));
        double slack = d1 - std::exp(*c.C2 * t) * d0;
        worst_slack = std::max(worst_slack, slack);
        if (slack > 1e-6) ++lipschitz;
    }

    std::vector<double> gaps, ratios;
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k + 1 < curves.size(); ++k) {
        gaps.push_back(sup_w2(curves[k], curves[k + 1]));
        double ratio = k ? gaps[k] / gaps[k - 1] : nan;
        if (k) ratios.push_back(ratio);
        rows.push_back({static_cast<double>(lo + static_cast<int>(k)), gaps[k], ratio});
    }
    r.write("self_convergence.csv", io::table_csv({"n", "sup_w2_n_vs_n_plus_1", "ratio"}, rows));

    r.quantities["C1"] = c.C1;
    r.quantities["C2"] = *c.C2;
    r.quantities["modulus_violations"] = modulus;
    r.quantities["lipschitz_pairs"] = trials;
    r.quantities["lipschitz_violations"] = lipschitz;
    r.quantities["lipschitz_worst_slack"] = worst_slack;
    r.quantities["self_convergence_levels"] = json::array({lo, hi});
    r.quantities["sup_w2"] = gaps;
    r.quantities["contraction_ratios"] = ratios;
    r.quantities["residuals"] = c.residuals;
    r.check("modulus_violations", "mckean_vlasov_flow", modulus, 0.0);
    r.check("lipschitz_violations", "mckean_vlasov_flow", lipschitz, 0.0);
    r.check("self_convergence_min", "mckean_vlasov_flow", *std::min_element(ratios.begin(), ratios.end()), 0.3, ">=");
    r.check("self_convergence_max", "mckean_vlasov_flow", *std::max_element(ratios.begin(), ratios.end()), 0.7);
}

void run_bracket(Run& r)
{
    const int dim = r.cfg.dimension;
    const int N = r.param("grid", r.cfg.grid, dim == 1 ? 128 : 32);
    const int trials = r.param("trials", r.cfg.trials, 20);
    const double eps = r.param("epsilon", r.cfg.epsilon, 1e-3);
    Grid g(dim, N);
    auto spec = r.measure("source", r.cfg.source, tilt(0.5));
    std::vector<GridDensity> measures{uniform_density(g), build_measure(spec, g), random_density(g, 3, r.rng)};

    double antisym = 0.0, pairing = 0.0, torsion = 0.0, metric = 0.0;
    std::vector<std::vector<double>> rows;
    for (std::size_t m = 0; m < measures.size(); ++m) {
        const auto& mu = measures[m];
        for (int t = 0; t < trials; ++t) {
            auto p1 = random_potential(g, 3, r.rng), p2 = random_potential(g, 3, r.rng), q = random_potential(g, 3, r.rng);
            auto b12 = bracket_constant_fields(p1, p2, mu), b21 = bracket_constant_fields(p2, p1, mu);
            double a = sup_abs(b12.phi_tilde + b21.phi_tilde);
            auto c12 = covariant_derivative_constant(p1, p2, mu), c21 = covariant_derivative_constant(p2, p1, mu);
            double scale = 0.0;
            double rhs = hessian_pairing(p1, p2, q, mu, &scale);
            double lhs = inner_mu(c12.vectors, spectral::gradient(q), mu);
            double rel = std::abs(lhs - rhs) / std::max(std::abs(rhs), scale);
            double tor = std::sqrt(norm2_mu(c12.vectors - c21.vectors + b12.field.vectors, mu));
            antisym = std::max(antisym, a);
            pairing = std::max(pairing, rel);
            torsion = std::max(torsion, tor);
            rows.push_back({static_cast<double>(m), static_cast<double>(t), a, rel, tor});
            if (m == 1 && t == 0) r.write("bracket_phi_tilde.csv", io::function_csv(b12.phi_tilde));
        }

        // d/dt <grad P2, grad P3>_{c_t} against the two covariant derivatives
        auto P1 = random_potential(g, 3, r.rng, 0.3), P2 = random_potential(g, 3, r.rng), P3 = random_potential(g, 3, r.rng);
        auto G2 = spectral::gradient(P2), G3 = spectral::gradient(P3);
        auto ip = [&](double t) { return inner_mu(G2, G3, pushforward_density_flow(mu, P1, t)); };
        auto d = [&](double e) { return (ip(e) - ip(-e)) / (2.0 * e); };
        double fd = (4.0 * d(0.5 * eps) - d(eps)) / 3.0;
        double analytic = inner_mu(covariant_derivative_constant(P1, P2, mu).vectors, G3, mu) +
                          inner_mu(G2, covariant_derivative_constant(P1, P3, mu).vectors, mu);
        metric = std::max(metric, std::abs(fd - analytic));
    }
    r.write("bracket_trials.csv", io::table_csv({"measure", "trial", "antisymmetry", "pairing_relative", "torsion"}, rows));

    // cos and sin at the uniform measure on the circle
    Grid g1(1, 64);
    auto c = PotentialField(sample(g1, [](const Coords& x) { return std::cos(two_pi * x[0]); }));
    auto s = PotentialField(sample(g1, [](const Coords& x) { return std::sin(two_pi * x[0]); }));
    auto cs = bracket_constant_fields(c, s, uniform_density(g1));
    double cos_sin = std::max(sup_abs(cs.phi_tilde), sup_abs(cs.field.vectors));

    r.quantities["measures"] = json::array({"uniform", "source", "random"});
    r.quantities["antisymmetry"] = antisym;
    r.quantities["pairing_identity"] = pairing;
    r.quantities["torsion"] = torsion;
    r.quantities["metric_compatibility"] = metric;
    r.quantities["cos_sin_bracket"] = cos_sin;
    r.check("antisymmetry", "bracket_constant_fields", antisym, 1e-10);
    r.check("pairing_identity", "covariant_derivative_constant", pairing, 1e-7);
    r.check("cos_sin_bracket", "bracket_constant_fields", cos_sin, 1e-8);
    r.check("torsion", "covariant_derivative_constant", torsion, 1e-8);
    r.check("metric_compatibility", "covariant_derivative_constant", metric, 1e-4);
}

void run_covderiv(Run& r)
{
    const int dim = r.cfg.dimension;
    const int N = r.param("grid", r.cfg.grid, dim == 1 ? 128 : 32);
    const double kappa = r.param("kappa", r.cfg.kappa, 0.5);
    const double amp = r.param("amplitude", r.cfg.amplitude, 0.3);
    CovariantOptions opt;
    opt.epsilon = r.param("epsilon", r.cfg.epsilon, 1e-4);
    Grid g(dim, N);
    auto mu = build_measure(r.measure("source", r.cfg.source, tilt(0.4, 0.1)), g);
    auto psi = random_potential(g, 3, r.rng, amp);

    auto P2 = random_potential(g, 3, r.rng);
    auto gen = covariant_derivative_general(constant_field(P2), psi, mu, opt);
    double reduction = sup_abs(gen.field.vectors - covariant_derivative_constant(psi, P2, mu).vectors);

    auto f = random_potential(g, 2, r.rng);
    auto P3 = random_potential(g, 3, r.rng);
    auto prod = covariant_derivative_general(moment_weighted_field({f}, {P3}), psi, mu, opt);
    double dF = inner_mu(spectral::gradient(f), spectral::gradient(psi), mu);
    auto expect = dF * spectral::gradient(P3) + moments(mu, f) * covariant_derivative_constant(psi, P3, mu).vectors;
    double product = sup_abs(prod.field.vectors - expect);

    // the interaction potential is sum_a C_a cos(2 pi x_a) + S_a sin(2 pi x_a) with moment weights
    auto inter = covariant_derivative_general(interaction_field(kappa), psi, mu, opt);
    VectorGridField iexp(g);
    for (int a = 0; a < dim; ++a)
        for (int par = 0; par < 2; ++par) {
            GridFunction e = sample(g, [&](const Coords& x) {
                return par == 0 ? std::cos(two_pi * x[a]) : std::sin(two_pi * x[a]);
            });
            PotentialField ke(kappa * e);
            double dE = inner_mu(spectral::gradient(e), spectral::gradient(psi), mu);
            iexp = iexp + dE * spectral::gradient(ke) + moments(mu, e) * covariant_derivative_constant(psi, ke, mu).vectors;
        }
    double interaction = sup_abs(inter.field.vectors - iexp);
    r.write("covariant_derivative_potential.csv", io::function_csv(*inter.field.potential));
    r.write("direction_potential.csv", io::function_csv(psi));

    r.quantities["constant_reduction"] = reduction;
    r.quantities["product_rule"] = product;
    r.quantities["interaction_field"] = interaction;
    r.quantities["richardson_gaps"] = json::array({gen.richardson_gap, prod.richardson_gap, inter.richardson_gap});
    r.quantities["tail_energies"] =
        json::array({gen.coefficients.tail_energy, prod.coefficients.tail_energy, inter.coefficients.tail_energy});
    r.check("constant_reduction", "covariant_derivative_general", reduction, 1e-6);
    r.check("product_rule", "covariant_derivative_general", product, 1e-5);
    r.check("interaction_field", "covariant_derivative_general", interaction, 1e-5);
}

void run_w2deriv(Run& r)
{
    const int N = r.param("grid", r.cfg.grid, 128);
    const int trials = r.param("trials", r.cfg.trials, 20);
    const double amp = r.param("amplitude", r.cfg.amplitude, 0.05);
    const double h = r.param("epsilon", r.cfg.epsilon, 1e-4);
    Grid g(1, N);

    auto sigma0 = random_density(g, 3, r.rng);
    double self = std::abs(w2sq_directional_derivative(sigma0, sigma0, random_potential(g, 3, r.rng, amp)));

    double worst = 0.0, worst_pair = 0.0, descent = 0.0;
    std::vector<std::vector<double>> rows;
    for (int t = 0; t < trials; ++t) {
        auto s = random_density(g, 3, r.rng), m = random_density(g, 3, r.rng);
        auto psi = random_potential(g, 3, r.rng, amp);
        double analytic = w2sq_directional_derivative(s, m, psi);
        auto w = [&](double e) {
            double d = w2_distance(s, pushforward_density_flow(m, psi, e));
            return d * d;
        };
        double fd = (w(h) - w(-h)) / (2.0 * h);
        double rel = std::abs(fd - analytic) / std::abs(fd);
        auto gr = w2sq_gradient(s, m);
        double pairing = inner_mu(gr.field.vectors, spectral::gradient(psi), m);
        double prel = std::abs(pairing - analytic) / std::abs(analytic);
        worst = std::max(worst, rel);
        worst_pair = std::max(worst_pair, prel);
        if (t == 0) descent = w2sq_directional_derivative(s, m, gr.phi_tilde);
        rows.push_back({static_cast<double>(t), analytic, fd, rel, pairing, prel});
    }
    r.write("w2deriv_trials.csv", io::table_csv({"trial", "analytic", "finite_difference", "relative", "gradient_pairing",
                                                  "pairing_relative"},
                                                 rows));
    r.quantities["self_derivative"] = self;
    r.quantities["max_relative_gap"] = worst;
    r.quantities["max_pairing_gap"] = worst_pair;
    r.quantities["descent_derivative"] = descent;
    r.check("directional_derivative", "w2sq_directional_derivative", worst, 1e-3);
    r.check("self_derivative", "w2sq_directional_derivative", self, 1e-12);
    r.check("descent", "w2sq_gradient", descent, 0.0, "<");
    r.check("gradient_pairing", "w2sq_gradient", worst_pair, 1e-3);
}

void run_parallel(Run& r)
{
    const int N = r.param("grid", r.cfg.grid, 128);
    const int n = r.param("n", r.cfg.n, 6);
    const double kappa = r.param("kappa", r.cfg.kappa, 0.05);
    Grid g(1, N);
    GridDensity mu;
    if (r.cfg.source) mu = build_measure(r.measure("source", r.cfg.source, MeasureSpec{}), g);
    else {
        r.config["measures"]["source"] = "random";
        mu = random_density(g, 2, r.rng, 0.4);
    }
    auto psi0 = random_potential(g, 3, r.rng);
    auto c = mckean_vlasov_flow(interaction_field(kappa), mu, n);
    r.adopt(io::export_curve(r.dir, "curve", c), "curve", "states");
    const GridDensity& c1 = c.densities.back();

    std::vector<TransportedField> runs;
    std::vector<double> strides;
    for (int j = std::min(4, n); j >= 0; --j) {
        strides.push_back(std::ldexp(1.0, j));
        runs.push_back(parallel_transport_discrete(c, psi0, std::size_t(1) << j));
    }
    auto& fine = runs.back();
    r.adopt(io::export_transport(r.dir, "transport_discrete", fine), "transport_discrete", "potentials");

    double contract = 0.0;
    for (std::size_t k = 0; k < fine.pre_projection.size(); ++k)
        contract = std::max(contract, fine.norms[k + 1] / fine.pre_projection[k]);
    double drift = 0.0;
    for (double d : norm_drift(fine)) drift = std::max(drift, std::abs(d));
    drift /= fine.norms.front();

    auto gap = [&](const PotentialField& a, const PotentialField& b) {
        return std::sqrt(norm2_mu(spectral::gradient(a - b), c1));
    };
    std::vector<double> cauchy;
    double worst_ratio = 0.0;
    std::vector<std::vector<double>> rows;
    for (std::size_t j = 0; j + 1 < runs.size(); ++j) {
        cauchy.push_back(gap(runs[j].fields.back(), runs[j + 1].fields.back()));
        if (j) worst_ratio = std::max(worst_ratio, cauchy[j] / cauchy[j - 1]);
        rows.push_back({strides[j], strides[j + 1], cauchy[j]});
    }
    r.write("cauchy.csv", io::table_csv({"stride", "next_stride", "gap"}, rows));

    auto ode = parallel_transport_ode(c, psi0);
    r.adopt(io::export_transport(r.dir, "transport_ode", ode), "transport_ode", "potentials");
    double agree = gap(ode.fields.back(), fine.fields.back()) / std::sqrt(norm2_mu(spectral::gradient(ode.fields.back()), c1));

    r.quantities["nodes"] = c.size();
    r.quantities["relative_norm_drift"] = drift;
    r.quantities["max_contraction"] = contract;
    r.quantities["strides"] = strides;
    r.quantities["cauchy_gaps"] = cauchy;
    r.quantities["worst_cauchy_ratio"] = worst_ratio;
    r.quantities["ode_discrete_relative_gap"] = agree;
    r.check("contractivity", "parallel_transport_discrete", contract, 1.0 + 1e-10);
    r.check("norm_drift", "norm_drift", drift, 5e-3);
    r.check("cauchy_monotone", "parallel_transport_discrete", worst_ratio, 1.0, "<");
    r.check("scheme_agreement", "parallel_transport_ode", agree, 2e-3);
}

ParticleCloud random_atoms(Rng& rng, int count)
{
    std::vector<Coords> p(static_cast<std::size_t>(count));
    std::vector<double> w(p.size());
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = {rng.uniform(), 0.0};
        w[i] = 0.1 + rng.uniform();
        s += w[i];
    }
    for (double& x : w) x /= s;
    return ParticleCloud(1, std::move(p), std::move(w));
}

void run_invariants(Run& r)
{
    const int dim = r.cfg.dimension;
    const int N = r.param("grid", r.cfg.grid, dim == 1 ? 256 : 64);
    const int trials = r.param("trials", r.cfg.trials, 50);
    Grid g(dim, N);

    double ibp = 0.0;
    std::vector<std::vector<double>> ibp_rows;
    for (int t = 0; t < trials; ++t) {
        auto mu = random_density(g, 4, r.rng, 0.6);
        auto f = random_potential(g, 5, r.rng);
        auto A = random_vector_field(g, 5, r.rng);
        double lhs = inner_mu(spectral::gradient(f), A, mu) +
                     integrate_weighted((f * divergence_mu(A, mu)).values, mu.values, g.cell_volume());
        double fn = std::sqrt(integrate_weighted((f * f).values, mu.values, g.cell_volume()));
        double res = std::abs(lhs) / (fn * std::sqrt(norm2_mu(A, mu)));
        ibp = std::max(ibp, res);
        ibp_rows.push_back({static_cast<double>(t), res});
    }
    r.write("integration_by_parts.csv", io::table_csv({"trial", "normalized_residual"}, ibp_rows));

    double idem = 0.0, adj = 0.0, fix = 0.0, anti = 0.0;
    std::vector<std::vector<double>> proj_rows;
    for (int t = 0; t < 20; ++t) {
        auto mu = random_density(g, 3, r.rng);
        auto u = random_vector_field(g, 4, r.rng), v = random_vector_field(g, 4, r.rng);
        auto pu = project_tangent(u, mu), pv = project_tangent(v, mu);
        double nu = std::sqrt(norm2_mu(u, mu)), nv = std::sqrt(norm2_mu(v, mu));
        double i1 = dist_mu(project_tangent(pu, mu).vectors, pu.vectors, mu) / nu;
        double a1 = std::abs(inner_mu(pu.vectors, v, mu) - inner_mu(u, pv.vectors, mu)) / (nu * nv);
        auto gp = spectral::gradient(random_potential(g, 4, r.rng));
        double f1 = dist_mu(project_tangent(gp, mu).vectors, gp, mu) / std::sqrt(norm2_mu(gp, mu));
        auto p1 = random_potential(g, 3, r.rng), p2 = random_potential(g, 3, r.rng);
        double b1 = sup_abs(bracket_constant_fields(p1, p2, mu).phi_tilde + bracket_constant_fields(p2, p1, mu).phi_tilde);
        idem = std::max(idem, i1);
        adj = std::max(adj, a1);
        fix = std::max(fix, f1);
        anti = std::max(anti, b1);
        proj_rows.push_back({static_cast<double>(t), i1, a1, f1, b1});
    }
    r.write("projection.csv",
            io::table_csv({"trial", "idempotence", "self_adjointness", "fixes_gradients", "bracket_antisymmetry"}, proj_rows));

    double lp_gap = 0.0, sk_gap = 0.0;
    std::vector<std::vector<double>> ot_rows;
    for (int t = 0; t < 100; ++t) {
        int a = 1 + static_cast<int>(r.rng.index(64)), b = 1 + static_cast<int>(r.rng.index(64));
        auto mu = random_atoms(r.rng, a), nu = random_atoms(r.rng, b);
        double e = w2_exact_1d(mu, nu).cost, l = w2_lp_oracle(mu, nu).cost;
        lp_gap = std::max(lp_gap, std::abs(e - l));
        ot_rows.push_back({0.0, static_cast<double>(t), e, l});
    }
    Grid g64(1, 64);
    for (int t = 0; t < 3; ++t) {
        auto mu = random_density(g64, 3, r.rng, 0.8), nu = random_density(g64, 3, r.rng, 0.8);
        double s = sinkhorn(mu, nu, 5e-4).cost, l = w2_lp_oracle(mu, nu).cost;
        sk_gap = std::max(sk_gap, std::abs(s - l));
        ot_rows.push_back({1.0, static_cast<double>(t), s, l});
    }
    r.write("transport_oracles.csv", io::table_csv({"family", "trial", "cost", "lp_cost"}, ot_rows));

    r.quantities["integration_by_parts"] = ibp;
    r.quantities["projection_idempotence"] = idem;
    r.quantities["projection_self_adjoint"] = adj;
    r.quantities["projection_fixes_gradients"] = fix;
    r.quantities["bracket_antisymmetry"] = anti;
    r.quantities["exact1d_vs_lp"] = lp_gap;
    r.quantities["sinkhorn_vs_lp"] = sk_gap;
    r.check("integration_by_parts", "divergence_mu", ibp, 1e-7);
    r.check("projection_idempotence", "project_tangent", idem, 1e-8);
    r.check("projection_self_adjoint", "project_tangent", adj, 1e-8);
    r.check("projection_fixes_gradients", "project_tangent", fix, 1e-8);
    r.check("bracket_antisymmetry", "bracket_constant_fields", anti, 1e-10);
    r.check("exact1d_vs_lp", "w2_exact_1d", lp_gap, 1e-8);
    r.check("sinkhorn_vs_lp", "sinkhorn", sk_gap, 5e-3);
}

json check_json(const Check& c)
{
    json j;
    j["name"] = c.name;
    j["operation"] = c.operation;
    j["value"] = c.value;
    j["threshold"] = c.threshold;
    j["relation"] = c.relation;
    j["passed"] = c.passed;
    return j;
}

} // namespace

RunResult run_scenario(const ScenarioConfig& cfg, const fs::path& out_dir)
{
    const auto& names = scenario_names();
    require(std::find(names.begin(), names.end(), cfg.scenario) != names.end(), ErrorKind::invalid_argument,
            "unknown scenario '" + cfg.scenario + "'");
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    require(!ec && fs::is_directory(out_dir), ErrorKind::invalid_argument, "cannot create output directory " + out_dir.string());

    Run r(cfg, out_dir);
    const std::string& s = cfg.scenario;
    if (s == "geodesic") run_geodesic(r);
    else if (s == "flow") run_flow(r);
    else if (s == "mckean-vlasov") run_mckean_vlasov(r);
    else if (s == "bracket") run_bracket(r);
    else if (s == "covderiv") run_covderiv(r);
    else if (s == "w2deriv") run_w2deriv(r);
    else if (s == "parallel") run_parallel(r);
    else run_invariants(r);

    RunResult out;
    out.checks = r.checks;
    json checks = json::array();
    for (auto& c : r.checks) checks.push_back(check_json(c));
    json cj;
    cj["scenario"] = s;
    cj["passed"] = out.passed();
    cj["checks"] = checks;
    r.write("checks.json", io::dump_json(cj));

    std::sort(r.files.begin(), r.files.end());
    json m;
    m["scenario"] = s;
    m["ottolab_version"] = "0.1.0";
    m["config"] = r.config;
    m["quantities"] = r.quantities;
    m["checks_passed"] = out.passed();
    if (std::find(r.files.begin(), r.files.end(), "curve.json") != r.files.end()) m["curve"] = "curve.json";
    m["files"] = r.files;
    io::write_json(out_dir / "manifest.json", m);
    out.manifest = m;
    return out;
}

} // namespace ottolab
