#include "ottolab/measures.hpp"

#include "ottolab/calculus.hpp"
#include "ottolab/error.hpp"
#include "ottolab/spectral.hpp"
#include "ottolab/torus.hpp"

#include <algorithm>
#include <cmath>

namespace ottolab {

GridDensity::GridDensity(const Grid& g, std::vector<double> v, double floor)
    : grid(g), values(std::move(v)), rho_min(floor)
{
    require(values.size() == grid.size(), ErrorKind::invalid_argument, "density value count does not match grid");
    for (double x : values)
        require(std::isfinite(x) && x >= 0.0, ErrorKind::invalid_argument, "density values must be finite and nonnegative");
}

GridDensity::GridDensity(const GridFunction& f, double floor) : GridDensity(f.grid, f.values, floor) {}

double GridDensity::mass() const
{
    double s = 0.0;
    for (double v : values) s += v;
    return s * grid.cell_volume();
}

double GridDensity::min() const { return *std::min_element(values.begin(), values.end()); }

bool GridDensity::in_pdiv() const { return min() >= rho_min * (1.0 - 1e-6); }

void require_pdiv(const GridDensity& mu)
{
    if (!mu.in_pdiv())
        raise(ErrorKind::not_in_pdiv, "density minimum " + fmt(mu.min()) + " is below rho_min " +
                                          fmt(mu.rho_min));
}

ParticleCloud::ParticleCloud(int d, std::vector<Coords> pts, std::vector<double> w)
    : dim(d), points(std::move(pts)), weights(std::move(w))
{
    require(d == 1 || d == 2, ErrorKind::invalid_argument, "dimension must be 1 or 2");
    require(!points.empty(), ErrorKind::invalid_argument, "particle cloud is empty");
    require(points.size() == weights.size(), ErrorKind::invalid_argument, "points and weights differ in length");
    double total = 0.0;
    for (double x : weights) {
        require(std::isfinite(x) && x >= 0.0, ErrorKind::invalid_argument, "weights must be finite and nonnegative");
        total += x;
    }
    require(std::abs(total - 1.0) <= 1e-12 * static_cast<double>(points.size()) + 1e-12,
            ErrorKind::invalid_argument, "weights must sum to 1");
    for (auto& p : points) {
        for (int a = 0; a < d; ++a)
            require(std::isfinite(p[a]), ErrorKind::invalid_argument, "particle position is not finite");
        p = {wrap_unit(p[0]), d == 2 ? wrap_unit(p[1]) : 0.0};
    }
}

ParticleCloud ParticleCloud::uniform_weights(int dim, std::vector<Coords> pts)
{
    std::vector<double> w(pts.size(), pts.empty() ? 0.0 : 1.0 / static_cast<double>(pts.size()));
    return ParticleCloud(dim, std::move(pts), std::move(w));
}

int measure_dim(const Measure& m)
{
    return std::visit([](const auto& x) {
        if constexpr (std::is_same_v<std::decay_t<decltype(x)>, GridDensity>)
            return x.grid.dim;
        else
            return x.dim;
    }, m);
}

PotentialField::PotentialField(const GridFunction& f) : GridFunction(spectral::remove_mean(f)) {}

PotentialField PotentialField::ungauged(const GridFunction& f)
{
    PotentialField p;
    static_cast<GridFunction&>(p) = f;
    return p;
}

GridDensity normalize(const GridDensity& d)
{
    double m = d.mass();
    require(m > 0.0, ErrorKind::degenerate_measure, "cannot normalize a density with zero mass");
    GridDensity out = d;
    for (double& v : out.values) v /= m;
    return out;
}

ParticleCloud pushforward_by_map(const ParticleCloud& mu, const PointMap& T)
{
    ParticleCloud out = mu;
    for (auto& p : out.points) {
        Coords y = T(p);
        p = {wrap_unit(y[0]), mu.dim == 2 ? wrap_unit(y[1]) : 0.0};
    }
    return out;
}

namespace {

// Adds `mass` spread uniformly over [lo, hi] (grid units, cell k covers [k, k+1)) to a periodic row.
void deposit_interval(double lo, double hi, double mass, int n, std::vector<double>& out)
{
    auto cell = [n](long long k) { return static_cast<std::size_t>(((k % n) + n) % n); };
    if (!(hi > lo)) {
        out[cell(static_cast<long long>(std::floor(lo)))] += mass;
        return;
    }
    const double dens = mass / (hi - lo);
    long long k = static_cast<long long>(std::floor(lo));
    double a = lo;
    while (a < hi) {
        double b = std::min(hi, static_cast<double>(k + 1));
        out[cell(k)] += dens * (b - a);
        a = b;
        ++k;
    }
}

} // namespace

GridDensity pushforward_by_map(const GridDensity& mu, const PointMap& T)
{
    const Grid& g = mu.grid;
    const int n = g.n;
    const double h = g.cell_volume();
    const double dx = g.spacing();
    std::vector<double> mass(g.size(), 0.0);
    if (g.dim == 1) {
        // exact remap of each cell [x_i - h/2, x_i + h/2] onto the cells of the target grid
        std::vector<double> edge(n + 1);
        for (int i = 0; i < n; ++i) edge[i] = T({(i - 0.5) * dx, 0.0})[0];
        edge[n] = edge[0] + 1.0;
        for (int i = 1; i <= n; ++i) edge[i] = edge[i - 1] + wrap_delta(edge[i] - edge[i - 1]);
        for (int i = 0; i < n; ++i) {
            double lo = edge[i] * n + 0.5, hi = edge[i + 1] * n + 0.5;
            if (hi < lo) std::swap(lo, hi);
            deposit_interval(lo, hi, mu.values[i] * h, n, mass);
        }
    } else {
        // each cell is split into S x S sub-squares that are translated by the map
        // and deposited by area overlap
        constexpr int S = 4;
        const double half = 0.5 / S;
        for (int i0 = 0; i0 < n; ++i0)
            for (int i1 = 0; i1 < n; ++i1) {
                const double m = mu.values[g.index(i0, i1)] * h / (S * S);
                for (int p = 0; p < S; ++p)
                    for (int q = 0; q < S; ++q) {
                        Coords c{(i0 + (p + 0.5) / S - 0.5) * dx, (i1 + (q + 0.5) / S - 0.5) * dx};
                        Coords y = T(c);
                        double s0 = wrap_unit(y[0]) * n + 0.5, s1 = wrap_unit(y[1]) * n + 0.5;
                        long long a0 = static_cast<long long>(std::floor(s0 - half));
                        long long a1 = static_cast<long long>(std::floor(s1 - half));
                        double w0 = std::min(1.0, (static_cast<double>(a0 + 1) - (s0 - half)) * S);
                        double w1 = std::min(1.0, (static_cast<double>(a1 + 1) - (s1 - half)) * S);
                        auto cell = [n](long long k) { return static_cast<int>(((k % n) + n) % n); };
                        int c0 = cell(a0), c1 = cell(a1), d0 = cell(a0 + 1), d1 = cell(a1 + 1);
                        mass[g.index(c0, c1)] += m * w0 * w1;
                        if (w0 < 1.0) mass[g.index(d0, c1)] += m * (1.0 - w0) * w1;
                        if (w1 < 1.0) mass[g.index(c0, d1)] += m * w0 * (1.0 - w1);
                        if (w0 < 1.0 && w1 < 1.0) mass[g.index(d0, d1)] += m * (1.0 - w0) * (1.0 - w1);
                    }
            }
    }
    for (double& v : mass) v /= h;
    return GridDensity(g, std::move(mass), mu.rho_min);
}

Measure pushforward_by_map(const Measure& mu, const PointMap& T)
{
    return std::visit([&](const auto& m) -> Measure { return pushforward_by_map(m, T); }, mu);
}

GridDensity pushforward_density_flow(const GridDensity& mu0, const PotentialField& psi, double t)
{
    require(std::isfinite(t), ErrorKind::invalid_argument, "time must be finite");
    require(psi.grid == mu0.grid, ErrorKind::invalid_argument, "potential and density grids differ");
    require_pdiv(mu0);
    if (t == 0.0) return mu0;

    const Grid& g = mu0.grid;
    auto grad = spectral::gradient(psi);
    GridFunction div = divergence_mu(grad, mu0);
    spectral::TrigInterpolant P(psi), G(div);

    double lip = 0.0;
    {
        auto H = spectral::hessian(psi);
        for (std::size_t i = 0; i < g.size(); ++i) {
            double s = 0.0;
            for (int a = 0; a < g.dim; ++a)
                for (int b = 0; b < g.dim; ++b) s += H[a][b][i] * H[a][b][i];
            lip = std::max(lip, std::sqrt(s));
        }
    }
    const int steps = std::max(16, static_cast<int>(std::ceil(20.0 * std::abs(t) * (lip + 1.0))));
    const double dt = t / steps;

    // state: position and accumulated integral of div along the reverse path
    auto rhs = [&](const Coords& x, Coords& v) {
        Coords gr;
        double gv;
        P.evaluate(x, nullptr, &gr, nullptr);
        G.evaluate(x, &gv, nullptr, nullptr);
        v = {-gr[0], -gr[1]};
        return gv;
    };

    std::vector<double> out(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        Coords x = g.point(i);
        double I = 0.0;
        for (int s = 0; s < steps; ++s) {
            Coords k1, k2, k3, k4;
            double j1 = rhs(x, k1);
            double j2 = rhs({x[0] + 0.5 * dt * k1[0], x[1] + 0.5 * dt * k1[1]}, k2);
            double j3 = rhs({x[0] + 0.5 * dt * k2[0], x[1] + 0.5 * dt * k2[1]}, k3);
            double j4 = rhs({x[0] + dt * k3[0], x[1] + dt * k3[1]}, k4);
            x[0] += dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
            x[1] += dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
            I += dt / 6.0 * (j1 + 2 * j2 + 2 * j3 + j4);
        }
        double v = mu0.values[i] * std::exp(-I);
        if (!std::isfinite(v) || v <= 0.0)
            throw NumericalFailure("reverse-flow integration produced an invalid density", static_cast<std::size_t>(steps), I);
        out[i] = v;
    }
    return normalize(GridDensity(g, std::move(out), mu0.rho_min));
}

namespace {

// Wrapped Gaussian kernel values at the n nodes of one axis for a particle at p.
void axis_kernel(double p, int n, double bw, std::vector<double>& out)
{
    out.assign(n, 0.0);
    const int images = static_cast<int>(std::ceil(8.0 * bw)) + 1;
    const double inv = 1.0 / (2.0 * bw * bw);
    for (int i = 0; i < n; ++i) {
        double d = static_cast<double>(i) / n - p;
        double s = 0.0;
        for (int j = -images; j <= images; ++j) {
            double e = d + j;
            s += std::exp(-e * e * inv);
        }
        out[i] = s;
    }
}

} // namespace

GridDensity particles_to_density(const ParticleCloud& p, int n, double bandwidth, double rho_min)
{
    require(bandwidth > 0.0 && std::isfinite(bandwidth), ErrorKind::invalid_argument, "bandwidth must be positive");
    Grid g(p.dim, n);
    std::vector<double> v(g.size(), 0.0);
    std::vector<double> k0, k1;
    for (std::size_t q = 0; q < p.size(); ++q) {
        const double w = p.weights[q];
        if (w == 0.0) continue;
        axis_kernel(p.points[q][0], n, bandwidth, k0);
        if (p.dim == 1) {
            for (int i = 0; i < n; ++i) v[i] += w * k0[i];
        } else {
            axis_kernel(p.points[q][1], n, bandwidth, k1);
            for (int i = 0; i < n; ++i) {
                const double a = w * k0[i];
                double* row = v.data() + static_cast<std::size_t>(i) * n;
                for (int j = 0; j < n; ++j) row[j] += a * k1[j];
            }
        }
    }
    GridDensity d(g, std::move(v), rho_min);
    d = normalize(d);
    bool floored = false;
    for (double& x : d.values)
        if (x < rho_min) {
            x = rho_min;
            floored = true;
        }
    return floored ? normalize(d) : d;
}

ParticleCloud density_to_particles(const GridDensity& d)
{
    std::vector<Coords> pts(d.size());
    std::vector<double> w(d.size());
    const double m = d.mass();
    require(m > 0.0, ErrorKind::degenerate_measure, "density has zero mass");
    const double h = d.grid.cell_volume();
    for (std::size_t i = 0; i < d.size(); ++i) {
        pts[i] = d.grid.point(i);
        w[i] = d.values[i] * h / m;
    }
    // absorb rounding so the weights pass the sum check for any grid size
    double total = 0.0;
    for (double x : w) total += x;
    for (double& x : w) x /= total;
    return ParticleCloud(d.grid.dim, std::move(pts), std::move(w));
}

double moments(const GridDensity& mu, const GridFunction& f)
{
    require(f.grid == mu.grid, ErrorKind::invalid_argument, "test function and density grids differ");
    return integrate_weighted(f.values, mu.values, mu.grid.cell_volume());
}

double moments(const ParticleCloud& mu, const std::function<double(const Coords&)>& f)
{
    double s = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) s += mu.weights[i] * f(mu.points[i]);
    return s;
}

double moments(const ParticleCloud& mu, const GridFunction& f)
{
    require(f.grid.dim == mu.dim, ErrorKind::invalid_argument, "test function and cloud dimensions differ");
    spectral::TrigInterpolant I(f);
    double s = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) s += mu.weights[i] * I.value(mu.points[i]);
    return s;
}

double moments(const Measure& mu, const GridFunction& f)
{
    return std::visit([&](const auto& m) { return moments(m, f); }, mu);
}

} // namespace ottolab
