#include "ottolab/flows.hpp"

#include "ottolab/error.hpp"
#include "ottolab/spectral.hpp"
#include "ottolab/threads.hpp"
#include "ottolab/torus.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ottolab {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

Coords rk4(const spectral::TrigInterpolant& v, Coords x, double h, int steps)
{
    for (int s = 0; s < steps; ++s) {
        Coords k1 = v.gradient(x);
        Coords k2 = v.gradient({x[0] + 0.5 * h * k1[0], x[1] + 0.5 * h * k1[1]});
        Coords k3 = v.gradient({x[0] + 0.5 * h * k2[0], x[1] + 0.5 * h * k2[1]});
        Coords k4 = v.gradient({x[0] + h * k3[0], x[1] + h * k3[1]});
        for (int a = 0; a < 2; ++a) x[a] += h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
    }
    return x;
}

Coords wrap(int dim, Coords x) { return {wrap_unit(x[0]), dim == 2 ? wrap_unit(x[1]) : 0.0}; }

double sup_gradient(const GridFunction& phi)
{
    auto g = spectral::gradient(phi);
    double s = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        Coords v = g.at(i);
        s = std::max(s, std::hypot(v[0], v[1]));
    }
    return s;
}

double sup_hessian(const GridFunction& phi)
{
    auto H = spectral::hessian(phi);
    double s = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        if (phi.grid.dim == 1) {
            s = std::max(s, std::abs(H[0][0][i]));
        } else {
            double a = H[0][0][i], b = H[0][1][i], d = H[1][1][i];
            double mid = 0.5 * (a + d), rad = std::hypot(0.5 * (a - d), b);
            s = std::max({s, std::abs(mid + rad), std::abs(mid - rad)});
        }
    }
    return s;
}

ParticleCloud as_particles(const Measure& mu)
{
    if (auto* d = std::get_if<GridDensity>(&mu)) return density_to_particles(*d);
    return std::get<ParticleCloud>(mu);
}

Grid evaluation_grid(const Measure& mu, int grid_n)
{
    if (auto* d = std::get_if<GridDensity>(&mu)) return d->grid;
    int dim = measure_dim(mu);
    return Grid(dim, grid_n > 0 ? grid_n : (dim == 1 ? 128 : 64));
}

MeasureCurve run_scheme(const MeasureVectorField& Z, const Measure& mu0, std::vector<double> times, double smoothing,
                        int substeps, const Grid& grid)
{
    require(substeps >= 1, ErrorKind::invalid_argument, "substeps must be >= 1");
    require(measure_dim(mu0) == grid.dim, ErrorKind::invalid_argument, "measure and grid dimensions differ");
    const int dim = grid.dim;
    const std::size_t K = times.size() - 1;
    MeasureCurve curve;
    curve.times = times;
    ParticleCloud cloud = as_particles(mu0);
    const auto* dens0 = std::get_if<GridDensity>(&mu0);
    if (dens0) {
        require_pdiv(*dens0);
        curve.densities.push_back(normalize(*dens0));
    }
    curve.states.push_back(cloud);

    auto evaluate = [&](const Measure& m, std::size_t k) {
        try {
            PotentialField phi = Z(m, grid);
            if (smoothing > 0.0) phi = PotentialField(spectral::heat(phi, smoothing));
            return phi;
        } catch (const NumericalFailure& e) {
            throw NumericalFailure("step " + std::to_string(k) + ": " + e.reason(), e.iterations(), e.residual());
        } catch (const Error& e) {
            raise(e.kind(), "step " + std::to_string(k) + ": " + e.message());
        }
    };

    for (std::size_t k = 0; k < K; ++k) {
        PotentialField phi = evaluate(curve.states.back(), k);
        spectral::TrigInterpolant v(phi);
        const double h = (times[k + 1] - times[k]) / substeps;
        ParticleCloud next = cloud;
        parallel_for(cloud.size(), [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) next.points[i] = wrap(dim, rk4(v, cloud.points[i], h, substeps));
        });
        cloud = std::move(next);
        if (!curve.densities.empty())
            curve.densities.push_back(pushforward_density_flow(curve.densities.back(), phi, times[k + 1] - times[k]));
        curve.C1 = std::max(curve.C1, sup_gradient(phi));
        curve.potentials.push_back(std::move(phi));
        curve.states.push_back(cloud);
    }
    curve.potentials.push_back(evaluate(curve.states.back(), K));
    curve.C1 = std::max(curve.C1, sup_gradient(curve.potentials.back()));
    curve.flow = std::make_shared<PiecewiseFlow>(
        times, std::vector<PotentialField>(curve.potentials.begin(), curve.potentials.end() - 1), substeps);
    if (Z.C2) curve.C2 = Z.C2;
    if (K >= 2) curve.residuals = continuity_residuals(curve, eigenbasis(dim, 1)[0].sample(grid));
    return curve;
}

std::vector<double> uniform_times(std::size_t cells, double horizon)
{
    std::vector<double> t(cells + 1);
    for (std::size_t k = 0; k <= cells; ++k) t[k] = horizon * static_cast<double>(k) / static_cast<double>(cells);
    return t;
}

} // namespace

PotentialField MeasureVectorField::operator()(const Measure& mu, const Grid& grid) const
{
    require(static_cast<bool>(evaluator), ErrorKind::invalid_argument, "vector field has no evaluator");
    GridFunction phi = evaluator(mu, grid);
    require(phi.grid == grid, ErrorKind::invalid_argument, "evaluator returned a potential on another grid");
    for (double v : phi.values) require(std::isfinite(v), ErrorKind::numerical_failure, "evaluator returned non-finite values");
    return PotentialField(phi);
}

MeasureVectorField constant_field(const PotentialField& psi)
{
    MeasureVectorField Z;
    Z.evaluator = [psi](const Measure&, const Grid& grid) -> GridFunction {
        require(grid == psi.grid, ErrorKind::invalid_argument, "constant field sampled on a different grid");
        return psi;
    };
    Z.C1 = sup_gradient(psi);
    Z.C2 = sup_hessian(psi);
    return Z;
}

MeasureVectorField interaction_field(double kappa)
{
    require(std::isfinite(kappa), ErrorKind::invalid_argument, "kappa must be finite");
    MeasureVectorField Z;
    Z.evaluator = [kappa](const Measure& mu, const Grid& grid) {
        int dim = measure_dim(mu);
        require(dim == grid.dim, ErrorKind::invalid_argument, "measure and grid dimensions differ");
        std::array<double, 2> C{0.0, 0.0}, S{0.0, 0.0};
        for (int a = 0; a < dim; ++a) {
            if (auto* c = std::get_if<ParticleCloud>(&mu)) {
                for (std::size_t i = 0; i < c->size(); ++i) {
                    C[a] += c->weights[i] * std::cos(two_pi * c->points[i][a]);
                    S[a] += c->weights[i] * std::sin(two_pi * c->points[i][a]);
                }
            } else {
                const auto& d = std::get<GridDensity>(mu);
                double h = d.grid.cell_volume();
                for (std::size_t i = 0; i < d.size(); ++i) {
                    Coords y = d.grid.point(i);
                    C[a] += d.values[i] * h * std::cos(two_pi * y[a]);
                    S[a] += d.values[i] * h * std::sin(two_pi * y[a]);
                }
            }
        }
        return sample(grid, [&](const Coords& x) {
            double s = 0.0;
            for (int a = 0; a < dim; ++a) s += C[a] * std::cos(two_pi * x[a]) + S[a] * std::sin(two_pi * x[a]);
            return kappa * s;
        });
    };
    Z.C1 = two_pi * std::abs(kappa) * std::numbers::sqrt2;
    Z.C2 = two_pi * two_pi * std::abs(kappa);
    return Z;
}

MeasureVectorField moment_weighted_field(std::vector<GridFunction> f, std::vector<PotentialField> psi)
{
    require(f.size() == psi.size() && !f.empty(), ErrorKind::invalid_argument, "need matching nonempty f and psi lists");
    MeasureVectorField Z;
    Z.evaluator = [f, psi](const Measure& mu, const Grid& grid) {
        GridFunction out(grid);
        for (std::size_t i = 0; i < f.size(); ++i) {
            require(psi[i].grid == grid, ErrorKind::invalid_argument, "potential sampled on a different grid");
            double a = moments(mu, f[i]);
            for (std::size_t p = 0; p < grid.size(); ++p) out.values[p] += a * psi[i].values[p];
        }
        return out;
    };
    // F_f is bounded by sup |f| on probability measures
    double c2 = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        double sup = 0.0;
        for (double v : f[i].values) sup = std::max(sup, std::abs(v));
        c2 += sup * sup_hessian(psi[i]);
    }
    Z.C2 = c2;
    return Z;
}

PiecewiseFlow::PiecewiseFlow(std::vector<double> times, std::vector<PotentialField> cell_potentials, int substeps)
    : times_(std::move(times)), potentials_(std::move(cell_potentials)), substeps_(substeps)
{
    require(!potentials_.empty() && times_.size() == potentials_.size() + 1, ErrorKind::invalid_argument,
            "need one potential per time cell");
    require(substeps_ >= 1, ErrorKind::invalid_argument, "substeps must be >= 1");
    for (std::size_t k = 0; k + 1 < times_.size(); ++k)
        require(times_[k + 1] > times_[k], ErrorKind::invalid_argument, "times must increase strictly");
    dim_ = potentials_.front().grid.dim;
    for (auto& p : potentials_) interp_.emplace_back(p);
}

std::size_t PiecewiseFlow::cell(double t) const
{
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    std::size_t k = it == times_.begin() ? 0 : static_cast<std::size_t>(it - times_.begin()) - 1;
    return std::min(k, cells() - 1);
}

Coords PiecewiseFlow::advance(std::size_t k, const Coords& x, double h, int steps) const
{
    return rk4(interp_.at(k), x, h / steps, steps);
}

Coords PiecewiseFlow::map(const Coords& x0, double s, double t) const
{
    require(std::isfinite(s) && std::isfinite(t), ErrorKind::invalid_argument, "times must be finite");
    require(s >= times_.front() && s <= times_.back() && t >= times_.front() && t <= times_.back(),
            ErrorKind::invalid_argument, "time outside the flow's range");
    Coords x = x0;
    double a = s;
    auto steps_for = [&](std::size_t k, double len) {
        double frac = len / (times_[k + 1] - times_[k]);
        return std::max(1, static_cast<int>(std::ceil(substeps_ * frac - 1e-9)));
    };
    while (a < t) {
        std::size_t k = cell(a);
        double b = std::min(t, times_[k + 1]);
        x = advance(k, x, b - a, steps_for(k, b - a));
        a = b;
    }
    while (a > t) {
        // cell to the left of a
        auto it = std::lower_bound(times_.begin(), times_.end(), a);
        std::size_t k = static_cast<std::size_t>(it - times_.begin()) - 1;
        double b = std::max(t, times_[k]);
        x = advance(k, x, b - a, steps_for(k, a - b));
        a = b;
    }
    return wrap(dim_, x);
}

GridDensity MeasureCurve::density_at(double t) const
{
    require(!densities.empty() && flow, ErrorKind::invalid_argument, "curve carries no density track");
    require(t >= times.front() && t <= times.back(), ErrorKind::invalid_argument, "time outside the curve");
    std::size_t k = flow->cell(t);
    if (t == times[k]) return densities[k];
    if (t == times.back()) return densities.back();
    return pushforward_density_flow(densities[k], flow->potential(k), t - times[k]);
}

MeasureCurve constant_field_flow(const PotentialField& psi, const Measure& mu0, int steps, double horizon, int substeps)
{
    require(steps >= 1, ErrorKind::invalid_argument, "steps must be >= 1");
    require(std::isfinite(horizon) && horizon > 0.0, ErrorKind::invalid_argument, "horizon must be positive");
    return run_scheme(constant_field(psi), mu0, uniform_times(static_cast<std::size_t>(steps), horizon), 0.0, substeps,
                      psi.grid);
}

MeasureCurve euler_scheme_flow(const MeasureVectorField& Z, const Measure& mu0, int n, const FlowOptions& opt)
{
    require(n >= 1 && n <= 20, ErrorKind::invalid_argument, "n must lie in 1..20");
    require(std::isfinite(opt.horizon) && opt.horizon > 0.0, ErrorKind::invalid_argument, "horizon must be positive");
    double smoothing = opt.smoothing.value_or(1.0 / n);
    require(smoothing >= 0.0, ErrorKind::invalid_argument, "smoothing time must be >= 0");
    return run_scheme(Z, mu0, uniform_times(std::size_t{1} << n, opt.horizon), smoothing, opt.substeps,
                      evaluation_grid(mu0, opt.grid_n));
}

MeasureCurve mckean_vlasov_flow(const MeasureVectorField& Z, const Measure& mu0, int n, FlowOptions opt)
{
    require(Z.C2.has_value(), ErrorKind::invalid_argument, "McKean-Vlasov flow needs a declared Hessian bound C2");
    opt.smoothing = 0.0;
    return euler_scheme_flow(Z, mu0, n, opt);
}

std::vector<double> continuity_residuals(const MeasureCurve& c, const GridFunction& f)
{
    const std::size_t K = c.size();
    require(K >= 3, ErrorKind::invalid_argument, "continuity residual needs at least 3 time points");
    require(c.states.size() == K && c.potentials.size() == K, ErrorKind::invalid_argument, "curve is incomplete");
    auto grad_f = spectral::gradient(f);
    std::vector<double> F(K), G(K);
    for (std::size_t k = 0; k < K; ++k) {
        require(c.potentials[k].grid == f.grid, ErrorKind::invalid_argument, "f and the potentials use different grids");
        F[k] = moments(c.states[k], f);
        G[k] = moments(c.states[k], dot(grad_f, spectral::gradient(c.potentials[k])));
    }
    std::vector<double> r(K);
    for (std::size_t k = 0; k < K; ++k) {
        double d;
        double g = G[k];
        if (k == 0) {
            d = (F[1] - F[0]) / (c.times[1] - c.times[0]);
        } else if (k + 1 == K) {
            d = (F[k] - F[k - 1]) / (c.times[k] - c.times[k - 1]);
            g = moments(c.states[k], dot(grad_f, spectral::gradient(c.potentials[k - 1])));
        } else {
            d = (F[k + 1] - F[k - 1]) / (c.times[k + 1] - c.times[k - 1]);
            // the node sits between two frozen cells
            g = 0.5 * (moments(c.states[k], dot(grad_f, spectral::gradient(c.potentials[k - 1]))) + G[k]);
        }
        r[k] = std::abs(d - g);
    }
    return r;
}

double continuity_residual(const MeasureCurve& c, const GridFunction& f)
{
    auto r = continuity_residuals(c, f);
    return *std::max_element(r.begin() + 1, r.end() - 1);
}

} // namespace ottolab
