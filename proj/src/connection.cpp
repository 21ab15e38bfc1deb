#include "ottolab/connection.hpp"

#include "ottolab/error.hpp"
#include "ottolab/spectral.hpp"
#include "ottolab/torus.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ottolab {

namespace {

double sup_norm(const GridFunction& f)
{
    double s = 0.0;
    for (double v : f.values) s = std::max(s, std::abs(v));
    return s;
}

TangentField as_gradient(const GridFunction& phi)
{
    return gradient_field(PotentialField(phi));
}

// Plan from sigma to mu: exact on the circle, LP or entropic in 2D.
TransportPlan plan_between(const Measure& from, const Measure& to)
{
    if (measure_dim(from) == 1) return w2_exact_1d(from, to);
    std::vector<Coords> x, y;
    std::vector<double> a, b;
    support(from, x, a);
    support(to, y, b);
    if (x.size() + y.size() <= 512) return w2_lp_oracle(from, to);
    const auto* s = std::get_if<GridDensity>(&from);
    const auto* t = std::get_if<GridDensity>(&to);
    require(s && t, ErrorKind::resource_limit, "2D transport between large clouds is not supported");
    return sinkhorn(*s, *t, 1e-3);
}

} // namespace

SpectralCoefficients spectral_coefficients(const GridFunction& phi, int n_max)
{
    const Grid& g = phi.grid;
    SpectralCoefficients out;
    out.n_max = n_max > 0 ? n_max : g.n / 4;
    out.sobolev_k = g.dim / 2 + 3;
    auto c = spectral::forward(g, phi.values);
    const int n = g.n;
    const int n1 = g.dim == 2 ? n : 1;
    const double four_pi2 = 4.0 * std::numbers::pi * std::numbers::pi;
    for (int i0 = 0; i0 < n; ++i0)
        for (int i1 = 0; i1 < n1; ++i1) {
            int k0 = spectral::wavenumber(i0, n), k1 = g.dim == 2 ? spectral::wavenumber(i1, n) : 0;
            std::size_t idx = static_cast<std::size_t>(i0) * n1 + i1;
            if (k0 == 0 && k1 == 0) {
                out.a0 = c[idx].real();
                continue;
            }
            bool nyquist = spectral::is_nyquist(i0, n) || (g.dim == 2 && spectral::is_nyquist(i1, n));
            double lambda = four_pi2 * (double(k0) * k0 + double(k1) * k1);
            int kinf = std::max(std::abs(k0), std::abs(k1));
            if (nyquist) {
                // real cosine mode sampled at the grid; it is resolved only as aliasing
                out.tail_energy += std::norm(c[idx]) * std::pow(1.0 + lambda, out.sobolev_k);
                continue;
            }
            bool upper = k0 > 0 || (k0 == 0 && k1 > 0);
            if (!upper) continue;
            double ac = std::numbers::sqrt2 * c[idx].real(), as = -std::numbers::sqrt2 * c[idx].imag();
            if (kinf <= out.n_max) out.terms.push_back({k0, k1, ac, as});
            else out.tail_energy += (ac * ac + as * as) * std::pow(1.0 + lambda, out.sobolev_k);
        }
    return out;
}

GridFunction truncate_modes(const GridFunction& phi, int n_max)
{
    const Grid& g = phi.grid;
    auto c = spectral::forward(g, phi.values);
    const int n = g.n, n1 = g.dim == 2 ? n : 1;
    for (int i0 = 0; i0 < n; ++i0)
        for (int i1 = 0; i1 < n1; ++i1) {
            int k0 = spectral::wavenumber(i0, n), k1 = g.dim == 2 ? spectral::wavenumber(i1, n) : 0;
            if (std::max(std::abs(k0), std::abs(k1)) > n_max || spectral::is_nyquist(i0, n) ||
                (g.dim == 2 && spectral::is_nyquist(i1, n)))
                c[static_cast<std::size_t>(i0) * n1 + i1] = 0.0;
        }
    return GridFunction(g, spectral::inverse(g, std::move(c)));
}

TangentField grad_F_polynomial(const std::vector<GridFunction>& factors, const Measure& mu)
{
    require(!factors.empty(), ErrorKind::invalid_argument, "need at least one factor");
    const Grid& g = factors.front().grid;
    std::vector<double> F;
    for (auto& f : factors) {
        require(f.grid == g, ErrorKind::invalid_argument, "factors must share a grid");
        F.push_back(moments(mu, f));
    }
    GridFunction pot(g);
    for (std::size_t i = 0; i < factors.size(); ++i) {
        double w = 1.0;
        for (std::size_t j = 0; j < factors.size(); ++j)
            if (j != i) w *= F[j];
        for (std::size_t p = 0; p < g.size(); ++p) pot.values[p] += w * factors[i].values[p];
    }
    return as_gradient(pot);
}

BracketResult bracket_constant_fields(const PotentialField& psi1, const PotentialField& psi2, const GridDensity& mu,
                                      const EllipticOptions& opt)
{
    require(psi1.grid == mu.grid && psi2.grid == mu.grid, ErrorKind::invalid_argument, "potentials and density use different grids");
    require_pdiv(mu);
    auto C = apply_Lmu(psi1, mu) * spectral::gradient(psi2) - apply_Lmu(psi2, mu) * spectral::gradient(psi1);
    auto [phi, rep] = solve_Lmu(divergence_mu(C, mu), mu, opt);
    BracketResult out;
    out.field = gradient_field(phi);
    out.phi_tilde = std::move(phi);
    out.report = rep;
    return out;
}

TangentField covariant_derivative_constant(const PotentialField& psi1, const PotentialField& psi2, const GridDensity& mu,
                                           const EllipticOptions& opt)
{
    auto b = bracket_constant_fields(psi1, psi2, mu, opt);
    GridFunction g = dot(spectral::gradient(psi1), spectral::gradient(psi2));
    return as_gradient(0.5 * g - 0.5 * b.phi_tilde);
}

CovariantDerivative covariant_derivative_general(const MeasureVectorField& Z, const PotentialField& psi,
                                                 const GridDensity& mu, const CovariantOptions& opt)
{
    require(opt.epsilon > 0.0, ErrorKind::invalid_argument, "epsilon must be positive");
    require(psi.grid == mu.grid, ErrorKind::invalid_argument, "potential and density use different grids");
    require_pdiv(mu);
    const Grid& g = mu.grid;
    CovariantDerivative out;
    PotentialField phi = Z(mu, g);
    out.coefficients = spectral_coefficients(phi);
    if (out.coefficients.tail_energy > opt.tail_tol)
        raise(ErrorKind::not_derivable, "Phi(mu, .) is not smooth enough: tail energy " +
                                            fmt(out.coefficients.tail_energy));

    auto centered = [&](double eps) {
        PotentialField plus = Z(pushforward_density_flow(mu, psi, eps), g);
        PotentialField minus = Z(pushforward_density_flow(mu, psi, -eps), g);
        return (0.5 / eps) * (plus - minus);
    };
    GridFunction d1 = centered(opt.epsilon), d2 = centered(0.5 * opt.epsilon);
    GridFunction rich = (4.0 / 3.0) * d2 - (1.0 / 3.0) * d1;
    double scale = std::max({sup_norm(rich), sup_norm(phi), 1e-300});
    out.richardson_gap = sup_norm(d1 - d2) / scale;
    if (out.richardson_gap > opt.derivable_tol)
        raise(ErrorKind::not_derivable, "flow differences disagree across step sizes (relative gap " +
                                            fmt(out.richardson_gap) + ")");
    out.directional = PotentialField(rich);

    auto cov = covariant_derivative_constant(psi, phi, mu, opt.elliptic);
    out.field = as_gradient(rich + *cov.potential);
    return out;
}

double w2sq_directional_derivative(const GridDensity& sigma, const Measure& mu, const PotentialField& psi)
{
    require_pdiv(sigma);
    require(psi.grid.dim == sigma.grid.dim && measure_dim(mu) == sigma.grid.dim, ErrorKind::invalid_argument,
            "dimension mismatch");
    spectral::TrigInterpolant v(psi);
    TransportPlan plan = plan_between(sigma, mu);
    if (plan.method == PlanMethod::exact1d) {
        const auto* dens = std::get_if<GridDensity>(&mu);
        if (!dens) {
            return 2.0 * quantile_coupling_integral(plan, [&](double x, double y) {
                       // geodesic_transport is the identity on the flat torus
                       return v.gradient({wrap_unit(y), 0.0})[0] * (y - x);
                   });
        }
        // Histogram target: rho psi' is replaced by the piecewise-linear flux whose
        // cell balances are the mass rates of the density flow, so the value is the
        // exact derivative of the discrete distance.
        require(dens->grid == psi.grid, ErrorKind::invalid_argument, "potential and density use different grids");
        const Grid& g = dens->grid;
        const int n = g.n;
        const double h = g.spacing();
        GridFunction div = divergence_mu(spectral::gradient(psi), *dens);
        std::vector<double> rate(n), edge(n + 1, 0.0);
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            rate[i] = -h * dens->values[i] * div.values[i];
            total += rate[i];
        }
        for (int i = 0; i < n; ++i) edge[i + 1] = edge[i] - (rate[i] - h * dens->values[i] * total);
        return 2.0 * quantile_coupling_integral(plan, [&](double x, double y) {
                   double p = wrap_unit(y) * n + 0.5;
                   double fl = std::floor(p);
                   int i = static_cast<int>(fl) % n;
                   double s = p - fl;
                   double flux = (1.0 - s) * edge[i] + s * edge[i + 1];
                   return (y - x) * flux / dens->values[i];
               });
    }
    std::vector<Coords> x, y;
    std::vector<double> a, b;
    support(plan.source, x, a);
    support(plan.target, y, b);
    const int dim = sigma.grid.dim;
    double s = 0.0;
    for (auto& e : plan.entries()) {
        Coords l = log_coords(dim, x[e.i], y[e.j]);
        Coords gr = v.gradient(y[e.j]);
        s += e.mass * (gr[0] * l[0] + gr[1] * l[1]);
    }
    return 2.0 * s;
}

W2Gradient w2sq_gradient(const GridDensity& sigma, const GridDensity& mu)
{
    require_pdiv(sigma);
    require_pdiv(mu);
    require(sigma.grid.dim == mu.grid.dim, ErrorKind::invalid_argument, "dimension mismatch");
    auto mp = monge_potential(plan_between(mu, sigma));
    W2Gradient out;
    out.phi_tilde = mp.phi;
    out.field = as_gradient(-2.0 * mp.phi);
    out.transport_residual = mp.pushforward_residual;
    return out;
}

} // namespace ottolab
