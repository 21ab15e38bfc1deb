#include "ottolab/calculus.hpp"

#include "ottolab/error.hpp"
#include "ottolab/spectral.hpp"

#include <cmath>
#include <numbers>

namespace ottolab {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

void check_grids(const Grid& a, const Grid& b)
{
    require(a == b, ErrorKind::invalid_argument, "grid mismatch between field and density");
}

// -D.(rho D psi)
std::vector<double> apply_A(const std::vector<double>& psi, const GridDensity& mu)
{
    GridFunction p(mu.grid, psi);
    VectorGridField g = spectral::gradient(p);
    for (int a = 0; a < mu.grid.dim; ++a)
        for (std::size_t i = 0; i < g.size(); ++i) g.comp[a][i] *= mu.values[i];
    GridFunction d = spectral::divergence(g);
    for (double& v : d.values) v = -v;
    return std::move(d.values);
}

bool kernel_mode(const Grid& g, std::size_t idx)
{
    auto k_or_nyq = [&](int i) { return i == 0 || spectral::is_nyquist(i, g.n); };
    if (g.dim == 1) return k_or_nyq(static_cast<int>(idx));
    return k_or_nyq(static_cast<int>(idx / g.n)) && k_or_nyq(static_cast<int>(idx % g.n));
}

// Inverse of the uniform operator -D.D on the complement of its kernel.
std::vector<double> precondition(const Grid& g, const std::vector<double>& r)
{
    auto c = spectral::forward(g, r);
    for (std::size_t i = 0; i < c.size(); ++i) {
        int i0 = g.dim == 1 ? static_cast<int>(i) : static_cast<int>(i / g.n);
        int i1 = g.dim == 1 ? 0 : static_cast<int>(i % g.n);
        int k0 = spectral::is_nyquist(i0, g.n) ? 0 : spectral::wavenumber(i0, g.n);
        int k1 = g.dim == 1 || spectral::is_nyquist(i1, g.n) ? 0 : spectral::wavenumber(i1, g.n);
        double k2 = static_cast<double>(k0) * k0 + static_cast<double>(k1) * k1;
        c[i] = k2 == 0.0 ? spectral::cplx(0.0, 0.0) : c[i] / (two_pi * two_pi * k2);
    }
    return spectral::inverse(g, std::move(c));
}

double dotv(const std::vector<double>& a, const std::vector<double>& b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

} // namespace

GridFunction divergence_mu(const VectorGridField& A, const GridDensity& mu)
{
    check_grids(A.grid, mu.grid);
    require_pdiv(mu);
    VectorGridField w = A;
    for (int a = 0; a < mu.grid.dim; ++a)
        for (std::size_t i = 0; i < w.size(); ++i) w.comp[a][i] *= mu.values[i];
    GridFunction d = spectral::divergence(w);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] /= mu.values[i];
    return d;
}

GridFunction divergence_mu(const TangentField& A, const GridDensity& mu) { return divergence_mu(A.vectors, mu); }

GridFunction apply_Lmu(const GridFunction& psi, const GridDensity& mu)
{
    check_grids(psi.grid, mu.grid);
    require_pdiv(mu);
    auto a = apply_A(psi.values, mu);
    GridFunction out(mu.grid);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = -a[i] / mu.values[i];
    return out;
}

std::pair<PotentialField, EllipticSolveReport> solve_Lmu(const GridFunction& f, const GridDensity& mu,
                                                         const EllipticOptions& opt)
{
    check_grids(f.grid, mu.grid);
    require_pdiv(mu);
    require(opt.tol > 0.0, ErrorKind::invalid_argument, "tolerance must be positive");
    const Grid& g = mu.grid;
    const double h = g.cell_volume();
    const std::size_t n = g.size();

    double mean = 0.0, fnorm = 0.0, mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean += f[i] * mu.values[i] * h;
        fnorm += f[i] * f[i] * mu.values[i] * h;
        mass += mu.values[i] * h;
    }
    fnorm = std::sqrt(fnorm);
    if (std::abs(mean) > 1e-8 * std::max(1.0, fnorm))
        raise(ErrorKind::incompatible_rhs, "right-hand side has mu-mean " + fmt(mean));

    auto mu_norm = [&](const std::vector<double>& r) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += r[i] * r[i] / mu.values[i];
        return std::sqrt(s * h);
    };

    // b = -rho f with the components outside the range of A removed
    std::vector<double> b(n);
    for (std::size_t i = 0; i < n; ++i) b[i] = -mu.values[i] * f[i];
    EllipticSolveReport rep;
    {
        auto c = spectral::forward(g, b);
        std::vector<spectral::cplx> removed(c.size(), spectral::cplx(0.0, 0.0));
        bool any = false;
        for (std::size_t i = 0; i < c.size(); ++i)
            if (kernel_mode(g, i)) {
                if (i != 0) {
                    removed[i] = c[i];
                    any = true;
                }
                c[i] = 0.0;
            }
        if (any) rep.unresolved_norm = mu_norm(spectral::inverse(g, std::move(removed)));
        b = spectral::inverse(g, std::move(c));
    }

    std::vector<double> x(n, 0.0), r = b;
    double res = mu_norm(r);
    std::size_t it = 0;
    if (res > opt.tol) {
        std::vector<double> z = precondition(g, r), p = z;
        double rz = dotv(r, z);
        for (it = 1; it <= opt.max_iterations; ++it) {
            auto Ap = apply_A(p, mu);
            double pAp = dotv(p, Ap);
            if (!(pAp > 0.0)) throw NumericalFailure("CG lost positive definiteness", it, res);
            double alpha = rz / pAp;
            for (std::size_t i = 0; i < n; ++i) {
                x[i] += alpha * p[i];
                r[i] -= alpha * Ap[i];
            }
            res = mu_norm(r);
            if (!std::isfinite(res)) throw NumericalFailure("CG diverged", it, res);
            if (res <= opt.tol) break;
            z = precondition(g, r);
            double rz_new = dotv(r, z);
            double beta = rz_new / rz;
            rz = rz_new;
            for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
        }
        if (it > opt.max_iterations) throw NumericalFailure("CG exhausted its iteration budget", opt.max_iterations, res);
    }
    rep.iterations = it;
    rep.residual = res;

    double xm = 0.0;
    for (std::size_t i = 0; i < n; ++i) xm += x[i] * mu.values[i] * h;
    xm /= mass;
    for (double& v : x) v -= xm;
    return {PotentialField::ungauged(GridFunction(g, std::move(x))), rep};
}

TangentField gradient_field(const PotentialField& psi) { return TangentField{spectral::gradient(psi), psi}; }

TangentField project_tangent(const VectorGridField& u, const GridDensity& mu, const EllipticOptions& opt)
{
    auto [psi, rep] = solve_Lmu(divergence_mu(u, mu), mu, opt);
    return gradient_field(psi);
}

TangentField project_tangent(const TangentField& u, const GridDensity& mu, const EllipticOptions& opt)
{
    return project_tangent(u.vectors, mu, opt);
}

GridFunction heat_semigroup_fn(const GridFunction& f, double t) { return spectral::heat(f, t); }

VectorGridField heat_semigroup_grad(const VectorGridField& u, double t)
{
    require(t >= 0.0, ErrorKind::invalid_argument, "heat semigroup time must be nonnegative");
    VectorGridField out(u.grid);
    for (int a = 0; a < u.grid.dim; ++a)
        out.comp[a] = spectral::heat(GridFunction(u.grid, u.comp[a]), t).values;
    return out;
}

TangentField heat_semigroup_grad(const TangentField& u, double t)
{
    TangentField out{heat_semigroup_grad(u.vectors, t), std::nullopt};
    if (u.potential) out.potential = PotentialField::ungauged(spectral::heat(*u.potential, t));
    return out;
}

double inner_mu(const VectorGridField& u, const VectorGridField& v, const GridDensity& mu)
{
    check_grids(u.grid, mu.grid);
    check_grids(v.grid, mu.grid);
    double s = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        double d = u.comp[0][i] * v.comp[0][i];
        if (mu.grid.dim == 2) d += u.comp[1][i] * v.comp[1][i];
        s += d * mu.values[i];
    }
    return s * mu.grid.cell_volume();
}

double norm2_mu(const VectorGridField& u, const GridDensity& mu) { return inner_mu(u, u, mu); }

} // namespace ottolab
