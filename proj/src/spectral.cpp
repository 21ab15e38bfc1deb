#include "ottolab/spectral.hpp"

#include "ottolab/error.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

namespace ottolab::spectral {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

class PlanCache {
public:
    ~PlanCache()
    {
        for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
    }

    fftw_plan get(int dim, int n, int sign)
    {
        std::lock_guard lock(mu_);
        auto key = std::make_tuple(dim, n, sign);
        if (auto it = plans_.find(key); it != plans_.end()) return it->second;
        std::size_t total = dim == 1 ? n : static_cast<std::size_t>(n) * n;
        std::vector<fftw_complex> a(total), b(total);
        fftw_plan p = dim == 1 ? fftw_plan_dft_1d(n, a.data(), b.data(), sign, FFTW_ESTIMATE | FFTW_UNALIGNED)
                               : fftw_plan_dft_2d(n, n, a.data(), b.data(), sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
        if (!p) raise(ErrorKind::numerical_failure, "FFTW could not create a plan");
        plans_.emplace(key, p);
        return p;
    }

private:
    std::mutex mu_;
    std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

PlanCache& plans()
{
    static PlanCache cache;
    return cache;
}

void execute(const Grid& grid, int sign, std::vector<cplx>& in, std::vector<cplx>& out)
{
    fftw_plan p = plans().get(grid.dim, grid.n, sign);
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(in.data()), reinterpret_cast<fftw_complex*>(out.data()));
}

// Integer wavevector of a flat coefficient index.
inline std::array<int, 2> wavevector(const Grid& g, std::size_t idx, bool drop_nyquist)
{
    auto comp = [&](int i) {
        if (drop_nyquist && is_nyquist(i, g.n)) return 0;
        return wavenumber(i, g.n);
    };
    if (g.dim == 1) return {comp(static_cast<int>(idx)), 0};
    return {comp(static_cast<int>(idx / g.n)), comp(static_cast<int>(idx % g.n))};
}

} // namespace

std::vector<cplx> forward(const Grid& grid, std::span<const double> values)
{
    std::vector<cplx> in(values.begin(), values.end()), out(values.size());
    execute(grid, FFTW_FORWARD, in, out);
    const double scale = 1.0 / static_cast<double>(grid.size());
    for (auto& c : out) c *= scale;
    return out;
}

std::vector<double> inverse(const Grid& grid, std::vector<cplx> coeffs)
{
    std::vector<cplx> out(coeffs.size());
    execute(grid, FFTW_BACKWARD, coeffs, out);
    std::vector<double> re(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) re[i] = out[i].real();
    return re;
}

GridFunction derivative(const GridFunction& f, int axis)
{
    const Grid& g = f.grid;
    auto c = forward(g, f.values);
    for (std::size_t i = 0; i < c.size(); ++i) {
        auto k = wavevector(g, i, true);
        c[i] *= cplx(0.0, two_pi * k[axis]);
    }
    return GridFunction(g, inverse(g, std::move(c)));
}

VectorGridField gradient(const GridFunction& f)
{
    const Grid& g = f.grid;
    auto c = forward(g, f.values);
    VectorGridField out(g);
    for (int a = 0; a < g.dim; ++a) {
        std::vector<cplx> d(c.size());
        for (std::size_t i = 0; i < c.size(); ++i) d[i] = c[i] * cplx(0.0, two_pi * wavevector(g, i, true)[a]);
        out.comp[a] = inverse(g, std::move(d));
    }
    return out;
}

GridFunction divergence(const VectorGridField& u)
{
    const Grid& g = u.grid;
    std::vector<cplx> acc(g.size(), cplx(0.0, 0.0));
    for (int a = 0; a < g.dim; ++a) {
        auto c = forward(g, u.comp[a]);
        for (std::size_t i = 0; i < c.size(); ++i) acc[i] += c[i] * cplx(0.0, two_pi * wavevector(g, i, true)[a]);
    }
    return GridFunction(g, inverse(g, std::move(acc)));
}

GridFunction laplacian(const GridFunction& f)
{
    const Grid& g = f.grid;
    auto c = forward(g, f.values);
    for (std::size_t i = 0; i < c.size(); ++i) {
        auto k = wavevector(g, i, true);
        c[i] *= -two_pi * two_pi * (k[0] * k[0] + k[1] * k[1]);
    }
    return GridFunction(g, inverse(g, std::move(c)));
}

std::array<std::array<GridFunction, 2>, 2> hessian(const GridFunction& f)
{
    const Grid& g = f.grid;
    auto c = forward(g, f.values);
    std::array<std::array<GridFunction, 2>, 2> h;
    for (int a = 0; a < g.dim; ++a)
        for (int b = a; b < g.dim; ++b) {
            std::vector<cplx> d(c.size());
            for (std::size_t i = 0; i < c.size(); ++i) {
                auto k = wavevector(g, i, true);
                d[i] = c[i] * (-two_pi * two_pi * k[a] * k[b]);
            }
            h[a][b] = GridFunction(g, inverse(g, std::move(d)));
            if (a != b) h[b][a] = h[a][b];
        }
    return h;
}

GridFunction heat(const GridFunction& f, double t)
{
    require(t >= 0.0, ErrorKind::invalid_argument, "heat semigroup time must be nonnegative");
    if (t == 0.0) return f;
    const Grid& g = f.grid;
    auto c = forward(g, f.values);
    for (std::size_t i = 0; i < c.size(); ++i) {
        auto k = wavevector(g, i, false);
        c[i] *= std::exp(-two_pi * two_pi * (k[0] * k[0] + k[1] * k[1]) * t);
    }
    return GridFunction(g, inverse(g, std::move(c)));
}

GridFunction helmholtz_potential(const VectorGridField& u, double* residual)
{
    const Grid& g = u.grid;
    std::vector<cplx> acc(g.size(), cplx(0.0, 0.0));
    for (int a = 0; a < g.dim; ++a) {
        auto c = forward(g, u.comp[a]);
        for (std::size_t i = 0; i < c.size(); ++i) acc[i] += c[i] * cplx(0.0, two_pi * wavevector(g, i, true)[a]);
    }
    for (std::size_t i = 0; i < acc.size(); ++i) {
        auto k = wavevector(g, i, true);
        double k2 = k[0] * k[0] + k[1] * k[1];
        acc[i] = k2 == 0 ? cplx(0.0, 0.0) : acc[i] / (-two_pi * two_pi * k2);
    }
    GridFunction phi(g, inverse(g, std::move(acc)));
    if (residual) {
        auto d = gradient(phi);
        double s = 0.0;
        for (int a = 0; a < g.dim; ++a)
            for (std::size_t i = 0; i < g.size(); ++i) {
                double e = u.comp[a][i] - d.comp[a][i];
                s += e * e;
            }
        *residual = std::sqrt(s * g.cell_volume());
    }
    return phi;
}

GridFunction remove_mean(const GridFunction& f)
{
    double m = 0.0;
    for (double v : f.values) m += v;
    m /= static_cast<double>(f.size());
    GridFunction out = f;
    for (double& v : out.values) v -= m;
    return out;
}

TrigInterpolant::TrigInterpolant(const GridFunction& f, double drop_rel) : dim_(f.grid.dim)
{
    const Grid& g = f.grid;
    auto c = forward(g, f.values);
    double cmax = 0.0;
    for (auto& v : c) cmax = std::max(cmax, std::abs(v));
    const double cut = drop_rel * cmax;
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (std::abs(c[i]) <= cut) continue;
        int i0 = g.dim == 1 ? static_cast<int>(i) : static_cast<int>(i / g.n);
        int i1 = g.dim == 1 ? 0 : static_cast<int>(i % g.n);
        if (is_nyquist(i0, g.n) || (g.dim == 2 && is_nyquist(i1, g.n))) continue;
        int k0 = wavenumber(i0, g.n), k1 = g.dim == 2 ? wavenumber(i1, g.n) : 0;
        bool zero = k0 == 0 && k1 == 0;
        bool upper = k0 > 0 || (k0 == 0 && k1 > 0);
        if (!zero && !upper) continue;
        double mult = zero ? 1.0 : 2.0;
        modes_.push_back({k0, k1, mult * c[i].real(), mult * c[i].imag()});
        kmax0_ = std::max(kmax0_, std::abs(k0));
        kmax1_ = std::max(kmax1_, std::abs(k1));
    }
}

namespace {

// e^{2 pi i k x} for k in [-kmax, kmax], stored at offset kmax.
void powers(double x, int kmax, std::vector<cplx>& out)
{
    out.resize(2 * kmax + 1);
    out[kmax] = 1.0;
    if (kmax == 0) return;
    const cplx z(std::cos(two_pi * x), std::sin(two_pi * x));
    cplx p = 1.0;
    for (int k = 1; k <= kmax; ++k) {
        // refresh every 16 steps to keep the recurrence from drifting
        if (k % 16 == 0)
            p = cplx(std::cos(two_pi * k * x), std::sin(two_pi * k * x));
        else
            p *= z;
        out[kmax + k] = p;
        out[kmax - k] = std::conj(p);
    }
}

} // namespace

void TrigInterpolant::evaluate(const Coords& x, double* value, Coords* grad, std::array<double, 3>* hess) const
{
    thread_local std::vector<cplx> e0, e1;
    powers(x[0], kmax0_, e0);
    if (dim_ == 2) powers(x[1], kmax1_, e1);
    double v = 0.0, g0 = 0.0, g1 = 0.0, h00 = 0.0, h01 = 0.0, h11 = 0.0;
    for (const Mode& m : modes_) {
        cplx e = e0[kmax0_ + m.k0];
        if (dim_ == 2) e *= e1[kmax1_ + m.k1];
        // c * e
        double re = m.re * e.real() - m.im * e.imag();
        double im = m.re * e.imag() + m.im * e.real();
        v += re;
        g0 -= m.k0 * im;
        g1 -= m.k1 * im;
        h00 -= static_cast<double>(m.k0) * m.k0 * re;
        h01 -= static_cast<double>(m.k0) * m.k1 * re;
        h11 -= static_cast<double>(m.k1) * m.k1 * re;
    }
    if (value) *value = v;
    if (grad) *grad = {two_pi * g0, dim_ == 2 ? two_pi * g1 : 0.0};
    if (hess) {
        const double s = two_pi * two_pi;
        *hess = {s * h00, s * h01, s * h11};
    }
}

double TrigInterpolant::value(const Coords& x) const
{
    double v;
    evaluate(x, &v, nullptr, nullptr);
    return v;
}

Coords TrigInterpolant::gradient(const Coords& x) const
{
    Coords g;
    evaluate(x, nullptr, &g, nullptr);
    return g;
}

} // namespace ottolab::spectral
