#include "ottolab/parallel.hpp"

#include "ottolab/error.hpp"
#include "ottolab/spectral.hpp"
#include "ottolab/threads.hpp"
#include "ottolab/torus.hpp"
#include "ottolab/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace ottolab {

namespace {

void require_density_track(const MeasureCurve& c)
{
    require(c.size() >= 2, ErrorKind::invalid_argument, "curve needs at least two nodes");
    require(c.densities.size() == c.size(), ErrorKind::invalid_argument, "curve carries no density track");
}

std::string at_time(std::size_t k, double t) { return "time index " + std::to_string(k) + " (t = " + fmt(t) + "): "; }

template <class F>
auto with_context(std::size_t k, double t, F&& f)
{
    try {
        return f();
    } catch (const NumericalFailure& e) {
        throw NumericalFailure(at_time(k, t) + e.reason(), e.iterations(), e.residual());
    } catch (const Error& e) {
        raise(e.kind(), at_time(k, t) + e.message());
    }
}

double grad_norm2(const GridFunction& psi, const GridDensity& rho) { return norm2_mu(spectral::gradient(psi), rho); }

// -(L^rho)^-1 div_rho(Hess Psi grad Phi): time derivative of Psi along the transport equation
PotentialField transport_rate(const GridFunction& psi, const VectorGridField& grad_phi, const GridDensity& rho,
                              const EllipticOptions& opt)
{
    const Grid& g = psi.grid;
    auto H = spectral::hessian(psi);
    VectorGridField w(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g.dim == 1) {
            w.comp[0][i] = H[0][0][i] * grad_phi.comp[0][i];
        } else {
            w.comp[0][i] = H[0][0][i] * grad_phi.comp[0][i] + H[0][1][i] * grad_phi.comp[1][i];
            w.comp[1][i] = H[1][0][i] * grad_phi.comp[0][i] + H[1][1][i] * grad_phi.comp[1][i];
        }
    }
    auto [chi, rep] = solve_Lmu(divergence_mu(w, rho), rho, opt);
    return PotentialField(-1.0 * chi);
}

GridFunction lerp(const GridFunction& a, const GridFunction& b, double s) { return (1.0 - s) * a + s * b; }

} // namespace

// ---------------------------------------------------------------------------
// extension along a curve

CurveFieldExtension::CurveFieldExtension(std::vector<double> times, std::vector<GridDensity> nodes,
                                         std::vector<PotentialField> phi, std::vector<PotentialField> data,
                                         std::vector<Anchor> anchors)
    : times_(std::move(times)), nodes_(std::move(nodes)), phi_(std::move(phi)), data_(std::move(data)),
      anchors_(std::move(anchors))
{
}

std::vector<double> CurveFieldExtension::weights(const GridDensity& mu) const
{
    std::vector<double> logg(anchors_.size(), -std::numeric_limits<double>::infinity());
    parallel_for(
        anchors_.size(),
        [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) {
                const Anchor& a = anchors_[i];
                double d = w2_distance(mu, nodes_[a.node]);
                if (d < a.radius) logg[i] = 1.0 / (d * d - a.radius * a.radius);
            }
        },
        1);
    double top = *std::max_element(logg.begin(), logg.end());
    if (!std::isfinite(top)) return {};
    // g = exp(1 / (W^2 - r^2)) underflows for small radii; normalize in log space
    std::vector<double> w(anchors_.size(), 0.0);
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (std::isfinite(logg[i])) w[i] = std::exp(logg[i] - top);
        s += w[i];
    }
    for (double& x : w) x /= s;
    return w;
}

double CurveFieldExtension::reparametrize(std::size_t anchor, const GridDensity& mu) const
{
    const Anchor& a = anchors_.at(anchor);
    double F = moments(mu, phi_[a.node]);
    if (!(F >= a.alpha.front() && F <= a.alpha.back())) return -1.0;
    auto it = std::upper_bound(a.alpha.begin(), a.alpha.end(), F);
    std::size_t j = static_cast<std::size_t>(it - a.alpha.begin());
    if (j == 0) j = 1;
    if (j == a.alpha.size()) return times_[a.hi];
    j -= 1;
    if (F == a.alpha[j]) return times_[a.lo + j];
    double s = (F - a.alpha[j]) / (a.alpha[j + 1] - a.alpha[j]);
    return times_[a.lo + j] + s * (times_[a.lo + j + 1] - times_[a.lo + j]);
}

PotentialField CurveFieldExtension::data_at(double t) const
{
    require(t >= times_.front() && t <= times_.back(), ErrorKind::invalid_argument, "time outside the curve");
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    std::size_t k = static_cast<std::size_t>(it - times_.begin());
    if (k == 0) return data_.front();
    k -= 1;
    if (t == times_[k] || k + 1 == times_.size()) return data_[k];
    double s = (t - times_[k]) / (times_[k + 1] - times_[k]);
    return PotentialField::ungauged(lerp(data_[k], data_[k + 1], s));
}

PotentialField CurveFieldExtension::evaluate(const GridDensity& mu) const
{
    auto w = weights(mu);
    require(!w.empty(), ErrorKind::degenerate_curve, "measure lies outside the extension tube");
    std::vector<std::pair<double, double>> parts;  // (beta, weight)
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] <= 0.0) continue;
        double beta = reparametrize(i, mu);
        if (beta < 0.0) continue;
        parts.emplace_back(beta, w[i]);
        total += w[i];
    }
    require(!parts.empty(), ErrorKind::degenerate_curve, "no anchor can reparametrize this measure");
    bool same = std::all_of(parts.begin(), parts.end(), [&](auto& p) { return p.first == parts.front().first; });
    if (same) return data_at(parts.front().first);
    GridFunction out(data_.front().grid);
    for (auto& [beta, wi] : parts) out = out + (wi / total) * data_at(beta);
    return PotentialField::ungauged(out);
}

CurveFieldExtension extend_along_curve(const MeasureCurve& c, const std::vector<PotentialField>& data,
                                       const ExtensionOptions& opt)
{
    require_density_track(c);
    const std::size_t K = c.size();
    require(data.size() == K, ErrorKind::invalid_argument, "need one data potential per curve node");
    require(c.potentials.size() == K, ErrorKind::invalid_argument, "curve lacks node potentials");

    for (std::size_t j = 0; j < K; ++j) {
        double speed = grad_norm2(c.potentials[j], c.densities[j]);
        if (!(speed >= opt.speed_min))
            raise(ErrorKind::degenerate_curve, "speed condition fails at node " + std::to_string(j) + " (t = " +
                                                   fmt(c.times[j]) + ", |grad Phi|^2 = " +
                                                   fmt(speed) + ")");
    }

    std::vector<std::vector<double>> A(K, std::vector<double>(K));
    std::vector<std::vector<double>> D(K, std::vector<double>(K, 0.0));
    parallel_for(
        K,
        [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i)
                for (std::size_t j = 0; j < K; ++j) {
                    A[i][j] = moments(c.densities[j], c.potentials[i]);
                    if (j > i) D[i][j] = w2_distance(c.densities[i], c.densities[j]);
                }
        },
        1);
    for (std::size_t i = 0; i < K; ++i)
        for (std::size_t j = 0; j < i; ++j) D[i][j] = D[j][i];

    std::vector<CurveFieldExtension::Anchor> anchors;
    for (std::size_t i = 0; i < K; ++i) {
        CurveFieldExtension::Anchor a;
        a.node = i;
        a.lo = a.hi = i;
        while (a.lo > 0 && A[i][a.lo - 1] < A[i][a.lo]) --a.lo;
        while (a.hi + 1 < K && A[i][a.hi + 1] > A[i][a.hi]) ++a.hi;
        double outside = std::numeric_limits<double>::infinity(), far = 0.0;
        for (std::size_t j = 0; j < K; ++j) {
            far = std::max(far, D[i][j]);
            if (j < a.lo || j > a.hi) outside = std::min(outside, D[i][j]);
        }
        a.radius = std::isfinite(outside) ? 0.5 * outside : 2.0 * far;
        if (!(a.radius > 0.0))
            raise(ErrorKind::degenerate_curve, "curve returns onto node " + std::to_string(i) + " outside its monotone range");
        a.alpha.assign(A[i].begin() + static_cast<std::ptrdiff_t>(a.lo), A[i].begin() + static_cast<std::ptrdiff_t>(a.hi) + 1);
        anchors.push_back(std::move(a));
    }
    return CurveFieldExtension(c.times, c.densities,
                               std::vector<PotentialField>(c.potentials.begin(), c.potentials.end()), data,
                               std::move(anchors));
}

// ---------------------------------------------------------------------------
// parallel translation

TransportedField parallel_transport_ode(const MeasureCurve& c, const PotentialField& psi0, int substeps,
                                        const EllipticOptions& opt)
{
    require_density_track(c);
    require(c.flow != nullptr, ErrorKind::invalid_argument, "curve carries no flow");
    require(substeps >= 1, ErrorKind::invalid_argument, "substeps must be >= 1");
    require(psi0.grid == c.densities.front().grid, ErrorKind::invalid_argument, "potential and curve grids differ");

    TransportedField out;
    out.scheme = "ode-midpoint";
    out.times = c.times;
    PotentialField psi = psi0;
    out.fields.push_back(psi);
    out.norms.push_back(grad_norm2(psi, c.densities.front()));
    for (std::size_t k = 0; k + 1 < c.size(); ++k) {
        const PotentialField& phi = c.flow->potential(k);
        auto grad_phi = spectral::gradient(phi);
        // the top Fourier mode advects with eigenvalue ~ i pi N sup|grad Phi|; explicit
        // midpoint amplifies it unless lambda h stays below about one
        double speed = 0.0;
        for (std::size_t i = 0; i < grad_phi.size(); ++i) {
            Coords v = grad_phi.at(i);
            speed = std::max(speed, std::hypot(v[0], v[1]));
        }
        const double cell = c.times[k + 1] - c.times[k];
        const double lambda = std::numbers::pi * phi.grid.n * speed;
        const int steps = std::max(substeps, static_cast<int>(std::ceil(2.0 * cell * lambda)));
        const double h = cell / steps;
        for (int j = 0; j < steps; ++j) {
            psi = with_context(k, c.times[k] + j * h, [&] {
                GridDensity rho0 = j == 0 ? c.densities[k] : pushforward_density_flow(c.densities[k], phi, j * h);
                GridDensity rhom = pushforward_density_flow(c.densities[k], phi, (j + 0.5) * h);
                auto k1 = transport_rate(psi, grad_phi, rho0, opt);
                GridFunction half = psi + (0.5 * h) * k1;
                auto k2 = transport_rate(half, grad_phi, rhom, opt);
                return PotentialField(psi + h * k2);
            });
        }
        out.fields.push_back(psi);
        out.norms.push_back(grad_norm2(psi, c.densities[k + 1]));
    }
    return out;
}

TransportedField parallel_transport_discrete(const MeasureCurve& c, const PotentialField& psi0, std::size_t stride,
                                             const EllipticOptions& opt)
{
    require(c.flow != nullptr, ErrorKind::invalid_argument, "curve carries no flow maps");
    require_density_track(c);
    require(stride >= 1 && (c.size() - 1) % stride == 0, ErrorKind::invalid_argument,
            "stride must divide the number of curve cells");
    const Grid& g = c.densities.front().grid;
    require(psi0.grid == g, ErrorKind::invalid_argument, "potential and curve grids differ");

    TransportedField out;
    out.scheme = "discrete";
    PotentialField psi = psi0;
    out.times.push_back(c.times.front());
    out.fields.push_back(psi);
    out.norms.push_back(grad_norm2(psi, c.densities.front()));
    for (std::size_t a = 0; a + stride < c.size(); a += stride) {
        std::size_t b = a + stride;
        const double ta = c.times[a], tb = c.times[b];
        const GridDensity& rho = c.densities[b];
        spectral::TrigInterpolant u(psi);
        VectorGridField v(g);
        // tau is the identity on the flat torus
        parallel_for(g.size(), [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) v.set(i, u.gradient(c.flow->map(g.point(i), tb, ta)));
        });
        out.pre_projection.push_back(norm2_mu(v, rho));
        psi = with_context(b, tb, [&] { return PotentialField(solve_Lmu(divergence_mu(v, rho), rho, opt).first); });
        out.times.push_back(tb);
        out.fields.push_back(psi);
        out.norms.push_back(grad_norm2(psi, rho));
    }
    return out;
}

std::vector<double> norm_drift(const TransportedField& f)
{
    std::vector<double> d;
    for (double n : f.norms) d.push_back(n - f.norms.front());
    return d;
}

std::vector<double> norm_drift(const MeasureCurve& c, const std::vector<PotentialField>& fields,
                               const std::vector<double>& times)
{
    require(fields.size() == times.size() && !fields.empty(), ErrorKind::invalid_argument, "one field per time");
    std::vector<double> d;
    double n0 = 0.0;
    for (std::size_t k = 0; k < fields.size(); ++k) {
        double n = grad_norm2(fields[k], c.density_at(times[k]));
        if (k == 0) n0 = n;
        d.push_back(n - n0);
    }
    return d;
}

MeasureCurve potential_flow_curve(std::vector<double> times, std::vector<PotentialField> cell_potentials,
                                  const GridDensity& mu0, int substeps)
{
    require(times.size() >= 2 && cell_potentials.size() + 1 == times.size(), ErrorKind::invalid_argument,
            "need one potential per cell");
    require_pdiv(mu0);
    MeasureCurve c;
    c.times = times;
    c.densities.push_back(normalize(mu0));
    c.states.push_back(c.densities.back());
    for (std::size_t k = 0; k + 1 < times.size(); ++k) {
        require(cell_potentials[k].grid == mu0.grid, ErrorKind::invalid_argument, "potential and density grids differ");
        c.densities.push_back(pushforward_density_flow(c.densities.back(), cell_potentials[k], times[k + 1] - times[k]));
        c.states.push_back(c.densities.back());
        auto gr = spectral::gradient(cell_potentials[k]);
        for (std::size_t i = 0; i < gr.size(); ++i) {
            Coords v = gr.at(i);
            c.C1 = std::max(c.C1, std::hypot(v[0], v[1]));
        }
    }
    c.potentials = cell_potentials;
    c.potentials.push_back(cell_potentials.back());
    c.flow = std::make_shared<PiecewiseFlow>(std::move(times), std::move(cell_potentials), substeps);
    if (c.size() >= 3) c.residuals = continuity_residuals(c, eigenbasis(mu0.grid.dim, 1)[0].sample(mu0.grid));
    return c;
}

} // namespace ottolab
