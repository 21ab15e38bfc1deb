#include "ottolab/torus.hpp"

#include "ottolab/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ottolab {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

void require_finite(const Coords& c, int dim, const char* what)
{
    for (int a = 0; a < dim; ++a)
        require(std::isfinite(c[a]), ErrorKind::invalid_argument, std::string(what) + " has a non-finite component");
}

} // namespace

TorusPoint::TorusPoint(double x) : dim_(1), c_{wrap_unit(x), 0.0}
{
    require_finite(c_, 1, "point");
}

TorusPoint::TorusPoint(double x, double y) : dim_(2), c_{wrap_unit(x), wrap_unit(y)}
{
    require_finite(c_, 2, "point");
}

TorusPoint TorusPoint::from_coords(int dim, const Coords& c)
{
    require(dim == 1 || dim == 2, ErrorKind::invalid_argument, "dimension must be 1 or 2");
    return dim == 1 ? TorusPoint(c[0]) : TorusPoint(c[0], c[1]);
}

TangentVec TangentVec::from_coords(int dim, const Coords& c)
{
    require(dim == 1 || dim == 2, ErrorKind::invalid_argument, "dimension must be 1 or 2");
    return dim == 1 ? TangentVec(c[0]) : TangentVec(c[0], c[1]);
}

double TangentVec::norm() const { return std::hypot(c_[0], c_[1]); }

TorusPoint exp_map(const TorusPoint& x, const TangentVec& v)
{
    require(x.dim() == v.dim(), ErrorKind::invalid_argument, "point and vector dimensions differ");
    require_finite(v.coords(), v.dim(), "tangent vector");
    return TorusPoint::from_coords(x.dim(), exp_coords(x.dim(), x.coords(), v.coords()));
}

TangentVec log_map(const TorusPoint& x, const TorusPoint& y)
{
    require(x.dim() == y.dim(), ErrorKind::invalid_argument, "point dimensions differ");
    return TangentVec::from_coords(x.dim(), log_coords(x.dim(), x.coords(), y.coords()));
}

double distance(const TorusPoint& x, const TorusPoint& y) { return log_map(x, y).norm(); }

TangentVec geodesic_transport(const TorusPoint& x, const TorusPoint& y, const TangentVec& v)
{
    require(x.dim() == y.dim() && x.dim() == v.dim(), ErrorKind::invalid_argument, "dimensions differ");
    return v;
}

double EigenMode::value(const Coords& x) const
{
    double arg = two_pi * (k[0] * x[0] + (dim == 2 ? k[1] * x[1] : 0.0));
    if (k[0] == 0 && k[1] == 0) return 1.0;
    return std::numbers::sqrt2 * (parity == Parity::cosine ? std::cos(arg) : std::sin(arg));
}

Coords EigenMode::gradient(const Coords& x) const
{
    double arg = two_pi * (k[0] * x[0] + (dim == 2 ? k[1] * x[1] : 0.0));
    double d = parity == Parity::cosine ? -std::sin(arg) : std::cos(arg);
    double s = std::numbers::sqrt2 * two_pi * d;
    if (k[0] == 0 && k[1] == 0) s = 0.0;
    return {s * k[0], dim == 2 ? s * k[1] : 0.0};
}

GridFunction EigenMode::sample(const Grid& grid) const
{
    return ottolab::sample(grid, [this](const Coords& x) { return value(x); });
}

EigenMode constant_mode(int dim) { return EigenMode{0, dim, {0, 0}, Parity::cosine, 0.0}; }

std::vector<EigenMode> eigenbasis(int dim, int count)
{
    require(dim == 1 || dim == 2, ErrorKind::invalid_argument, "dimension must be 1 or 2");
    require(count >= 1, ErrorKind::invalid_argument, "eigenbasis needs count >= 1");
    const int K = dim == 1 ? count : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(count)))) + 1;
    std::vector<std::array<int, 2>> ks;
    if (dim == 1) {
        for (int k = 1; k <= K; ++k) ks.push_back({k, 0});
    } else {
        for (int a = 0; a <= K; ++a)
            for (int b = -K; b <= K; ++b)
                if (a > 0 || b > 0) ks.push_back({a, b});
    }
    std::sort(ks.begin(), ks.end(), [](const auto& p, const auto& q) {
        int np = p[0] * p[0] + p[1] * p[1], nq = q[0] * q[0] + q[1] * q[1];
        if (np != nq) return np < nq;
        return p < q;
    });
    std::vector<EigenMode> modes;
    for (const auto& k : ks) {
        double lambda = two_pi * two_pi * (k[0] * k[0] + k[1] * k[1]);
        for (Parity p : {Parity::cosine, Parity::sine}) {
            if (static_cast<int>(modes.size()) == count) return modes;
            modes.push_back(EigenMode{static_cast<int>(modes.size()) + 1, dim, k, p, lambda});
        }
    }
    return modes;
}

} // namespace ottolab
