#pragma once

#include "ottolab/grid.hpp"

#include <vector>

namespace ottolab {

/// Point on the unit torus; coordinates are kept reduced to [0, 1).
class TorusPoint {
public:
    TorusPoint() = default;
    explicit TorusPoint(double x);
    TorusPoint(double x, double y);
    static TorusPoint from_coords(int dim, const Coords& c);

    int dim() const { return dim_; }
    double operator[](int a) const { return c_[a]; }
    const Coords& coords() const { return c_; }

    friend bool operator==(const TorusPoint&, const TorusPoint&) = default;

private:
    int dim_ = 1;
    Coords c_{0.0, 0.0};
};

class TangentVec {
public:
    TangentVec() = default;
    explicit TangentVec(double v) : dim_(1), c_{v, 0.0} {}
    TangentVec(double v0, double v1) : dim_(2), c_{v0, v1} {}
    static TangentVec from_coords(int dim, const Coords& c);

    int dim() const { return dim_; }
    double operator[](int a) const { return c_[a]; }
    const Coords& coords() const { return c_; }
    double norm() const;

    friend bool operator==(const TangentVec&, const TangentVec&) = default;

private:
    int dim_ = 1;
    Coords c_{0.0, 0.0};
};

TorusPoint exp_map(const TorusPoint& x, const TangentVec& v);
/// Shortest displacement x -> y; an offset of exactly 1/2 resolves to +1/2.
TangentVec log_map(const TorusPoint& x, const TorusPoint& y);
double distance(const TorusPoint& x, const TorusPoint& y);
/// Parallel translation along the minimizing geodesic x -> y (flat: identity).
TangentVec geodesic_transport(const TorusPoint& x, const TorusPoint& y, const TangentVec& v);

// Raw-coordinate versions used in hot loops.
inline double wrap_delta(double d)
{
    d -= static_cast<double>(static_cast<long long>(d));
    if (d > 0.5) d -= 1.0;
    else if (d <= -0.5) d += 1.0;
    return d;
}

inline Coords log_coords(int dim, const Coords& x, const Coords& y)
{
    return {wrap_delta(y[0] - x[0]), dim == 2 ? wrap_delta(y[1] - x[1]) : 0.0};
}

inline Coords exp_coords(int dim, const Coords& x, const Coords& v)
{
    return {wrap_unit(x[0] + v[0]), dim == 2 ? wrap_unit(x[1] + v[1]) : 0.0};
}

inline double dist2_coords(int dim, const Coords& x, const Coords& y)
{
    auto d = log_coords(dim, x, y);
    return d[0] * d[0] + d[1] * d[1];
}

enum class Parity { cosine, sine };

struct EigenMode {
    int index = 0;
    int dim = 1;
    std::array<int, 2> k{0, 0};
    Parity parity = Parity::cosine;
    double eigenvalue = 0.0;

    double value(const Coords& x) const;
    Coords gradient(const Coords& x) const;
    GridFunction sample(const Grid& grid) const;
};

/// First `count` nonconstant modes of -Delta on T^dim, ordered by eigenvalue,
/// then lexicographic wavevector, cosine before sine. Indices start at 1.
std::vector<EigenMode> eigenbasis(int dim, int count);

/// phi_0 = 1.
EigenMode constant_mode(int dim);

} // namespace ottolab
