#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace ottolab {

/// Raw coordinate pair; only the first `dim` entries are meaningful.
using Coords = std::array<double, 2>;

/// Reduces a real number to [0, 1).
inline double wrap_unit(double x)
{
    double r = x - static_cast<double>(static_cast<long long>(x));
    if (r < 0.0) r += 1.0;
    return r >= 1.0 ? 0.0 : r;
}

/// Uniform periodic grid on the unit torus T^m, m in {1, 2}, with n points per
/// axis. Points sit at i/n; storage is row-major with the first axis slowest.
struct Grid {
    int dim = 1;
    int n = 0;

    Grid() = default;
    Grid(int dim, int n);

    std::size_t size() const { return dim == 1 ? static_cast<std::size_t>(n) : static_cast<std::size_t>(n) * n; }
    double spacing() const { return 1.0 / n; }
    /// Cell volume h = n^-m; quadrature weight of each node.
    double cell_volume() const { return dim == 1 ? 1.0 / n : 1.0 / (static_cast<double>(n) * n); }

    Coords point(std::size_t idx) const
    {
        if (dim == 1) return {static_cast<double>(idx) / n, 0.0};
        return {static_cast<double>(idx / n) / n, static_cast<double>(idx % n) / n};
    }

    std::size_t index(int i0, int i1 = 0) const
    {
        return dim == 1 ? static_cast<std::size_t>(i0) : static_cast<std::size_t>(i0) * n + i1;
    }

    friend bool operator==(const Grid&, const Grid&) = default;
};

/// Scalar function sampled on a grid.
struct GridFunction {
    Grid grid;
    std::vector<double> values;

    GridFunction() = default;
    explicit GridFunction(const Grid& g, double fill = 0.0) : grid(g), values(g.size(), fill) {}
    GridFunction(const Grid& g, std::vector<double> v);

    std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
    double& operator[](std::size_t i) { return values[i]; }
    std::span<const double> view() const { return values; }
};

/// m-component vector field sampled on a grid (structure of arrays).
struct VectorGridField {
    Grid grid;
    std::array<std::vector<double>, 2> comp;

    VectorGridField() = default;
    explicit VectorGridField(const Grid& g);

    std::size_t size() const { return grid.size(); }
    Coords at(std::size_t i) const { return {comp[0][i], grid.dim == 2 ? comp[1][i] : 0.0}; }
    void set(std::size_t i, const Coords& v)
    {
        comp[0][i] = v[0];
        if (grid.dim == 2) comp[1][i] = v[1];
    }
};

/// Samples f(x) at every grid node.
template <class F>
GridFunction sample(const Grid& grid, F&& f)
{
    GridFunction out(grid);
    for (std::size_t i = 0; i < grid.size(); ++i) out[i] = f(grid.point(i));
    return out;
}

/// Sum of values times cell volume.
double integrate_dx(const GridFunction& f);

/// Sum of f * w * h, i.e. the integral of f against the measure with density w.
double integrate_weighted(std::span<const double> f, std::span<const double> w, double h);

/// Pointwise inner product <a, b> of two vector fields.
GridFunction dot(const VectorGridField& a, const VectorGridField& b);

VectorGridField operator+(const VectorGridField& a, const VectorGridField& b);
VectorGridField operator-(const VectorGridField& a, const VectorGridField& b);
VectorGridField operator*(double s, const VectorGridField& a);
/// Pointwise product of a scalar grid function with a vector field.
VectorGridField operator*(const GridFunction& s, const VectorGridField& a);

GridFunction operator+(const GridFunction& a, const GridFunction& b);
GridFunction operator-(const GridFunction& a, const GridFunction& b);
GridFunction operator*(double s, const GridFunction& a);
GridFunction operator*(const GridFunction& a, const GridFunction& b);

} // namespace ottolab
