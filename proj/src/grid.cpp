#include "ottolab/grid.hpp"

#include "ottolab/error.hpp"

#include <cassert>

namespace ottolab {

Grid::Grid(int d, int points) : dim(d), n(points)
{
    require(d == 1 || d == 2, ErrorKind::invalid_argument, "grid dimension must be 1 or 2");
    require(points >= 2, ErrorKind::invalid_argument, "grid needs at least 2 points per axis");
}

GridFunction::GridFunction(const Grid& g, std::vector<double> v) : grid(g), values(std::move(v))
{
    require(values.size() == grid.size(), ErrorKind::invalid_argument, "value count does not match grid size");
}

VectorGridField::VectorGridField(const Grid& g) : grid(g)
{
    comp[0].assign(g.size(), 0.0);
    if (g.dim == 2) comp[1].assign(g.size(), 0.0);
}

double integrate_dx(const GridFunction& f)
{
    double s = 0.0;
    for (double v : f.values) s += v;
    return s * f.grid.cell_volume();
}

double integrate_weighted(std::span<const double> f, std::span<const double> w, double h)
{
    assert(f.size() == w.size());
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += f[i] * w[i];
    return s * h;
}

GridFunction dot(const VectorGridField& a, const VectorGridField& b)
{
    GridFunction out(a.grid);
    for (std::size_t i = 0; i < out.size(); ++i) {
        double s = a.comp[0][i] * b.comp[0][i];
        if (a.grid.dim == 2) s += a.comp[1][i] * b.comp[1][i];
        out[i] = s;
    }
    return out;
}

namespace {

template <class Op>
VectorGridField combine(const VectorGridField& a, const VectorGridField& b, Op op)
{
    assert(a.grid == b.grid);
    VectorGridField out(a.grid);
    for (int c = 0; c < a.grid.dim; ++c)
        for (std::size_t i = 0; i < a.size(); ++i) out.comp[c][i] = op(a.comp[c][i], b.comp[c][i]);
    return out;
}

template <class Op>
GridFunction combine(const GridFunction& a, const GridFunction& b, Op op)
{
    assert(a.grid == b.grid);
    GridFunction out(a.grid);
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = op(a[i], b[i]);
    return out;
}

} // namespace

VectorGridField operator+(const VectorGridField& a, const VectorGridField& b)
{
    return combine(a, b, [](double x, double y) { return x + y; });
}

VectorGridField operator-(const VectorGridField& a, const VectorGridField& b)
{
    return combine(a, b, [](double x, double y) { return x - y; });
}

VectorGridField operator*(double s, const VectorGridField& a)
{
    VectorGridField out(a.grid);
    for (int c = 0; c < a.grid.dim; ++c)
        for (std::size_t i = 0; i < a.size(); ++i) out.comp[c][i] = s * a.comp[c][i];
    return out;
}

VectorGridField operator*(const GridFunction& s, const VectorGridField& a)
{
    assert(s.grid == a.grid);
    VectorGridField out(a.grid);
    for (int c = 0; c < a.grid.dim; ++c)
        for (std::size_t i = 0; i < a.size(); ++i) out.comp[c][i] = s[i] * a.comp[c][i];
    return out;
}

GridFunction operator+(const GridFunction& a, const GridFunction& b)
{
    return combine(a, b, [](double x, double y) { return x + y; });
}

GridFunction operator-(const GridFunction& a, const GridFunction& b)
{
    return combine(a, b, [](double x, double y) { return x - y; });
}

GridFunction operator*(const GridFunction& a, const GridFunction& b)
{
    return combine(a, b, [](double x, double y) { return x * y; });
}

GridFunction operator*(double s, const GridFunction& a)
{
    GridFunction out(a.grid);
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = s * a[i];
    return out;
}

} // namespace ottolab
