#pragma once

// Independent reference computations used by the tests. Nothing here calls the
// spectral layer of the library: derivatives are finite differences or closed
// forms, and transport references are brute force.

#include "ottolab/grid.hpp"
#include "ottolab/measures.hpp"

#include <functional>
#include <random>
#include <vector>

namespace oracle {

using ottolab::Coords;
using ottolab::Grid;
using ottolab::GridDensity;
using ottolab::GridFunction;
using ottolab::VectorGridField;

/// Random trigonometric polynomial sum_{|k|_inf <= kmax} a cos + b sin, closed form.
struct TrigPoly {
    int dim = 1;
    struct Term {
        int k0, k1;
        double a, b;
    };
    std::vector<Term> terms;
    double constant = 0.0;

    double value(const Coords& x) const;
    Coords gradient(const Coords& x) const;
    std::array<double, 3> hessian(const Coords& x) const; // xx, xy, yy
    double laplacian(const Coords& x) const;
    GridFunction sample(const Grid& g) const;
    VectorGridField sample_gradient(const Grid& g) const;
};

TrigPoly random_trig(int dim, int kmax, std::mt19937_64& rng, double amplitude = 1.0);

/// Density proportional to exp(p) for a random trig polynomial p (strictly positive, smooth).
GridDensity random_density(const Grid& g, int kmax, std::mt19937_64& rng, double amplitude = 0.5);

/// Sixth-order centered finite difference along an axis.
GridFunction fd_derivative(const GridFunction& f, int axis);

double uniform01(std::mt19937_64& rng);

/// Brute-force optimal matching cost for equal-weight atoms on the circle (all permutations).
double brute_force_w2sq_1d(const std::vector<double>& x, const std::vector<double>& y);

/// Wrapped Gaussian bump on T^1 plus a 2e-8 floor, sampled on a grid and normalized.
GridDensity bump_1d(const Grid& g, double center, double width);

/// Gauss-Legendre quadrature of f on [a, b] with `panels` 5-point panels.
double integrate(const std::function<double(double)>& f, double a, double b, int panels);

} // namespace oracle
