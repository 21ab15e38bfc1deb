#pragma once

#include "ottolab/grid.hpp"

#include <complex>
#include <vector>

namespace ottolab::spectral {

using cplx = std::complex<double>;

/// Signed wavenumber of FFT index `idx` on an n-point axis, in [-n/2, n/2).
inline int wavenumber(int idx, int n) { return idx < (n + 1) / 2 ? idx : idx - n; }

inline bool is_nyquist(int idx, int n) { return n % 2 == 0 && idx == n / 2; }

/// Coefficients c_k with f(x) = sum_k c_k exp(2 pi i k.x), same layout as the grid.
std::vector<cplx> forward(const Grid& grid, std::span<const double> values);

/// Real part of the inverse transform of normalized coefficients.
std::vector<double> inverse(const Grid& grid, std::vector<cplx> coeffs);

/// First derivative along `axis`; the Nyquist mode is dropped so D is skew.
GridFunction derivative(const GridFunction& f, int axis);

VectorGridField gradient(const GridFunction& f);

/// sum_a D_a u_a
GridFunction divergence(const VectorGridField& u);

/// D.D f, i.e. the Laplacian with the Nyquist modes removed.
GridFunction laplacian(const GridFunction& f);

/// Hessian entries D_a D_b f stored as [a][b]; only the first dim x dim are set.
std::array<std::array<GridFunction, 2>, 2> hessian(const GridFunction& f);

/// exp(t Delta) applied in coefficient space.
GridFunction heat(const GridFunction& f, double t);

/// Potential phi with D phi closest to u in L^2(dx), zero dx-mean.
/// `residual` receives ||u - D phi||_{L^2(dx)}.
GridFunction helmholtz_potential(const VectorGridField& u, double* residual = nullptr);

/// Subtract the dx-mean.
GridFunction remove_mean(const GridFunction& f);

/// Trigonometric interpolant of a grid function, evaluable anywhere on the torus.
class TrigInterpolant {
public:
    TrigInterpolant() = default;
    explicit TrigInterpolant(const GridFunction& f, double drop_rel = 1e-14);

    int dim() const { return dim_; }
    double value(const Coords& x) const;
    Coords gradient(const Coords& x) const;
    /// value, gradient and Hessian in one pass.
    void evaluate(const Coords& x, double* value, Coords* grad, std::array<double, 3>* hess) const;
    std::size_t mode_count() const { return modes_.size(); }

private:
    struct Mode {
        int k0, k1;
        double re, im; // doubled for non-zero modes (conjugate half folded in)
    };
    int dim_ = 1;
    int kmax0_ = 0, kmax1_ = 0;
    std::vector<Mode> modes_;
};

} // namespace ottolab::spectral
