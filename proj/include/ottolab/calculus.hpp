#pragma once

#include "ottolab/measures.hpp"

#include <cstddef>

namespace ottolab {

struct EllipticSolveReport {
    std::size_t iterations = 0;
    double residual = 0.0;      // ||L^mu psi - f||_{L^2(mu)}
    bool mu_mean_gauge = true;  // solution has zero mu-mean
    double unresolved_norm = 0.0; // part of f the discrete operator cannot reach (Nyquist modes)
};

struct EllipticOptions {
    double tol = 1e-10;
    std::size_t max_iterations = 10000;
};

/// rho^-1 div(rho A).
GridFunction divergence_mu(const VectorGridField& A, const GridDensity& mu);
GridFunction divergence_mu(const TangentField& A, const GridDensity& mu);

/// L^mu psi = Delta psi + <grad log rho, grad psi>.
GridFunction apply_Lmu(const GridFunction& psi, const GridDensity& mu);

/// Solves L^mu psi = f for f with zero mu-mean by preconditioned CG.
std::pair<PotentialField, EllipticSolveReport> solve_Lmu(const GridFunction& f, const GridDensity& mu,
                                                         const EllipticOptions& opt = {});
inline std::pair<PotentialField, EllipticSolveReport> solve_Lmu(const GridFunction& f, const GridDensity& mu,
                                                                double tol)
{
    return solve_Lmu(f, mu, EllipticOptions{tol, 10000});
}

/// Pi_mu u = grad (L^mu)^-1 div_mu u.
TangentField project_tangent(const VectorGridField& u, const GridDensity& mu, const EllipticOptions& opt = {});
TangentField project_tangent(const TangentField& u, const GridDensity& mu, const EllipticOptions& opt = {});

GridFunction heat_semigroup_fn(const GridFunction& f, double t);
/// T_t grad phi = grad P_t phi; applied componentwise.
VectorGridField heat_semigroup_grad(const VectorGridField& u, double t);
TangentField heat_semigroup_grad(const TangentField& u, double t);

/// Gradient field of a potential, carrying the potential.
TangentField gradient_field(const PotentialField& psi);

/// <u, v>_{L^2(mu)}.
double inner_mu(const VectorGridField& u, const VectorGridField& v, const GridDensity& mu);
double norm2_mu(const VectorGridField& u, const GridDensity& mu);

} // namespace ottolab
