#pragma once

#include "ottolab/calculus.hpp"
#include "ottolab/flows.hpp"
#include "ottolab/transport.hpp"

#include <vector>

namespace ottolab {

/// Coefficients of a grid function in the real eigenbasis, a_n = int Phi phi_n dx.
struct SpectralCoefficients {
    struct Term {
        int k0, k1;
        double a_cos, a_sin;
    };
    double a0 = 0.0;           // constant mode
    std::vector<Term> terms;   // half-plane wave vectors with |k|_inf <= n_max
    int n_max = 0;
    int sobolev_k = 0;
    double tail_energy = 0.0;  // sum over |k|_inf > n_max of a_n^2 (1 + lambda_n)^k
};

/// n_max = 0 selects N/4. The Sobolev weight uses k = floor(m/2) + 3.
SpectralCoefficients spectral_coefficients(const GridFunction& phi, int n_max = 0);

/// Projection onto the modes with |k|_inf <= n_max.
GridFunction truncate_modes(const GridFunction& phi, int n_max);

/// Gradient of F(mu) = prod_i int phi_i dmu.
TangentField grad_F_polynomial(const std::vector<GridFunction>& factors, const Measure& mu);

struct BracketResult {
    PotentialField phi_tilde;  // (L^mu)^-1 div_mu C
    TangentField field;        // grad phi_tilde = Pi_mu C
    EllipticSolveReport report;
};

/// C = L^mu psi1 grad psi2 - L^mu psi2 grad psi1 and its projection. The projected
/// Lie bracket of the constant fields is -grad phi_tilde.
BracketResult bracket_constant_fields(const PotentialField& psi1, const PotentialField& psi2, const GridDensity& mu,
                                      const EllipticOptions& opt = {});

/// Levi-Civita derivative of V_psi2 along V_psi1.
TangentField covariant_derivative_constant(const PotentialField& psi1, const PotentialField& psi2, const GridDensity& mu,
                                           const EllipticOptions& opt = {});

struct CovariantDerivative {
    TangentField field;
    PotentialField directional;      // D_{V_psi} Phi by Richardson-extrapolated flow differences
    SpectralCoefficients coefficients; // of Phi(mu, .)
    double richardson_gap = 0.0;     // relative disagreement of the two step sizes
};

struct CovariantOptions {
    double epsilon = 1e-3;          // Richardson uses epsilon and epsilon / 2
    double derivable_tol = 1e-4;
    double tail_tol = 1e-8;
    EllipticOptions elliptic{};
};

/// Covariant derivative of a measure-dependent field Z along V_psi at mu.
CovariantDerivative covariant_derivative_general(const MeasureVectorField& Z, const PotentialField& psi,
                                                 const GridDensity& mu, const CovariantOptions& opt = {});

/// d/dt W2^2(sigma, (U_t)_# mu) at t = 0 for the flow U of grad psi.
double w2sq_directional_derivative(const GridDensity& sigma, const Measure& mu, const PotentialField& psi);

struct W2Gradient {
    TangentField field;         // -2 grad phi_tilde
    PotentialField phi_tilde;   // Monge potential of mu -> sigma
    double transport_residual = 0.0;
};

/// Gradient of mu -> W2^2(sigma, mu).
W2Gradient w2sq_gradient(const GridDensity& sigma, const GridDensity& mu);

} // namespace ottolab
