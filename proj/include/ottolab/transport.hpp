#pragma once

#include "ottolab/measures.hpp"

#include <functional>
#include <string_view>
#include <vector>

namespace ottolab {

enum class PlanMethod { exact1d, lp, sinkhorn };
std::string_view to_string(PlanMethod m);

struct PlanEntry {
    std::size_t i, j;
    double mass;
};

/// Coupling between the supports of two measures. Grid densities are supported
/// on their nodes (index = flat grid index), clouds on their particles.
struct TransportPlan {
    Measure source, target;
    PlanMethod method = PlanMethod::exact1d;
    double epsilon = 0.0;
    std::vector<PlanEntry> coupling; // sparse (exact1d, lp)
    std::vector<double> dense;       // row-major source x target (sinkhorn)
    double cost = 0.0;
    std::vector<double> f, g;        // Kantorovich potentials for cost d^2
    double marginal_residual = 0.0;
    double duality_gap = 0.0;
    std::size_t iterations = 0;
    double theta = 0.0;              // exact1d: optimal circular shift of the target quantile

    /// Nonzero coupling entries regardless of storage.
    std::vector<PlanEntry> entries() const;
};

struct SinkhornOptions {
    double tol = 1e-8;
    std::size_t max_iterations = 100000;
    bool eps_scaling = true;
};

/// Support points and masses of a measure (grid nodes carry rho h).
void support(const Measure& m, std::vector<Coords>& points, std::vector<double>& weights);

/// Optimal plan on the circle. Grid densities are read as histograms (constant on
/// the cell around each node), clouds as atoms; the reported cost is the exact W2^2
/// between those measures.
TransportPlan w2_exact_1d(const Measure& mu, const Measure& nu);

/// Transportation simplex on the full cost matrix; combined support <= 512.
TransportPlan w2_lp_oracle(const Measure& mu, const Measure& nu);

/// Log-domain entropic plan with epsilon scaling.
TransportPlan sinkhorn(const GridDensity& mu, const GridDensity& nu, double epsilon, const SinkhornOptions& opt = {});

/// W2 between two measures: exact on the circle, LP or Sinkhorn (eps = 1e-3) in 2D.
double w2_distance(const Measure& mu, const Measure& nu);

struct MongePotential {
    PotentialField phi;
    VectorGridField displacement;    // sampled log_x T(x) before the gradient projection
    double harmonic_residual = 0.0;  // ||displacement - grad phi||_{L^2(dx)}
    double pushforward_residual = 0.0; // W2(T# source, target) in 1D, L^1 density gap in 2D
};

/// phi with T(x) = exp_x(grad phi(x)) transporting the plan's source to its target.
MongePotential monge_potential(const TransportPlan& plan);

/// Displacement interpolation at time t; returns the endpoints unchanged at t = 0, 1.
Measure geodesic_interpolate(const TransportPlan& plan, double t);

/// int_0^1 h(F^-1(u), G^-1(u + theta)) du for an exact1d plan (lifted quantiles, so
/// y - x is the displacement). Gauss quadrature on every merged quantile piece.
double quantile_coupling_integral(const TransportPlan& plan, const std::function<double(double, double)>& h,
                                  int gauss_points = 5);

} // namespace ottolab
