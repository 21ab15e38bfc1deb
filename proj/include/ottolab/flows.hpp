#pragma once

#include "ottolab/measures.hpp"
#include "ottolab/spectral.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace ottolab {

/// x -> grad Phi(mu, x), given through its potential on a grid.
struct MeasureVectorField {
    std::function<GridFunction(const Measure&, const Grid&)> evaluator;
    bool c1 = true;
    bool c2 = true;
    std::optional<double> C1; // sup_mu sup_x |grad Phi|
    std::optional<double> C2; // sup_mu sup_x ||Hess Phi||

    /// Evaluates and gauges to zero dx-mean.
    PotentialField operator()(const Measure& mu, const Grid& grid) const;
};

/// Phi(mu, x) = psi(x).
MeasureVectorField constant_field(const PotentialField& psi);

/// Phi(mu, x) = kappa sum_a int cos(2 pi (x_a - y_a)) dmu(y).
MeasureVectorField interaction_field(double kappa);

/// Phi(mu, x) = sum_i (int f_i dmu) psi_i(x).
MeasureVectorField moment_weighted_field(std::vector<GridFunction> f, std::vector<PotentialField> psi);

/// Flow of a time-dependent gradient field that is frozen on each cell
/// [t_k, t_{k+1}) and integrated with fixed-step RK4.
class PiecewiseFlow {
public:
    PiecewiseFlow(std::vector<double> times, std::vector<PotentialField> cell_potentials, int substeps);

    int dim() const { return dim_; }
    const Grid& grid() const { return potentials_.front().grid; }
    const std::vector<double>& times() const { return times_; }
    std::size_t cells() const { return potentials_.size(); }
    const PotentialField& potential(std::size_t k) const { return potentials_[k]; }
    int substeps() const { return substeps_; }

    /// Index of the cell holding t (right-continuous; t = t_K maps to the last cell).
    std::size_t cell(double t) const;

    /// U_{s,t}(x); t < s runs backwards.
    Coords map(const Coords& x, double s, double t) const;

    /// One cell's worth of RK4 from x over duration h (negative h runs backwards).
    Coords advance(std::size_t k, const Coords& x, double h, int steps) const;

private:
    int dim_;
    std::vector<double> times_;
    std::vector<PotentialField> potentials_;
    std::vector<spectral::TrigInterpolant> interp_;
    int substeps_;
};

struct MeasureCurve {
    std::vector<double> times;
    std::vector<Measure> states;
    std::vector<PotentialField> potentials;  // velocity potential at each node
    std::vector<double> residuals;           // continuity residual per node for f = first eigenmode
    std::vector<GridDensity> densities;      // density view when the curve started from a density
    std::shared_ptr<const PiecewiseFlow> flow;
    double C1 = 0.0;                          // observed sup |grad Phi_t| on the grid
    std::optional<double> C2;

    std::size_t size() const { return times.size(); }
    /// Density at an arbitrary time from the tracked node densities.
    GridDensity density_at(double t) const;
};

struct FlowOptions {
    int substeps = 4;
    int grid_n = 0;                   // evaluation grid; 0 picks the density's grid or 128 (1D) / 64 (2D)
    std::optional<double> smoothing;  // Euler heat time; defaults to 1/n
    double horizon = 1.0;
};

/// Flow of grad psi on [0, horizon] sampled at steps + 1 equispaced times.
MeasureCurve constant_field_flow(const PotentialField& psi, const Measure& mu0, int steps, double horizon = 1.0,
                                 int substeps = 4);

/// Euler construction on the dyadic partition k 2^-n: each cell follows the frozen,
/// heat-smoothed field grad P_s Phi(mu_{t_k}, .).
MeasureCurve euler_scheme_flow(const MeasureVectorField& Z, const Measure& mu0, int n, const FlowOptions& opt = {});

/// Same scheme without smoothing; needs a declared Hessian bound C2. The flow maps
/// U_{s,t} are available through the curve's `flow`.
MeasureCurve mckean_vlasov_flow(const MeasureVectorField& Z, const Measure& mu0, int n, FlowOptions opt = {});

/// |d/dt int f dc_t - int <grad f, grad Phi_t> dc_t| at every node (centered
/// differences inside, one-sided at the ends).
std::vector<double> continuity_residuals(const MeasureCurve& c, const GridFunction& f);

/// Max over interior nodes of continuity_residuals.
double continuity_residual(const MeasureCurve& c, const GridFunction& f);

} // namespace ottolab
