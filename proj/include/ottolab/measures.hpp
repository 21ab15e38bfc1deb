#pragma once

#include "ottolab/grid.hpp"

#include <functional>
#include <optional>
#include <variant>
#include <vector>

namespace ottolab {

inline constexpr double default_rho_min = 1e-8;

/// Density with respect to dx sampled on a periodic grid.
struct GridDensity {
    Grid grid;
    std::vector<double> values;
    double rho_min = default_rho_min;

    GridDensity() = default;
    GridDensity(const Grid& g, std::vector<double> v, double rho_min = default_rho_min);
    GridDensity(const GridFunction& f, double rho_min = default_rho_min);

    std::size_t size() const { return values.size(); }
    double mass() const;
    double min() const;
    bool in_pdiv() const;
    GridFunction as_function() const { return GridFunction(grid, values); }
};

/// Weighted point set on the torus.
struct ParticleCloud {
    int dim = 1;
    std::vector<Coords> points;
    std::vector<double> weights;

    ParticleCloud() = default;
    ParticleCloud(int dim, std::vector<Coords> pts, std::vector<double> w);
    /// Equal weights 1/n.
    static ParticleCloud uniform_weights(int dim, std::vector<Coords> pts);

    std::size_t size() const { return points.size(); }
};

using Measure = std::variant<GridDensity, ParticleCloud>;

int measure_dim(const Measure& m);

/// Scalar potential psi on the grid, gauged to zero dx-mean on construction.
struct PotentialField : GridFunction {
    PotentialField() = default;
    explicit PotentialField(const GridFunction& f);
    /// Skip the gauge (used by solvers that return other gauges).
    static PotentialField ungauged(const GridFunction& f);
};

/// Vector field over a density; carries its potential when it is a gradient.
struct TangentField {
    VectorGridField vectors;
    std::optional<PotentialField> potential;
};

using PointMap = std::function<Coords(const Coords&)>;

GridDensity normalize(const GridDensity& d);

/// Particles move; densities are pushed by mass-conserving linear/bilinear splatting.
Measure pushforward_by_map(const Measure& mu, const PointMap& T);
GridDensity pushforward_by_map(const GridDensity& mu, const PointMap& T);
ParticleCloud pushforward_by_map(const ParticleCloud& mu, const PointMap& T);

/// (U_t)_# mu0 for the flow U of grad psi, via the density ratio along reverse
/// characteristics: K_t(x) = exp(-int_0^t div_mu0(grad psi)(U_{-s} x) ds).
/// Negative t runs the flow backwards.
GridDensity pushforward_density_flow(const GridDensity& mu0, const PotentialField& psi, double t);

/// Wrapped-Gaussian deposit normalized, floored at rho_min and renormalized.
GridDensity particles_to_density(const ParticleCloud& p, int n, double bandwidth,
                                 double rho_min = default_rho_min);

/// Cell quadrature of the node masses as a particle cloud.
ParticleCloud density_to_particles(const GridDensity& d);

/// int f dmu; f is trigonometrically interpolated at particle positions.
double moments(const Measure& mu, const GridFunction& f);
double moments(const GridDensity& mu, const GridFunction& f);
double moments(const ParticleCloud& mu, const GridFunction& f);
double moments(const ParticleCloud& mu, const std::function<double(const Coords&)>& f);

/// Throws not-in-P_div when the density drops below its floor.
void require_pdiv(const GridDensity& mu);

} // namespace ottolab
