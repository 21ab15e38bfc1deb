#pragma once

#include "ottolab/calculus.hpp"
#include "ottolab/flows.hpp"

#include <string>
#include <vector>

namespace ottolab {

/// Extension of per-node data along a curve of densities to a tube around it.
/// Anchor i owns the ball B(c_{t_i}, r_i) and the reparametrization
/// beta_i = inverse of t -> F_{Phi_{t_i}}(c_t) on its monotone node range.
class CurveFieldExtension {
public:
    struct Anchor {
        std::size_t node;
        double radius;
        std::size_t lo, hi;          // monotone node range of alpha_i
        std::vector<double> alpha;   // F_{Phi_{t_i}}(c_{t_j}) for j in [lo, hi]
    };

    CurveFieldExtension(std::vector<double> times, std::vector<GridDensity> nodes, std::vector<PotentialField> phi,
                        std::vector<PotentialField> data, std::vector<Anchor> anchors);

    const std::vector<Anchor>& anchors() const { return anchors_; }
    const std::vector<double>& times() const { return times_; }

    /// Normalized bump weights alpha_i(mu); empty when mu lies outside the tube.
    std::vector<double> weights(const GridDensity& mu) const;
    bool in_tube(const GridDensity& mu) const { return !weights(mu).empty(); }

    /// beta_i(F_{Phi_{t_i}}(mu)), or a negative value when F falls outside J(t_i).
    double reparametrize(std::size_t anchor, const GridDensity& mu) const;

    /// sum_i alpha_i(mu) data_{beta_i(F(mu))}; raises degenerate_curve outside the tube.
    PotentialField evaluate(const GridDensity& mu) const;

    /// Data at an arbitrary curve time (linear between nodes).
    PotentialField data_at(double t) const;

private:
    std::vector<double> times_;
    std::vector<GridDensity> nodes_;
    std::vector<PotentialField> phi_;
    std::vector<PotentialField> data_;
    std::vector<Anchor> anchors_;
};

struct ExtensionOptions {
    double speed_min = 1e-6;
};

/// Requires a density track on the curve. `data` has one potential per node.
CurveFieldExtension extend_along_curve(const MeasureCurve& c, const std::vector<PotentialField>& data,
                                       const ExtensionOptions& opt = {});

struct TransportedField {
    std::string scheme;
    std::vector<double> times;
    std::vector<PotentialField> fields;
    std::vector<double> norms;            // ||grad Psi_t||^2 in L^2(c_t)
    std::vector<double> pre_projection;   // discrete scheme: ||u o U^-1||^2 before each projection
};

/// Explicit midpoint integration of d/dt grad Psi + Pi(Hess Psi grad Phi_t) = 0 with
/// at least `substeps` steps per curve cell (more when the advection CFL needs
/// them). Output at the curve nodes.
TransportedField parallel_transport_ode(const MeasureCurve& c, const PotentialField& psi0, int substeps = 1,
                                        const EllipticOptions& opt = {});

/// P_D = P_{1,t_{n-1}} o ... o P_{t_1,0} on the subdivision made of every `stride`-th node.
TransportedField parallel_transport_discrete(const MeasureCurve& c, const PotentialField& psi0, std::size_t stride = 1,
                                             const EllipticOptions& opt = {});

/// ||grad Psi_t||^2_{c_t} - ||grad Psi_0||^2_{c_0} at each output time.
std::vector<double> norm_drift(const TransportedField& f);
std::vector<double> norm_drift(const MeasureCurve& c, const std::vector<PotentialField>& fields,
                               const std::vector<double>& times);

/// Curve driven by the given frozen cell potentials, with a density track.
MeasureCurve potential_flow_curve(std::vector<double> times, std::vector<PotentialField> cell_potentials,
                                  const GridDensity& mu0, int substeps = 4);

} // namespace ottolab
