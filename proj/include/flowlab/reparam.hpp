#pragma once

#include <cstddef>
#include <vector>

#include "flowlab/flows.hpp"
#include "flowlab/linalg.hpp"
#include "flowlab/models.hpp"

namespace flowlab::reparam {

/// Largest admissible t_max; the 1/(1-t) coefficient makes the substituted
/// flow stiff near t = 1.
inline constexpr double kMaxReparamTime = 1.0 - 1e-3;

struct ReparamRecord {
    double t = 0.0;
    std::vector<double> x_flat;          // x~(t)
    std::vector<double> lin_interp_ref;  // y + (1-t)(x0 - y)
    double deviation_norm = 0.0;
    double projector_defect = 0.0;       // ||P_t^perp (x0 - y)||
};

struct ReparamTrajectory {
    std::vector<ReparamRecord> records;
    std::vector<linalg::Matrix> projectors;     // P_t sampled at each record
    std::vector<models::ParamVector> thetas;    // theta at each record
    std::vector<double> x0;
    std::vector<double> y;
    std::size_t sample_count = 0;
    bool diverged = false;
};

/// Integrates the adapted (alpha = 1) squared-loss flow directly in the
/// variable t = 1 - e^{-s/N}: theta'(t) = (N/(1-t)) * adapted field. The
/// config's step size and record stride are read in t units; alpha, max_time
/// and the stop rule are ignored.
ReparamTrajectory reparametrized_flow(const models::ModelSpec& spec,
                                      const models::ParamVector& theta0,
                                      const models::Dataset& data,
                                      const flows::FlowConfig& config, double t_max);

struct PropagatorState {
    linalg::Matrix u;  // U_{t_to, t_from}
    double t_from = 0.0;
    double t_to = 0.0;
};

/// Advances U' = (1/(1-t)) P_t^perp U from record `from_index` to `to_index`
/// by one RK4 step per record interval, interpolating the sampled projectors.
PropagatorState advance_propagator(const ReparamTrajectory& traj, std::size_t from_index,
                                   std::size_t to_index);

/// Predicted deviation from linear interpolation at every record:
///   integral over [0, t] of U_{t,t'} ((1-t)/(1-t')) P_{t'}^perp (x0 - y) dt'
/// evaluated by trapezoidal quadrature on the record grid.
std::vector<std::vector<double>> deviation_via_propagator(
    const std::vector<ReparamRecord>& records, const std::vector<linalg::Matrix>& projector_samples);

std::vector<std::vector<double>> deviation_via_propagator(const ReparamTrajectory& traj);

struct RankDeficientCase {
    models::ModelSpec spec;
    models::ParamVector theta0;
    models::Dataset dataset;
};

/// Duplicated-input configuration with certified rank loss: two identical
/// training inputs force identical Jacobian rows, so rank(D) <= Q(N-1) < QN.
/// Inconsistent labels (the default) put a component of x0 - y outside ran(D).
RankDeficientCase build_rank_deficient_case(bool consistent_labels = false);

}  // namespace flowlab::reparam
