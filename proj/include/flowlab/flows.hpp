#pragma once

#include <cstddef>
#include <vector>

#include "flowlab/linalg.hpp"
#include "flowlab/losses.hpp"
#include "flowlab/models.hpp"

namespace flowlab::flows {

enum class Integrator { Rk4, Euler };

struct FlowConfig {
    double alpha = 0.0;          // 0 = standard flow, 1 = pseudoinverse-adapted flow
    double step_size = 0.0;
    double max_time = 0.0;
    double stop_grad_norm = 0.0;  // terminate once ||grad_theta C|| falls below
    Integrator integrator = Integrator::Rk4;
    std::size_t record_stride = 1;

    void validate() const;
};

struct TrajectoryRecord {
    double time = 0.0;
    models::ParamVector theta;
    std::vector<double> x_flat;
    double cost = 0.0;
    double grad_theta_norm = 0.0;
    std::size_t jacobian_rank = 0;
};

struct Trajectory {
    std::vector<TrajectoryRecord> records;
    bool diverged = false;
};

/// Everything the interpolated field needs at one parameter point. The Gram
/// pseudoinverse is applied through the SVD of D; the K x K product D^T D is
/// never formed.
struct FieldEvaluation {
    linalg::Matrix jacobian;     // QN x K
    linalg::ThinSvd factors;     // of the Jacobian (empty when skipped)
    bool has_factors = false;
    std::vector<double> x_flat;
    std::vector<double> grad_x;
    std::vector<double> grad_theta;
    std::vector<double> velocity;  // -(alpha (D^T D)^+ + (1-alpha) I) grad_theta
    double cost = 0.0;
    double grad_theta_norm = 0.0;
};

FieldEvaluation evaluate_field(const models::ModelSpec& spec, const models::ParamVector& params,
                               const models::Dataset& data, losses::LossKind loss, double alpha,
                               bool need_factors = true);

/// V_{theta,alpha} = -(alpha (D^T D)^+ + (1-alpha) I) grad_theta C.
std::vector<double> param_field(const models::ModelSpec& spec, const models::ParamVector& params,
                                const models::Dataset& data, losses::LossKind loss, double alpha);

struct OutputFieldSample {
    std::vector<double> predicted_velocity;  // -(alpha I + (1-alpha) D D^T) P_ran(D D^T) grad_x C
    std::vector<double> observed_velocity;   // D * param_field
    double residual_norm = 0.0;
};

OutputFieldSample induced_output_field(const models::ModelSpec& spec,
                                       const models::ParamVector& params,
                                       const models::Dataset& data, losses::LossKind loss,
                                       double alpha);

/// Fixed-step integration of theta' = V_{theta,alpha}. Deterministic for fixed
/// inputs; truncates with the diverged flag if the state leaves the finite range.
Trajectory integrate(const models::ModelSpec& spec, const models::ParamVector& theta0,
                     const models::Dataset& data, losses::LossKind loss, const FlowConfig& config);

struct EquilibriumSweepEntry {
    double alpha = 0.0;
    double field_norm = 0.0;
};

/// ||V_{theta,alpha}|| for each alpha at a fixed parameter point.
std::vector<EquilibriumSweepEntry> equilibrium_sweep(const models::ModelSpec& spec,
                                                     const models::ParamVector& theta_star,
                                                     const models::Dataset& data,
                                                     losses::LossKind loss,
                                                     const std::vector<double>& alphas);

}  // namespace flowlab::flows
