#pragma once

#include <cstddef>
#include <vector>

#include "flowlab/flows.hpp"
#include "flowlab/linalg.hpp"
#include "flowlab/models.hpp"

namespace flowlab::analysis {

/// Closed-form equilibrium of the per-sample cross-entropy flow:
///   f* = log y + (1/Q) sum_j (f0_j - log y_j) * ones.
/// Requires strictly positive simplex labels. The result satisfies
/// softmax(f*) = y and sum_j f*_j = sum_j f0_j.
std::vector<double> ce_equilibrium(const std::vector<double>& f0, const std::vector<double>& y);

struct CeFlowReport {
    std::vector<double> terminal_f;
    double distance_to_formula = 0.0;  // ||f(horizon) - f*||
    double hyperplane_drift = 0.0;     // max_t |sum_j f_j(t) - sum_j f0_j|
    double terminal_cost = 0.0;        // -y . log softmax(f(horizon))
};

/// RK4 on f' = y - softmax(f) up to the horizon.
CeFlowReport ce_flow_convergence(const std::vector<double>& f0, const std::vector<double>& y,
                                 double horizon, double step_size = 0.01);

struct HyperplaneRecord {
    std::vector<double> reference_sums;  // c_n at the first sample
    std::vector<double> max_drift;       // max_t |c_n(t) - c_n(0)| per sample
    double worst_drift = 0.0;
};

/// Per-sample block-sum conservation along a sequence of flattened outputs.
HyperplaneRecord hyperplane_conservation(const std::vector<std::vector<double>>& x_samples,
                                         std::size_t q_dim);
HyperplaneRecord hyperplane_conservation(const flows::Trajectory& traj, std::size_t q_dim);

struct CollapseMetrics {
    std::vector<std::vector<double>> class_means;
    std::vector<std::vector<double>> deviations;  // per sample, x_n - mean(class of n)
    double within_class_energy = 0.0;             // sum ||deviation||^2
    double mean_mismatch_energy = 0.0;            // sum_j N_j ||mean_j - y_j||^2
    // |2N cost - (within + mismatch)|, the defect of the cost decomposition
    double decomposition_residual = 0.0;
};

/// Class structure of a flattened output; the dataset must carry explicit
/// class indices and identical labels within each class.
CollapseMetrics collapse_metrics(const std::vector<double>& x_flat, const models::Dataset& data);

struct NtkBlocks {
    std::vector<std::vector<linalg::Matrix>> blocks;  // Theta(x_i, x_j), N x N grid of QxQ
    linalg::Matrix assembled;                         // QN x QN
    double min_eigenvalue = 0.0;
    double max_abs_diff_vs_gram = 0.0;  // entrywise gap to D D^T from the stacked Jacobian
};

/// Tangent-kernel grid Theta(x_i, x_j) = Df(x_i) Df(x_j)^T built from
/// per-sample Jacobians, cross-checked against D D^T.
NtkBlocks ntk_blocks(const models::ModelSpec& spec, const models::ParamVector& params,
                     const models::Dataset& data);

}  // namespace flowlab::analysis
