#pragma once

#include <string>
#include <vector>

#include "flowlab/flows.hpp"
#include "flowlab/pathsolve.hpp"
#include "flowlab/reparam.hpp"

namespace flowlab::csvio {

/// Shortest round-trip decimal form of a double ("%.17g" trimmed); CSV output
/// is byte-stable across runs because every writer goes through this.
std::string format_double(double v);

void write_text_file(const std::string& path, const std::string& contents);

/// Header: s,cost,grad_norm,rank,x_0..x_{QN-1}
std::string trajectory_csv(const flows::Trajectory& traj);
/// Header: s,theta_0..theta_{K-1}
std::string theta_sidecar_csv(const flows::Trajectory& traj);
/// Header: t,deviation_norm,projector_defect,x_0..x_{QN-1}
std::string reparam_csv(const reparam::ReparamTrajectory& traj);
/// Header: s,tracking_error,defect,rank,x_0..,xhat_0..
std::string path_csv(const pathsolve::PathSolveResult& result);
/// Header: alpha,field_norm
std::string sweep_csv(const std::vector<flows::EquilibriumSweepEntry>& sweep);

}  // namespace flowlab::csvio
