#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "flowlab/flows.hpp"
#include "flowlab/models.hpp"

namespace flowlab::pathsolve {

/// Target path x^(s) in output space. The linear kind runs from x(theta0) at
/// s = 0 to the dataset labels at s = T with constant velocity; the waypoint
/// kind interpolates user samples with a piecewise-linear velocity (node
/// velocities by centered differences).
struct PrescribedPath {
    enum class Kind { LinearInterpolation, UserWaypoints };
    Kind kind = Kind::LinearInterpolation;
    double end_time = 1.0;
    std::vector<std::pair<double, std::vector<double>>> waypoints;  // (s, x), ascending in s

    static PrescribedPath linear(double end_time);
    static PrescribedPath from_waypoints(std::vector<std::pair<double, std::vector<double>>> pts);
};

struct PathSolveConfig {
    double step_size = 0.0;
    std::size_t record_stride = 1;
    // kappa in the optional closed-loop variant theta' = D^+(v + kappa (x^ - x));
    // 0 keeps the solver open-loop.
    double feedback_gain = 0.0;
    // Relative defect above this marks the run range-violated.
    double defect_threshold = 1e-6;
    flows::Integrator integrator = flows::Integrator::Rk4;
};

struct RangeSample {
    double s = 0.0;
    double defect = 0.0;  // ||P^perp_ran(D) dx^/ds|| / max(1, ||dx^/ds||)
    std::size_t rank = 0;
};

struct PathRecord {
    double s = 0.0;
    models::ParamVector theta;
    std::vector<double> x_realized;
    std::vector<double> x_prescribed;
    double tracking_error = 0.0;
};

struct PathSolveResult {
    std::vector<PathRecord> records;
    std::vector<RangeSample> range;  // one per integration step
    bool range_violated = false;
    bool diverged = false;
};

/// Integrates theta' = D^+(theta) dx^/ds and reports realized-vs-prescribed
/// tracking together with the range condition diagnostics. A defect above the
/// threshold marks the result range-violated but does not abort the run.
PathSolveResult solve_prescribed(const models::ModelSpec& spec, const models::ParamVector& theta0,
                                 const models::Dataset& data, const PrescribedPath& path,
                                 const PathSolveConfig& config);

/// One-shot range test: ||P^perp_ran(D) direction|| / ||direction||.
double range_condition_probe(const models::ModelSpec& spec, const models::ParamVector& params,
                             const models::Dataset& data, const std::vector<double>& direction);

}  // namespace flowlab::pathsolve
