#include "flowlab/pathsolve.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "flowlab/ode.hpp"

namespace flowlab::pathsolve {

PrescribedPath PrescribedPath::linear(double end_time) {
    if (end_time <= 0.0) throw std::invalid_argument("PrescribedPath::linear: end_time must be > 0");
    PrescribedPath p;
    p.kind = Kind::LinearInterpolation;
    p.end_time = end_time;
    return p;
}

PrescribedPath PrescribedPath::from_waypoints(
    std::vector<std::pair<double, std::vector<double>>> pts) {
    if (pts.size() < 2)
        throw std::invalid_argument("PrescribedPath: need at least two waypoints");
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        if (!(pts[i].first < pts[i + 1].first))
            throw std::invalid_argument("PrescribedPath: waypoint times must strictly increase");
        if (pts[i].second.size() != pts[i + 1].second.size())
            throw std::invalid_argument("PrescribedPath: waypoint dimensions disagree");
    }
    PrescribedPath p;
    p.kind = Kind::UserWaypoints;
    p.end_time = pts.back().first;
    p.waypoints = std::move(pts);
    return p;
}

namespace {

// Evaluates the prescribed position and velocity. For waypoints the position
// is the piecewise-linear interpolant and the velocity interpolates centered
// node velocities, so dx^/ds is a piecewise-linear function of s.
class PathSampler {
public:
    PathSampler(const PrescribedPath& path, std::vector<double> x0, std::vector<double> target)
        : path_(path), x0_(std::move(x0)), target_(std::move(target)) {
        if (path_.kind == PrescribedPath::Kind::UserWaypoints) {
            const std::size_t m = path_.waypoints.size();
            node_velocity_.resize(m);
            for (std::size_t k = 0; k < m; ++k) {
                const std::size_t lo = k == 0 ? 0 : k - 1;
                const std::size_t hi = k + 1 == m ? k : k + 1;
                const double ds = path_.waypoints[hi].first - path_.waypoints[lo].first;
                node_velocity_[k].resize(dim());
                for (std::size_t i = 0; i < dim(); ++i)
                    node_velocity_[k][i] =
                        (path_.waypoints[hi].second[i] - path_.waypoints[lo].second[i]) / ds;
            }
        }
    }

    std::size_t dim() const {
        return path_.kind == PrescribedPath::Kind::LinearInterpolation
                   ? x0_.size()
                   : path_.waypoints.front().second.size();
    }

    std::vector<double> position(double s) const {
        if (path_.kind == PrescribedPath::Kind::LinearInterpolation) {
            const double w = std::clamp(s / path_.end_time, 0.0, 1.0);
            std::vector<double> out(dim());
            for (std::size_t i = 0; i < out.size(); ++i)
                out[i] = x0_[i] + w * (target_[i] - x0_[i]);
            return out;
        }
        const auto [k, w] = locate(s);
        std::vector<double> out(dim());
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = (1.0 - w) * path_.waypoints[k].second[i] +
                     w * path_.waypoints[k + 1].second[i];
        return out;
    }

    std::vector<double> velocity(double s) const {
        if (path_.kind == PrescribedPath::Kind::LinearInterpolation) {
            std::vector<double> out(dim());
            for (std::size_t i = 0; i < out.size(); ++i)
                out[i] = (target_[i] - x0_[i]) / path_.end_time;
            return out;
        }
        const auto [k, w] = locate(s);
        std::vector<double> out(dim());
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = (1.0 - w) * node_velocity_[k][i] + w * node_velocity_[k + 1][i];
        return out;
    }

private:
    std::pair<std::size_t, double> locate(double s) const {
        const auto& pts = path_.waypoints;
        if (s <= pts.front().first) return {0, 0.0};
        if (s >= pts.back().first) return {pts.size() - 2, 1.0};
        std::size_t k = 0;
        while (k + 2 < pts.size() && pts[k + 1].first <= s) ++k;
        const double w = (s - pts[k].first) / (pts[k + 1].first - pts[k].first);
        return {k, w};
    }

    const PrescribedPath& path_;
    std::vector<double> x0_;
    std::vector<double> target_;
    std::vector<std::vector<double>> node_velocity_;
};

}  // namespace

PathSolveResult solve_prescribed(const models::ModelSpec& spec, const models::ParamVector& theta0,
                                 const models::Dataset& data, const PrescribedPath& path,
                                 const PathSolveConfig& config) {
    spec.validate();
    if (config.step_size <= 0.0)
        throw std::invalid_argument("solve_prescribed: step_size must be positive");
    if (config.record_stride == 0)
        throw std::invalid_argument("solve_prescribed: record_stride must be >= 1");
    if (path.end_time <= 0.0) throw std::invalid_argument("solve_prescribed: empty path");

    const std::vector<double> x0 = models::output_flatten(spec, theta0, data);
    const std::vector<double> target = models::label_flatten(data);
    const PathSampler sampler(path, x0, target);
    if (sampler.dim() != x0.size())
        throw std::invalid_argument("solve_prescribed: path dimension does not match QN");
    if (path.kind == PrescribedPath::Kind::UserWaypoints) {
        const double gap = linalg::norm2(linalg::sub(path.waypoints.front().second, x0));
        if (gap > 1e-6 * (1.0 + linalg::norm2(x0)))
            throw std::invalid_argument(
                "solve_prescribed: path must start at x(theta0); first waypoint is off by " +
                std::to_string(gap));
    }

    PathSolveResult result;

    auto velocity_field = [&](double s, const std::vector<double>& th) {
        models::ParamVector p;
        p.theta = th;
        const linalg::Matrix d = models::jacobian(spec, p, data).matrix;
        const linalg::ThinSvd f = linalg::thin_svd(d);
        std::vector<double> v = sampler.velocity(s);
        if (config.feedback_gain != 0.0) {
            const std::vector<double> x = models::output_flatten(spec, p, data);
            const std::vector<double> xhat = sampler.position(s);
            for (std::size_t i = 0; i < v.size(); ++i)
                v[i] += config.feedback_gain * (xhat[i] - x[i]);
        }
        return linalg::apply_pseudoinverse(f, v);
    };

    std::vector<double> theta = theta0.theta;
    double s = 0.0;
    std::size_t step_index = 0;
    const double end = path.end_time;

    while (true) {
        if (!linalg::all_finite(theta)) {
            result.diverged = true;
            break;
        }
        models::ParamVector p;
        p.theta = theta;
        const linalg::Matrix d = models::jacobian(spec, p, data).matrix;
        const linalg::ThinSvd f = linalg::thin_svd(d);
        const std::vector<double> v = sampler.velocity(s);
        const std::vector<double> pv = linalg::apply_range_projector(f, v);
        const double vnorm = linalg::norm2(v);
        const double defect = linalg::norm2(linalg::sub(v, pv)) / std::max(1.0, vnorm);
        result.range.push_back({s, defect, f.numerical_rank});
        if (defect > config.defect_threshold) result.range_violated = true;

        const bool last = s >= end - 1e-15 * end;
        if (step_index % config.record_stride == 0 || last) {
            if (result.records.empty() || result.records.back().s < s) {
                PathRecord rec;
                rec.s = s;
                rec.theta = p;
                rec.x_realized = models::output_flatten(spec, p, data);
                rec.x_prescribed = sampler.position(s);
                rec.tracking_error = linalg::norm2(linalg::sub(rec.x_realized, rec.x_prescribed));
                result.records.push_back(std::move(rec));
            }
        }
        if (last) break;

        const double h = std::min(config.step_size, end - s);
        if (config.integrator == flows::Integrator::Rk4) {
            theta = ode::rk4_step(velocity_field, s, theta, h);
        } else {
            theta = ode::euler_step(velocity_field, s, theta, h);
        }
        s += h;
        ++step_index;
    }
    return result;
}

double range_condition_probe(const models::ModelSpec& spec, const models::ParamVector& params,
                             const models::Dataset& data, const std::vector<double>& direction) {
    const double dnorm = linalg::norm2(direction);
    if (dnorm == 0.0) throw std::invalid_argument("range_condition_probe: zero direction");
    const linalg::Matrix d = models::jacobian(spec, params, data).matrix;
    if (direction.size() != d.rows())
        throw std::invalid_argument("range_condition_probe: direction length must be QN");
    const linalg::ThinSvd f = linalg::thin_svd(d);
    const std::vector<double> projected = linalg::apply_range_projector(f, direction);
    return linalg::norm2(linalg::sub(direction, projected)) / dnorm;
}

}  // namespace flowlab::pathsolve
