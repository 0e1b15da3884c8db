#include "flowlab/flows.hpp"

#include <cmath>
#include <stdexcept>

namespace flowlab::flows {

void FlowConfig::validate() const {
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("FlowConfig: alpha must be in [0,1]");
    if (step_size <= 0.0) throw std::invalid_argument("FlowConfig: step_size must be positive");
    if (max_time <= 0.0) throw std::invalid_argument("FlowConfig: max_time must be positive");
    if (stop_grad_norm < 0.0)
        throw std::invalid_argument("FlowConfig: stop_grad_norm must be nonnegative");
    if (record_stride == 0) throw std::invalid_argument("FlowConfig: record_stride must be >= 1");
}

FieldEvaluation evaluate_field(const models::ModelSpec& spec, const models::ParamVector& params,
                               const models::Dataset& data, losses::LossKind loss, double alpha,
                               bool need_factors) {
    FieldEvaluation ev;
    ev.jacobian = models::jacobian(spec, params, data).matrix;
    ev.x_flat = models::output_flatten(spec, params, data);
    const std::vector<double> y_flat = models::label_flatten(data);
    ev.cost = losses::cost(loss, ev.x_flat, y_flat, data.sample_count());
    ev.grad_x = losses::grad_x(loss, ev.x_flat, y_flat, data.sample_count());
    ev.grad_theta = linalg::matvec_transposed(ev.jacobian, ev.grad_x);
    ev.grad_theta_norm = linalg::norm2(ev.grad_theta);

    if (need_factors || alpha > 0.0) {
        ev.factors = linalg::thin_svd(ev.jacobian);
        ev.has_factors = true;
    }

    if (alpha > 0.0) {
        const std::vector<double> adapted =
            linalg::apply_gram_pseudoinverse(ev.factors, ev.grad_theta);
        ev.velocity.resize(ev.grad_theta.size());
        for (std::size_t i = 0; i < ev.velocity.size(); ++i)
            ev.velocity[i] = -(alpha * adapted[i] + (1.0 - alpha) * ev.grad_theta[i]);
    } else {
        ev.velocity = linalg::scaled(-1.0, ev.grad_theta);
    }
    return ev;
}

std::vector<double> param_field(const models::ModelSpec& spec, const models::ParamVector& params,
                                const models::Dataset& data, losses::LossKind loss, double alpha) {
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("param_field: alpha must be in [0,1]");
    return evaluate_field(spec, params, data, loss, alpha, /*need_factors=*/false).velocity;
}

OutputFieldSample induced_output_field(const models::ModelSpec& spec,
                                       const models::ParamVector& params,
                                       const models::Dataset& data, losses::LossKind loss,
                                       double alpha) {
    if (alpha < 0.0 || alpha > 1.0)
        throw std::invalid_argument("induced_output_field: alpha must be in [0,1]");
    const FieldEvaluation ev = evaluate_field(spec, params, data, loss, alpha, /*need_factors=*/true);

    const std::vector<double> projected = linalg::apply_range_projector(ev.factors, ev.grad_x);
    const std::vector<double> gram_part = linalg::apply_gram(ev.factors, projected);

    OutputFieldSample sample;
    sample.predicted_velocity.resize(projected.size());
    for (std::size_t i = 0; i < projected.size(); ++i)
        sample.predicted_velocity[i] = -(alpha * projected[i] + (1.0 - alpha) * gram_part[i]);
    sample.observed_velocity = linalg::matvec(ev.jacobian, ev.velocity);
    sample.residual_norm =
        linalg::norm2(linalg::sub(sample.predicted_velocity, sample.observed_velocity));
    return sample;
}

namespace {

bool state_ok(const std::vector<double>& v) { return linalg::all_finite(v); }

TrajectoryRecord make_record(double time, const std::vector<double>& theta,
                             const FieldEvaluation& ev, std::size_t rank) {
    TrajectoryRecord rec;
    rec.time = time;
    rec.theta.theta = theta;
    rec.x_flat = ev.x_flat;
    rec.cost = ev.cost;
    rec.grad_theta_norm = ev.grad_theta_norm;
    rec.jacobian_rank = rank;
    return rec;
}

}  // namespace

Trajectory integrate(const models::ModelSpec& spec, const models::ParamVector& theta0,
                     const models::Dataset& data, losses::LossKind loss, const FlowConfig& config) {
    config.validate();
    spec.validate();

    Trajectory traj;
    std::vector<double> theta = theta0.theta;
    double s = 0.0;
    std::size_t step_index = 0;

    auto field = [&](double, const std::vector<double>& th) {
        models::ParamVector p;
        p.theta = th;
        return evaluate_field(spec, p, data, loss, config.alpha, /*need_factors=*/false).velocity;
    };

    while (true) {
        if (!state_ok(theta)) {
            traj.diverged = true;
            break;
        }
        models::ParamVector p;
        p.theta = theta;
        // The rank diagnostic is only refreshed at record times; alpha = 0
        // otherwise never needs the SVD.
        const bool record_now = (step_index % config.record_stride == 0);
        FieldEvaluation ev = evaluate_field(spec, p, data, loss, config.alpha, record_now);
        if (!state_ok(ev.velocity) || !std::isfinite(ev.cost)) {
            traj.diverged = true;
            break;
        }
        const bool stop = (ev.grad_theta_norm <= config.stop_grad_norm) ||
                          (s >= config.max_time - 1e-15 * config.max_time);
        if (record_now || stop) {
            if (traj.records.empty() || traj.records.back().time < s) {
                if (!ev.has_factors) {
                    ev.factors = linalg::thin_svd(ev.jacobian);
                    ev.has_factors = true;
                }
                traj.records.push_back(make_record(s, theta, ev, ev.factors.numerical_rank));
            }
        }
        if (stop) break;

        // ev.velocity doubles as the first integrator stage
        const double h = std::min(config.step_size, config.max_time - s);
        if (config.integrator == Integrator::Rk4) {
            const std::vector<double>& k1 = ev.velocity;
            std::vector<double> tmp(theta.size());
            for (std::size_t i = 0; i < theta.size(); ++i) tmp[i] = theta[i] + 0.5 * h * k1[i];
            const std::vector<double> k2 = field(s + 0.5 * h, tmp);
            for (std::size_t i = 0; i < theta.size(); ++i) tmp[i] = theta[i] + 0.5 * h * k2[i];
            const std::vector<double> k3 = field(s + 0.5 * h, tmp);
            for (std::size_t i = 0; i < theta.size(); ++i) tmp[i] = theta[i] + h * k3[i];
            const std::vector<double> k4 = field(s + h, tmp);
            for (std::size_t i = 0; i < theta.size(); ++i)
                theta[i] = theta[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        } else {
            for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += h * ev.velocity[i];
        }
        s += h;
        ++step_index;
    }
    return traj;
}

std::vector<EquilibriumSweepEntry> equilibrium_sweep(const models::ModelSpec& spec,
                                                     const models::ParamVector& theta_star,
                                                     const models::Dataset& data,
                                                     losses::LossKind loss,
                                                     const std::vector<double>& alphas) {
    std::vector<EquilibriumSweepEntry> out;
    out.reserve(alphas.size());
    for (double a : alphas) {
        const std::vector<double> v = param_field(spec, theta_star, data, loss, a);
        out.push_back({a, linalg::norm2(v)});
    }
    return out;
}

}  // namespace flowlab::flows
