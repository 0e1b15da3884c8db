#include "flowlab/reparam.hpp"

#include <cmath>
#include <stdexcept>

#include "flowlab/references.hpp"

namespace flowlab::reparam {

namespace {

linalg::Matrix projector_from(const linalg::ThinSvd& f) { return linalg::range_projector(f); }

double defect_against(const linalg::ThinSvd& f, const std::vector<double>& v) {
    const std::vector<double> projected = linalg::apply_range_projector(f, v);
    return linalg::norm2(linalg::sub(v, projected));
}

}  // namespace

ReparamTrajectory reparametrized_flow(const models::ModelSpec& spec,
                                      const models::ParamVector& theta0,
                                      const models::Dataset& data,
                                      const flows::FlowConfig& config, double t_max) {
    spec.validate();
    if (config.step_size <= 0.0)
        throw std::invalid_argument("reparametrized_flow: step_size must be positive");
    if (config.record_stride == 0)
        throw std::invalid_argument("reparametrized_flow: record_stride must be >= 1");
    if (t_max <= 0.0) throw std::invalid_argument("reparametrized_flow: t_max must be positive");
    if (t_max > kMaxReparamTime + 1e-15)
        throw std::invalid_argument("reparametrized_flow: t_max exceeds the stiffness cap 1 - 1e-3");

    const double n_samples = static_cast<double>(data.sample_count());
    const auto loss = losses::LossKind::Squared;

    ReparamTrajectory traj;
    traj.sample_count = data.sample_count();
    traj.x0 = models::output_flatten(spec, theta0, data);
    traj.y = models::label_flatten(data);

    auto field = [&](double t, const std::vector<double>& th) {
        models::ParamVector p;
        p.theta = th;
        const flows::FieldEvaluation ev =
            flows::evaluate_field(spec, p, data, loss, /*alpha=*/1.0, /*need_factors=*/true);
        return linalg::scaled(n_samples / (1.0 - t), ev.velocity);
    };

    std::vector<double> theta = theta0.theta;
    double t = 0.0;
    std::size_t step_index = 0;

    const std::vector<double> x0_minus_y = linalg::sub(traj.x0, traj.y);

    while (true) {
        if (!linalg::all_finite(theta)) {
            traj.diverged = true;
            break;
        }
        models::ParamVector p;
        p.theta = theta;
        const flows::FieldEvaluation ev = flows::evaluate_field(spec, p, data, loss, 1.0, true);
        if (!linalg::all_finite(ev.velocity) || !linalg::all_finite(ev.x_flat)) {
            traj.diverged = true;
            break;
        }
        const bool last = t >= t_max - 1e-15;
        if (step_index % config.record_stride == 0 || last) {
            if (traj.records.empty() || traj.records.back().t < t) {
                ReparamRecord rec;
                rec.t = t;
                rec.x_flat = ev.x_flat;
                rec.lin_interp_ref.resize(traj.y.size());
                // (1-t) x0 + t y, exact at both endpoints
                for (std::size_t i = 0; i < traj.y.size(); ++i)
                    rec.lin_interp_ref[i] = (1.0 - t) * traj.x0[i] + t * traj.y[i];
                rec.deviation_norm = linalg::norm2(linalg::sub(rec.x_flat, rec.lin_interp_ref));
                rec.projector_defect = defect_against(ev.factors, x0_minus_y);
                traj.records.push_back(std::move(rec));
                traj.projectors.push_back(projector_from(ev.factors));
                traj.thetas.push_back(p);
            }
        }
        if (last) break;

        // the step-start evaluation doubles as the first integrator stage
        const double h = std::min(config.step_size, t_max - t);
        const std::vector<double> k1 = linalg::scaled(n_samples / (1.0 - t), ev.velocity);
        if (config.integrator == flows::Integrator::Rk4) {
            std::vector<double> tmp(theta.size());
            for (std::size_t i = 0; i < theta.size(); ++i) tmp[i] = theta[i] + 0.5 * h * k1[i];
            const std::vector<double> k2 = field(t + 0.5 * h, tmp);
            for (std::size_t i = 0; i < theta.size(); ++i) tmp[i] = theta[i] + 0.5 * h * k2[i];
            const std::vector<double> k3 = field(t + 0.5 * h, tmp);
            for (std::size_t i = 0; i < theta.size(); ++i) tmp[i] = theta[i] + h * k3[i];
            const std::vector<double> k4 = field(t + h, tmp);
            for (std::size_t i = 0; i < theta.size(); ++i)
                theta[i] = theta[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        } else {
            for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += h * k1[i];
        }
        t += h;
        ++step_index;
    }
    return traj;
}

namespace {

// Generator (1/(1-t)) P_t^perp with the projector interpolated linearly
// between consecutive record samples.
class PropagatorGenerator {
public:
    PropagatorGenerator(const linalg::Matrix& p_lo, const linalg::Matrix& p_hi, double t_lo,
                        double t_hi)
        : p_lo_(p_lo), p_hi_(p_hi), t_lo_(t_lo), t_hi_(t_hi) {}

    // M(t) * u
    linalg::Matrix apply(double t, const linalg::Matrix& u) const {
        const std::size_t n = u.rows();
        const double w = t_hi_ > t_lo_ ? (t - t_lo_) / (t_hi_ - t_lo_) : 0.0;
        const double coeff = 1.0 / (1.0 - t);
        linalg::Matrix out(n, u.cols());
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < u.cols(); ++j) {
                double acc = u(i, j);  // identity part of P^perp = I - P
                for (std::size_t k = 0; k < n; ++k) {
                    const double p = (1.0 - w) * p_lo_(i, k) + w * p_hi_(i, k);
                    acc -= p * u(k, j);
                }
                out(i, j) = coeff * acc;
            }
        }
        return out;
    }

private:
    const linalg::Matrix& p_lo_;
    const linalg::Matrix& p_hi_;
    double t_lo_, t_hi_;
};

linalg::Matrix rk4_propagator_step(const PropagatorGenerator& gen, const linalg::Matrix& u,
                                   double t, double h) {
    const linalg::Matrix k1 = gen.apply(t, u);
    const linalg::Matrix k2 = gen.apply(t + 0.5 * h, u + 0.5 * h * k1);
    const linalg::Matrix k3 = gen.apply(t + 0.5 * h, u + 0.5 * h * k2);
    const linalg::Matrix k4 = gen.apply(t + h, u + h * k3);
    return u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

PropagatorState advance_propagator(const ReparamTrajectory& traj, std::size_t from_index,
                                   std::size_t to_index) {
    if (from_index > to_index || to_index >= traj.records.size())
        throw std::invalid_argument("advance_propagator: bad record indices");
    const std::size_t dim = traj.x0.size();
    PropagatorState state;
    state.u = linalg::Matrix::identity(dim);
    state.t_from = traj.records[from_index].t;
    state.t_to = state.t_from;
    for (std::size_t j = from_index; j < to_index; ++j) {
        const double t_lo = traj.records[j].t;
        const double t_hi = traj.records[j + 1].t;
        const PropagatorGenerator gen(traj.projectors[j], traj.projectors[j + 1], t_lo, t_hi);
        state.u = rk4_propagator_step(gen, state.u, t_lo, t_hi - t_lo);
        state.t_to = t_hi;
    }
    return state;
}

namespace {

// Duhamel recursion on the record grid. With v_k = P_k^perp (x0 - y)/(1 - t_k)
// and the running integral R_j = integral over [0, t_j] of U_{t_j, t'} v(t') dt',
// trapezoidal quadrature advances by
//   R_{j+1} = G_j (R_j + h/2 v_j) + h/2 v_{j+1},
// where G_j is the one-interval propagator. The predicted deviation from the
// linear reference is (1 - t_j) R_j.
std::vector<std::vector<double>> propagator_deviations(
    const std::vector<ReparamRecord>& records, const std::vector<linalg::Matrix>& projectors,
    const std::vector<double>& x0_minus_y) {
    const std::size_t dim = x0_minus_y.size();
    std::vector<std::vector<double>> predicted(records.size(), std::vector<double>(dim, 0.0));
    if (records.empty()) return predicted;

    auto v_at = [&](std::size_t k) {
        const double t = records[k].t;
        const std::vector<double> pv = linalg::matvec(projectors[k], x0_minus_y);
        std::vector<double> out(dim);
        for (std::size_t i = 0; i < dim; ++i) out[i] = (x0_minus_y[i] - pv[i]) / (1.0 - t);
        return out;
    };

    std::vector<double> running(dim, 0.0);
    for (std::size_t j = 0; j + 1 < records.size(); ++j) {
        const double t_lo = records[j].t;
        const double t_hi = records[j + 1].t;
        const double h = t_hi - t_lo;
        if (h <= 0.0) throw std::invalid_argument("deviation_via_propagator: times must increase");
        const PropagatorGenerator gen(projectors[j], projectors[j + 1], t_lo, t_hi);

        const std::vector<double> v_lo = v_at(j);
        const std::vector<double> v_hi = v_at(j + 1);
        linalg::Matrix col(dim, 1);
        for (std::size_t i = 0; i < dim; ++i) col(i, 0) = running[i] + 0.5 * h * v_lo[i];
        col = rk4_propagator_step(gen, col, t_lo, h);
        for (std::size_t i = 0; i < dim; ++i) running[i] = col(i, 0) + 0.5 * h * v_hi[i];

        for (std::size_t i = 0; i < dim; ++i) predicted[j + 1][i] = (1.0 - t_hi) * running[i];
    }
    return predicted;
}

}  // namespace

std::vector<std::vector<double>> deviation_via_propagator(
    const std::vector<ReparamRecord>& records,
    const std::vector<linalg::Matrix>& projector_samples) {
    if (records.size() != projector_samples.size())
        throw std::invalid_argument(
            "deviation_via_propagator: record and projector grids have different lengths");
    if (records.empty()) return {};
    const std::size_t dim = records.front().x_flat.size();
    if (records.size() == 1) return {std::vector<double>(dim, 0.0)};

    // lin_interp_ref(t) = y + (1-t)(x0 - y), so two distinct samples recover
    // x0 - y without needing the endpoints explicitly.
    const ReparamRecord& ra = records.front();
    const ReparamRecord& rb = records.back();
    const double dt = rb.t - ra.t;
    if (dt <= 0.0) throw std::invalid_argument("deviation_via_propagator: times must increase");
    std::vector<double> x0_minus_y(dim);
    for (std::size_t i = 0; i < dim; ++i)
        x0_minus_y[i] = (ra.lin_interp_ref[i] - rb.lin_interp_ref[i]) / dt;

    return propagator_deviations(records, projector_samples, x0_minus_y);
}

std::vector<std::vector<double>> deviation_via_propagator(const ReparamTrajectory& traj) {
    if (traj.records.size() != traj.projectors.size())
        throw std::invalid_argument(
            "deviation_via_propagator: record and projector grids have different lengths");
    return propagator_deviations(traj.records, traj.projectors, linalg::sub(traj.x0, traj.y));
}

RankDeficientCase build_rank_deficient_case(bool consistent_labels) {
    const references::ReferenceCase base = references::rank_deficient_case(consistent_labels);
    return RankDeficientCase{base.spec, base.theta0, base.dataset};
}

}  // namespace flowlab::reparam
