#include "flowlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "flowlab/losses.hpp"
#include "flowlab/ode.hpp"

namespace flowlab::analysis {

std::vector<double> ce_equilibrium(const std::vector<double>& f0, const std::vector<double>& y) {
    if (f0.size() != y.size() || y.empty())
        throw std::invalid_argument("ce_equilibrium: f0 and y must have equal positive length");
    double ysum = 0.0;
    for (double v : y) {
        if (v <= 0.0)
            throw std::invalid_argument(
                "ce_equilibrium: labels must have strictly positive components");
        ysum += v;
    }
    if (std::abs(ysum - 1.0) > 1e-12)
        throw std::invalid_argument("ce_equilibrium: label must lie on the simplex, sums to " +
                                    std::to_string(ysum));

    const std::size_t q = y.size();
    double shift = 0.0;
    for (std::size_t j = 0; j < q; ++j) shift += f0[j] - std::log(y[j]);
    shift /= static_cast<double>(q);
    std::vector<double> out(q);
    for (std::size_t j = 0; j < q; ++j) out[j] = std::log(y[j]) + shift;

    // fixed-point and hyperplane postconditions
    const std::vector<double> s = losses::softmax(out);
    double c_in = 0.0, c_out = 0.0, fixed_point_gap = 0.0;
    for (std::size_t j = 0; j < q; ++j) {
        c_in += f0[j];
        c_out += out[j];
        fixed_point_gap = std::max(fixed_point_gap, std::abs(s[j] - y[j]));
    }
    if (fixed_point_gap > 1e-10 || std::abs(c_in - c_out) > 1e-12 * std::max(1.0, std::abs(c_in)))
        throw std::logic_error("ce_equilibrium: postcondition failed (softmax gap " +
                               std::to_string(fixed_point_gap) + ")");
    return out;
}

CeFlowReport ce_flow_convergence(const std::vector<double>& f0, const std::vector<double>& y,
                                 double horizon, double step_size) {
    if (horizon <= 0.0 || step_size <= 0.0)
        throw std::invalid_argument("ce_flow_convergence: horizon and step_size must be positive");
    const std::vector<double> f_star = ce_equilibrium(f0, y);

    auto field = [&](double, const std::vector<double>& f) {
        const std::vector<double> s = losses::softmax(f);
        std::vector<double> v(f.size());
        for (std::size_t j = 0; j < f.size(); ++j) v[j] = y[j] - s[j];
        return v;
    };

    double c0 = 0.0;
    for (double v : f0) c0 += v;

    std::vector<double> f = f0;
    double t = 0.0;
    double drift = 0.0;
    while (t < horizon - 1e-12) {
        const double h = std::min(step_size, horizon - t);
        f = ode::rk4_step(field, t, f, h);
        t += h;
        double c = 0.0;
        for (double v : f) c += v;
        drift = std::max(drift, std::abs(c - c0));
    }

    CeFlowReport report;
    report.terminal_f = f;
    report.distance_to_formula = linalg::norm2(linalg::sub(f, f_star));
    report.hyperplane_drift = drift;
    report.terminal_cost = losses::cost(losses::LossKind::CrossEntropy, f, y, 1);
    return report;
}

HyperplaneRecord hyperplane_conservation(const std::vector<std::vector<double>>& x_samples,
                                         std::size_t q_dim) {
    if (x_samples.empty()) throw std::invalid_argument("hyperplane_conservation: no samples");
    if (q_dim == 0 || x_samples.front().size() % q_dim != 0)
        throw std::invalid_argument("hyperplane_conservation: bad block size");
    const std::size_t n = x_samples.front().size() / q_dim;

    HyperplaneRecord rec;
    rec.reference_sums.assign(n, 0.0);
    rec.max_drift.assign(n, 0.0);
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t j = 0; j < q_dim; ++j) rec.reference_sums[b] += x_samples.front()[b * q_dim + j];

    for (const auto& x : x_samples) {
        if (x.size() != x_samples.front().size())
            throw std::invalid_argument("hyperplane_conservation: inconsistent sample lengths");
        for (std::size_t b = 0; b < n; ++b) {
            double c = 0.0;
            for (std::size_t j = 0; j < q_dim; ++j) c += x[b * q_dim + j];
            rec.max_drift[b] = std::max(rec.max_drift[b], std::abs(c - rec.reference_sums[b]));
        }
    }
    rec.worst_drift = *std::max_element(rec.max_drift.begin(), rec.max_drift.end());
    return rec;
}

HyperplaneRecord hyperplane_conservation(const flows::Trajectory& traj, std::size_t q_dim) {
    std::vector<std::vector<double>> xs;
    xs.reserve(traj.records.size());
    for (const auto& r : traj.records) xs.push_back(r.x_flat);
    return hyperplane_conservation(xs, q_dim);
}

CollapseMetrics collapse_metrics(const std::vector<double>& x_flat, const models::Dataset& data) {
    const std::size_t q = data.label_dim();
    const std::size_t n = data.sample_count();
    if (x_flat.size() != q * n)
        throw std::invalid_argument("collapse_metrics: flattened output has wrong length");
    const auto& classes = data.classes();
    if (classes.empty())
        throw std::invalid_argument("collapse_metrics: dataset carries no class assignment");

    std::size_t n_classes = 0;
    for (std::size_t c : classes) n_classes = std::max(n_classes, c + 1);
    std::vector<std::size_t> counts(n_classes, 0);
    for (std::size_t c : classes) ++counts[c];
    for (std::size_t c = 0; c < n_classes; ++c)
        if (counts[c] == 0)
            throw std::invalid_argument("collapse_metrics: class " + std::to_string(c) +
                                        " has no samples");

    // Every sample of a class must carry the same label.
    std::vector<std::vector<double>> class_label(n_classes);
    for (std::size_t i = 0; i < n; ++i) {
        const std::vector<double> y = data.label(i);
        auto& stored = class_label[classes[i]];
        if (stored.empty()) {
            stored = y;
        } else if (stored != y) {
            throw std::invalid_argument("collapse_metrics: class " +
                                        std::to_string(classes[i]) +
                                        " carries conflicting labels");
        }
    }

    CollapseMetrics m;
    m.class_means.assign(n_classes, std::vector<double>(q, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < q; ++j) m.class_means[classes[i]][j] += x_flat[i * q + j];
    for (std::size_t c = 0; c < n_classes; ++c)
        for (std::size_t j = 0; j < q; ++j) m.class_means[c][j] /= static_cast<double>(counts[c]);

    m.deviations.assign(n, std::vector<double>(q, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < q; ++j) {
            const double d = x_flat[i * q + j] - m.class_means[classes[i]][j];
            m.deviations[i][j] = d;
            m.within_class_energy += d * d;
        }
    }
    for (std::size_t c = 0; c < n_classes; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < q; ++j) {
            const double d = m.class_means[c][j] - class_label[c][j];
            acc += d * d;
        }
        m.mean_mismatch_energy += static_cast<double>(counts[c]) * acc;
    }

    const double c2n = 2.0 * static_cast<double>(n) *
                       losses::cost(losses::LossKind::Squared, x_flat,
                                    models::label_flatten(data), n);
    m.decomposition_residual = std::abs(c2n - (m.within_class_energy + m.mean_mismatch_energy));
    return m;
}

NtkBlocks ntk_blocks(const models::ModelSpec& spec, const models::ParamVector& params,
                     const models::Dataset& data) {
    const std::size_t q = spec.output_dim;
    const std::size_t n = data.sample_count();

    // Per-sample Jacobians Df(x_i) in R^{Q x K}.
    std::vector<linalg::Matrix> per_sample;
    per_sample.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        per_sample.push_back(models::jacobian(spec, params, data.restricted_to(i)).matrix);

    NtkBlocks out;
    out.blocks.assign(n, {});
    out.assembled = linalg::Matrix(q * n, q * n);
    for (std::size_t i = 0; i < n; ++i) {
        out.blocks[i].reserve(n);
        for (std::size_t j = 0; j < n; ++j) {
            linalg::Matrix block = per_sample[i] * linalg::transpose(per_sample[j]);
            for (std::size_t a = 0; a < q; ++a)
                for (std::size_t b = 0; b < q; ++b) out.assembled(i * q + a, j * q + b) = block(a, b);
            out.blocks[i].push_back(std::move(block));
        }
    }

    const linalg::Matrix d = models::jacobian(spec, params, data).matrix;
    const linalg::Matrix gram = d * linalg::transpose(d);
    out.max_abs_diff_vs_gram = linalg::max_abs_diff(out.assembled, gram);

    const linalg::SymmetricEigen eig = linalg::symmetric_eigen(out.assembled);
    out.min_eigenvalue = eig.eigenvalues.empty() ? 0.0 : eig.eigenvalues.front();
    return out;
}

}  // namespace flowlab::analysis
