#include "flowlab/models.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "flowlab/dual.hpp"

namespace flowlab::models {

namespace {

inline double act_tanh(double z) { return std::tanh(z); }
inline Dual act_tanh(Dual z) { return tanh(z); }
inline double act_softplus(double z) { return stable_softplus(z); }
inline Dual act_softplus(Dual z) { return softplus(z); }

template <typename Scalar>
Scalar apply_activation(Scalar z, Activation act, double beta) {
    switch (act) {
        case Activation::Tanh:
            return act_tanh(z);
        case Activation::Softplus:
            return act_softplus(z);
        case Activation::SmoothedRelu:
            return act_softplus(z * beta) * (1.0 / beta);
    }
    throw std::logic_error("unknown activation");
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> ModelSpec::layer_shapes() const {
    std::vector<std::pair<std::size_t, std::size_t>> shapes;
    std::size_t fan_in = input_dim;
    for (std::size_t h : hidden_widths) {
        shapes.emplace_back(fan_in, h);
        fan_in = h;
    }
    shapes.emplace_back(fan_in, output_dim);
    return shapes;
}

std::size_t ModelSpec::param_count() const {
    std::size_t k = 0;
    for (auto [fan_in, fan_out] : layer_shapes()) k += (fan_in + 1) * fan_out;
    return k;
}

void ModelSpec::validate() const {
    if (input_dim == 0 || output_dim == 0)
        throw std::invalid_argument("ModelSpec: input_dim and output_dim must be >= 1");
    for (std::size_t h : hidden_widths)
        if (h == 0) throw std::invalid_argument("ModelSpec: hidden widths must be >= 1");
    if (activation == Activation::SmoothedRelu && smoothed_relu_beta <= 0.0)
        throw std::invalid_argument("ModelSpec: smoothed_relu beta must be positive");
}

ParamVector init_params(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::mt19937_64 gen(seed);
    auto next_unit = [&gen]() {
        // 53 uniform bits in [0,1); keeps the draw sequence platform-independent
        return static_cast<double>(gen() >> 11) * 0x1.0p-53;
    };
    ParamVector params;
    params.theta.reserve(spec.param_count());
    for (auto [fan_in, fan_out] : spec.layer_shapes()) {
        const double r = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (std::size_t i = 0; i < (fan_in + 1) * fan_out; ++i) {
            params.theta.push_back(-r + 2.0 * r * next_unit());
        }
    }
    return params;
}

Dataset::Dataset(linalg::Matrix inputs, linalg::Matrix labels, LabelKind kind,
                 std::vector<std::size_t> classes)
    : inputs_(std::move(inputs)), labels_(std::move(labels)), kind_(kind),
      classes_(std::move(classes)) {
    if (inputs_.cols() != labels_.cols())
        throw std::invalid_argument("Dataset: inputs and labels disagree on sample count");
    if (inputs_.cols() == 0) throw std::invalid_argument("Dataset: need at least one sample");
    if (!classes_.empty() && classes_.size() != inputs_.cols())
        throw std::invalid_argument("Dataset: class list length must match sample count");
    linalg::require_finite(inputs_, "Dataset inputs");
    linalg::require_finite(labels_, "Dataset labels");

    strictly_positive_ = true;
    for (std::size_t n = 0; n < labels_.cols(); ++n) {
        double sum = 0.0;
        for (std::size_t q = 0; q < labels_.rows(); ++q) {
            const double y = labels_(q, n);
            sum += y;
            if (y <= 0.0) strictly_positive_ = false;
            if (kind_ == LabelKind::Simplex && y < 0.0)
                throw std::invalid_argument("Dataset: simplex label has a negative component in sample " +
                                            std::to_string(n));
        }
        if (kind_ == LabelKind::Simplex && std::abs(sum - 1.0) > 1e-12)
            throw std::invalid_argument("Dataset: simplex label of sample " + std::to_string(n) +
                                        " sums to " + std::to_string(sum));
    }
}

std::vector<double> Dataset::input(std::size_t n) const {
    std::vector<double> out(inputs_.rows());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = inputs_(i, n);
    return out;
}

std::vector<double> Dataset::label(std::size_t n) const {
    std::vector<double> out(labels_.rows());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = labels_(i, n);
    return out;
}

Dataset Dataset::restricted_to(std::size_t n) const {
    if (n >= sample_count()) throw std::invalid_argument("Dataset::restricted_to: index out of range");
    linalg::Matrix in(inputs_.rows(), 1);
    for (std::size_t i = 0; i < inputs_.rows(); ++i) in(i, 0) = inputs_(i, n);
    linalg::Matrix lab(labels_.rows(), 1);
    for (std::size_t i = 0; i < labels_.rows(); ++i) lab(i, 0) = labels_(i, n);
    std::vector<std::size_t> cls;
    if (!classes_.empty()) cls = {classes_[n]};
    return Dataset(std::move(in), std::move(lab), kind_, std::move(cls));
}

namespace {

void check_eval_args(const ModelSpec& spec, const ParamVector& params,
                     std::size_t input_len) {
    spec.validate();
    if (params.theta.size() != spec.param_count())
        throw std::invalid_argument("forward: parameter vector has length " +
                                    std::to_string(params.theta.size()) + ", expected " +
                                    std::to_string(spec.param_count()));
    if (input_len != spec.input_dim)
        throw std::invalid_argument("forward: input has length " + std::to_string(input_len) +
                                    ", expected " + std::to_string(spec.input_dim));
    if (!linalg::all_finite(params.theta))
        throw std::invalid_argument("forward: parameter vector has non-finite entries");
}

// Network evaluation with one dual tangent seeded at theta[seed]. Scratch
// buffers avoid reallocation across the per-parameter sweep in jacobian().
void eval_dual(const ModelSpec& spec, const std::vector<double>& theta, std::size_t seed,
               const std::vector<double>& input, std::vector<Dual>& a, std::vector<Dual>& b,
               std::vector<Dual>& out) {
    a.assign(input.size(), Dual{});
    for (std::size_t i = 0; i < input.size(); ++i) a[i] = {input[i], 0.0};

    const auto shapes = spec.layer_shapes();
    std::size_t idx = 0;
    for (std::size_t layer = 0; layer < shapes.size(); ++layer) {
        const auto [fan_in, fan_out] = shapes[layer];
        const bool last = layer + 1 == shapes.size();
        b.assign(fan_out, Dual{});
        const std::size_t bias_base = idx + fan_in * fan_out;
        for (std::size_t j = 0; j < fan_out; ++j) {
            const std::size_t bias_idx = bias_base + j;
            Dual z{theta[bias_idx], bias_idx == seed ? 1.0 : 0.0};
            const std::size_t row = idx + j * fan_in;
            for (std::size_t m = 0; m < fan_in; ++m) {
                const std::size_t widx = row + m;
                const Dual w{theta[widx], widx == seed ? 1.0 : 0.0};
                z = z + w * a[m];
            }
            b[j] = last ? z : apply_activation(z, spec.activation, spec.smoothed_relu_beta);
        }
        idx = bias_base + fan_out;
        std::swap(a, b);
    }
    out = a;
}

std::vector<double> eval_plain(const ModelSpec& spec, const std::vector<double>& theta,
                               const std::vector<double>& input) {
    std::vector<double> a(input);
    std::vector<double> b;
    const auto shapes = spec.layer_shapes();
    std::size_t idx = 0;
    for (std::size_t layer = 0; layer < shapes.size(); ++layer) {
        const auto [fan_in, fan_out] = shapes[layer];
        const bool last = layer + 1 == shapes.size();
        b.assign(fan_out, 0.0);
        const std::size_t bias_base = idx + fan_in * fan_out;
        for (std::size_t j = 0; j < fan_out; ++j) {
            double z = theta[bias_base + j];
            const std::size_t row = idx + j * fan_in;
            for (std::size_t m = 0; m < fan_in; ++m) z += theta[row + m] * a[m];
            b[j] = last ? z : apply_activation(z, spec.activation, spec.smoothed_relu_beta);
        }
        idx = bias_base + fan_out;
        std::swap(a, b);
    }
    return a;
}

}  // namespace

std::vector<double> forward(const ModelSpec& spec, const ParamVector& params,
                            const std::vector<double>& input) {
    check_eval_args(spec, params, input.size());
    return eval_plain(spec, params.theta, input);
}

std::vector<double> output_flatten(const ModelSpec& spec, const ParamVector& params,
                                   const Dataset& data) {
    check_eval_args(spec, params, data.input_dim());
    if (data.label_dim() != spec.output_dim)
        throw std::invalid_argument("output_flatten: label dimension does not match output_dim");
    std::vector<double> out;
    out.reserve(spec.output_dim * data.sample_count());
    for (std::size_t n = 0; n < data.sample_count(); ++n) {
        const std::vector<double> y = eval_plain(spec, params.theta, data.input(n));
        out.insert(out.end(), y.begin(), y.end());
    }
    return out;
}

std::vector<double> label_flatten(const Dataset& data) {
    std::vector<double> out;
    out.reserve(data.label_dim() * data.sample_count());
    for (std::size_t n = 0; n < data.sample_count(); ++n) {
        const std::vector<double> y = data.label(n);
        out.insert(out.end(), y.begin(), y.end());
    }
    return out;
}

JacobianMatrix jacobian(const ModelSpec& spec, const ParamVector& params, const Dataset& data) {
    check_eval_args(spec, params, data.input_dim());
    const std::size_t q = spec.output_dim;
    const std::size_t n_samples = data.sample_count();
    const std::size_t k_params = spec.param_count();

    linalg::Matrix d(q * n_samples, k_params);
    std::vector<Dual> buf_a, buf_b, out;
    for (std::size_t n = 0; n < n_samples; ++n) {
        const std::vector<double> x = data.input(n);
        for (std::size_t k = 0; k < k_params; ++k) {
            eval_dual(spec, params.theta, k, x, buf_a, buf_b, out);
            for (std::size_t j = 0; j < q; ++j) d(n * q + j, k) = out[j].deriv;
        }
    }
    return JacobianMatrix{std::move(d)};
}

std::vector<std::vector<double>> unflatten(const std::vector<double>& flat, std::size_t q_dim) {
    if (q_dim == 0 || flat.size() % q_dim != 0)
        throw std::invalid_argument("unflatten: length not divisible by block size");
    std::vector<std::vector<double>> out(flat.size() / q_dim);
    for (std::size_t n = 0; n < out.size(); ++n)
        out[n].assign(flat.begin() + static_cast<std::ptrdiff_t>(n * q_dim),
                      flat.begin() + static_cast<std::ptrdiff_t>((n + 1) * q_dim));
    return out;
}

std::vector<std::size_t> propose_hidden_widths(std::size_t input_dim, std::size_t output_dim,
                                               std::size_t sample_count) {
    // Want (M+1)H + (H+1)Q >= QN; solve for the smallest such H.
    const std::size_t target = output_dim * sample_count;
    const std::size_t denom = input_dim + 1 + output_dim;
    std::size_t h = 1;
    if (target > output_dim) h = (target - output_dim + denom - 1) / denom;
    if (h == 0) h = 1;
    return {h};
}

}  // namespace flowlab::models
