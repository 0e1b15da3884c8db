#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "flowlab/linalg.hpp"

namespace flowlab::models {

enum class Activation { Tanh, Softplus, SmoothedRelu };

/// Fully-connected architecture f_theta: R^M -> R^Q. Hidden layers apply the
/// activation; the output layer is affine. An empty hidden list is the plain
/// affine model W x + b.
struct ModelSpec {
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;
    std::vector<std::size_t> hidden_widths;
    Activation activation = Activation::Tanh;
    double smoothed_relu_beta = 10.0;

    // (fan_in, fan_out) per layer, input to output.
    std::vector<std::pair<std::size_t, std::size_t>> layer_shapes() const;
    // K = sum over layers of (fan_in + 1) * fan_out.
    std::size_t param_count() const;
    void validate() const;
};

struct ParamVector {
    std::vector<double> theta;
};

/// Seeded uniform(-r, r) with r = 1/sqrt(fan_in) per layer, drawn in the
/// flattening order (layer by layer, weights row-major, then bias).
ParamVector init_params(const ModelSpec& spec, std::uint64_t seed);

enum class LabelKind { Regression, Simplex };

class Dataset {
public:
    /// inputs: M x N (columns are samples); labels: Q x N. Simplex labels must
    /// have nonnegative components summing to 1 within 1e-12 per sample.
    Dataset(linalg::Matrix inputs, linalg::Matrix labels, LabelKind kind = LabelKind::Regression,
            std::vector<std::size_t> classes = {});

    std::size_t sample_count() const { return inputs_.cols(); }
    std::size_t input_dim() const { return inputs_.rows(); }
    std::size_t label_dim() const { return labels_.rows(); }
    LabelKind label_kind() const { return kind_; }
    bool strictly_positive_labels() const { return strictly_positive_; }
    const std::vector<std::size_t>& classes() const { return classes_; }
    const linalg::Matrix& inputs() const { return inputs_; }
    const linalg::Matrix& labels() const { return labels_; }

    std::vector<double> input(std::size_t n) const;
    std::vector<double> label(std::size_t n) const;

    /// Single-sample restriction (keeps the class index when present).
    Dataset restricted_to(std::size_t n) const;

private:
    linalg::Matrix inputs_;
    linalg::Matrix labels_;
    LabelKind kind_;
    std::vector<std::size_t> classes_;
    bool strictly_positive_ = false;
};

/// D[theta] in R^{QN x K}; row n*Q + q holds d f_theta(x_n)_q / d theta_k.
struct JacobianMatrix {
    linalg::Matrix matrix;
};

std::vector<double> forward(const ModelSpec& spec, const ParamVector& params,
                            const std::vector<double>& input);

/// x(theta) = (f(x_1)^T, ..., f(x_N)^T)^T.
std::vector<double> output_flatten(const ModelSpec& spec, const ParamVector& params,
                                   const Dataset& data);

std::vector<double> label_flatten(const Dataset& data);

/// Exact Jacobian via forward-mode dual propagation, one pass per parameter.
JacobianMatrix jacobian(const ModelSpec& spec, const ParamVector& params, const Dataset& data);

/// Inverse of the flattening: per-sample output blocks.
std::vector<std::vector<double>> unflatten(const std::vector<double>& flat, std::size_t q_dim);

/// Single hidden layer sized so that K >= Q*N.
std::vector<std::size_t> propose_hidden_widths(std::size_t input_dim, std::size_t output_dim,
                                               std::size_t sample_count);

}  // namespace flowlab::models
