#pragma once

#include <cstddef>
#include <vector>

#include "flowlab/linalg.hpp"

namespace flowlab::losses {

enum class LossKind { Squared, CrossEntropy };

/// Numerically stable softmax (max-subtracted before exponentiating).
std::vector<double> softmax(const std::vector<double>& z);

/// Squared: ||x - y||^2 / (2N). Cross-entropy: sum over samples of
/// -y_n . log softmax(x_n-block), computed via a log-sum-exp.
double cost(LossKind kind, const std::vector<double>& x_flat, const std::vector<double>& y_flat,
            std::size_t n_samples);

/// Squared: (x - y)/N. Cross-entropy: per block softmax(x_n) - y_n.
std::vector<double> grad_x(LossKind kind, const std::vector<double>& x_flat,
                           const std::vector<double>& y_flat, std::size_t n_samples);

struct HessianBlock {
    linalg::Matrix matrix;            // diag(softmax(z)) - softmax(z) softmax(z)^T
    std::vector<double> eval_point;
};

HessianBlock ce_hessian_block(const std::vector<double>& z);

struct HessianSpectrumReport {
    std::size_t rank = 0;
    double min_eigenvalue = 0.0;
    // Set when the numerical rank reads below Q-1; expected only for extreme
    // logits where softmax components fall under the rank tolerance.
    bool rank_collapsed = false;
};

HessianSpectrumReport ce_hessian_rank_psd_check(const std::vector<double>& z,
                                                double rank_scale = linalg::kDefaultRankScale);

}  // namespace flowlab::losses
