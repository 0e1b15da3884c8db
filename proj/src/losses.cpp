#include "flowlab/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace flowlab::losses {

namespace {

std::size_t block_size(const std::vector<double>& x_flat, const std::vector<double>& y_flat,
                       std::size_t n_samples) {
    if (n_samples == 0) throw std::invalid_argument("loss: n_samples must be >= 1");
    if (x_flat.size() != y_flat.size())
        throw std::invalid_argument("loss: x and y lengths differ (" +
                                    std::to_string(x_flat.size()) + " vs " +
                                    std::to_string(y_flat.size()) + ")");
    if (x_flat.empty() || x_flat.size() % n_samples != 0)
        throw std::invalid_argument("loss: flat length not divisible by sample count");
    return x_flat.size() / n_samples;
}

void require_simplex_blocks(const std::vector<double>& y_flat, std::size_t n_samples,
                            std::size_t q) {
    for (std::size_t n = 0; n < n_samples; ++n) {
        double sum = 0.0;
        for (std::size_t j = 0; j < q; ++j) {
            const double y = y_flat[n * q + j];
            if (y < 0.0)
                throw std::invalid_argument("cross-entropy: label block " + std::to_string(n) +
                                            " has a negative component");
            sum += y;
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw std::invalid_argument("cross-entropy: label block " + std::to_string(n) +
                                        " sums to " + std::to_string(sum) + ", expected 1");
    }
}

}  // namespace

std::vector<double> softmax(const std::vector<double>& z) {
    if (z.empty()) throw std::invalid_argument("softmax: empty input");
    const double zmax = *std::max_element(z.begin(), z.end());
    std::vector<double> out(z.size());
    double denom = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) {
        out[j] = std::exp(z[j] - zmax);
        denom += out[j];
    }
    for (double& v : out) v /= denom;
    return out;
}

double cost(LossKind kind, const std::vector<double>& x_flat, const std::vector<double>& y_flat,
            std::size_t n_samples) {
    const std::size_t q = block_size(x_flat, y_flat, n_samples);
    if (kind == LossKind::Squared) {
        double acc = 0.0;
        for (std::size_t i = 0; i < x_flat.size(); ++i) {
            const double d = x_flat[i] - y_flat[i];
            acc += d * d;
        }
        return acc / (2.0 * static_cast<double>(n_samples));
    }

    require_simplex_blocks(y_flat, n_samples, q);
    double total = 0.0;
    for (std::size_t n = 0; n < n_samples; ++n) {
        const double* z = x_flat.data() + n * q;
        double zmax = z[0];
        for (std::size_t j = 1; j < q; ++j) zmax = std::max(zmax, z[j]);
        double lse = 0.0;
        for (std::size_t j = 0; j < q; ++j) lse += std::exp(z[j] - zmax);
        lse = zmax + std::log(lse);
        for (std::size_t j = 0; j < q; ++j) total -= y_flat[n * q + j] * (z[j] - lse);
    }
    return total;
}

std::vector<double> grad_x(LossKind kind, const std::vector<double>& x_flat,
                           const std::vector<double>& y_flat, std::size_t n_samples) {
    const std::size_t q = block_size(x_flat, y_flat, n_samples);
    std::vector<double> g(x_flat.size());
    if (kind == LossKind::Squared) {
        const double inv_n = 1.0 / static_cast<double>(n_samples);
        for (std::size_t i = 0; i < x_flat.size(); ++i) g[i] = (x_flat[i] - y_flat[i]) * inv_n;
        return g;
    }

    require_simplex_blocks(y_flat, n_samples, q);
    std::vector<double> block(q);
    for (std::size_t n = 0; n < n_samples; ++n) {
        block.assign(x_flat.begin() + static_cast<std::ptrdiff_t>(n * q),
                     x_flat.begin() + static_cast<std::ptrdiff_t>((n + 1) * q));
        const std::vector<double> s = softmax(block);
        for (std::size_t j = 0; j < q; ++j) g[n * q + j] = s[j] - y_flat[n * q + j];
    }
    return g;
}

HessianBlock ce_hessian_block(const std::vector<double>& z) {
    if (!linalg::all_finite(z)) throw std::invalid_argument("ce_hessian_block: non-finite input");
    const std::vector<double> s = softmax(z);
    const std::size_t q = z.size();
    linalg::Matrix h(q, q);
    for (std::size_t i = 0; i < q; ++i) {
        // sigma_i (1 - sigma_i) written as sigma_i * sum_{j != i} sigma_j;
        // the 1 - sigma_i form cancels catastrophically for extreme logits
        double others = 0.0;
        for (std::size_t j = 0; j < q; ++j)
            if (j != i) others += s[j];
        for (std::size_t j = 0; j < q; ++j) {
            h(i, j) = i == j ? s[i] * others : -s[i] * s[j];
        }
    }
    return HessianBlock{std::move(h), z};
}

HessianSpectrumReport ce_hessian_rank_psd_check(const std::vector<double>& z, double rank_scale) {
    const HessianBlock block = ce_hessian_block(z);
    const linalg::SymmetricEigen eig = linalg::symmetric_eigen(block.matrix);
    const std::size_t q = z.size();

    double lambda_max = 0.0;
    for (double v : eig.eigenvalues) lambda_max = std::max(lambda_max, std::abs(v));
    const double tol = static_cast<double>(q) * lambda_max * rank_scale;

    HessianSpectrumReport report;
    for (double v : eig.eigenvalues)
        if (std::abs(v) > tol) ++report.rank;
    report.min_eigenvalue = eig.eigenvalues.empty() ? 0.0 : eig.eigenvalues.front();
    report.rank_collapsed = report.rank + 1 < q;
    return report;
}

}  // namespace flowlab::losses
