#include "flowlab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <string>

namespace flowlab::linalg {

namespace {

void check_shape(std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0) {
        throw std::invalid_argument("Matrix: rows and cols must both be >= 1");
    }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {
    check_shape(rows, cols);
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
    check_shape(rows, cols);
    if (data_.size() != rows * cols) {
        throw std::invalid_argument("Matrix: entry count " + std::to_string(data_.size()) +
                                    " does not match shape " + std::to_string(rows) + "x" +
                                    std::to_string(cols));
    }
    require_finite(*this, "Matrix construction");
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    if (r == 0) throw std::invalid_argument("Matrix::from_rows: empty row list");
    const std::size_t c = rows.begin()->size();
    std::vector<double> entries;
    entries.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw std::invalid_argument("Matrix::from_rows: ragged rows");
        entries.insert(entries.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(entries));
}

void require_finite(const Matrix& a, const char* context) {
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            if (!std::isfinite(a(i, j))) {
                char buf[160];
                std::snprintf(buf, sizeof(buf), "%s: entry (%zu,%zu) is not finite (%g)", context, i,
                              j, a(i, j));
                throw std::invalid_argument(buf);
            }
        }
    }
}

Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("Matrix multiply: inner dimension mismatch");
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
        }
    }
    return out;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("Matrix add: shape mismatch");
    Matrix out = a;
    for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] += b.data()[i];
    return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("Matrix subtract: shape mismatch");
    Matrix out = a;
    for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] -= b.data()[i];
    return out;
}

Matrix operator*(double s, const Matrix& a) {
    Matrix out = a;
    for (double& v : out.data()) v *= s;
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

std::vector<double> matvec(const Matrix& a, const std::vector<double>& x) {
    if (x.size() != a.cols()) throw std::invalid_argument("matvec: dimension mismatch");
    std::vector<double> out(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) acc += a(i, j) * x[j];
        out[i] = acc;
    }
    return out;
}

std::vector<double> matvec_transposed(const Matrix& a, const std::vector<double>& x) {
    if (x.size() != a.rows()) throw std::invalid_argument("matvec_transposed: dimension mismatch");
    std::vector<double> out(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        for (std::size_t j = 0; j < a.cols(); ++j) out[j] += a(i, j) * xi;
    }
    return out;
}

double frobenius_norm(const Matrix& a) {
    double acc = 0.0;
    for (double v : a.data()) acc += v * v;
    return std::sqrt(acc);
}

double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double v : a.data()) m = std::max(m, std::abs(v));
    return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i)
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

bool all_finite(const Matrix& a) {
    for (double v : a.data())
        if (!std::isfinite(v)) return false;
    return true;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm2(const std::vector<double>& a) {
    double acc = 0.0;
    for (double v : a) acc += v * v;
    return std::sqrt(acc);
}

double max_abs(const std::vector<double>& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

bool all_finite(const std::vector<double>& a) {
    for (double v : a)
        if (!std::isfinite(v)) return false;
    return true;
}

std::vector<double> sub(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("sub: size mismatch");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

std::vector<double> add(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("add: size mismatch");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

std::vector<double> scaled(double s, const std::vector<double>& a) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = s * a[i];
    return out;
}

void axpy(double s, const std::vector<double>& x, std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("axpy: size mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += s * x[i];
}

namespace {

// Hestenes one-sided Jacobi on the rows of `work` (each row of `work` is a
// column of the matrix being factored). `accum` accumulates the right factor
// the same way. Terminates when every pair is orthogonal relative to the
// product of the column norms.
void one_sided_jacobi(Matrix& work, Matrix& accum) {
    const std::size_t n = work.rows();
    const std::size_t m = work.cols();
    const double eps = 1e-15;
    const int max_sweeps = 60;

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    const double xp = work(p, i);
                    const double xq = work(q, i);
                    app += xp * xp;
                    aqq += xq * xq;
                    apq += xp * xq;
                }
                if (apq == 0.0) continue;
                if (std::abs(apq) <= eps * std::sqrt(app * aqq)) continue;
                rotated = true;
                const double zeta = (aqq - app) / (2.0 * apq);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < m; ++i) {
                    const double xp = work(p, i);
                    const double xq = work(q, i);
                    work(p, i) = c * xp - s * xq;
                    work(q, i) = s * xp + c * xq;
                }
                for (std::size_t i = 0; i < accum.cols(); ++i) {
                    const double vp = accum(p, i);
                    const double vq = accum(q, i);
                    accum(p, i) = c * vp - s * vq;
                    accum(q, i) = s * vp + c * vq;
                }
            }
        }
        if (!rotated) break;
    }
}

// Fill marked columns of `cols` (m x k, column-orthonormal elsewhere) with
// unit vectors orthogonal to the columns already in place. Each fill picks the
// standard basis vector whose two-round Gram-Schmidt residual is largest, so
// the completion never runs out of usable candidates.
void complete_orthonormal_columns(Matrix& cols, const std::vector<bool>& needs_fill) {
    const std::size_t m = cols.rows();
    const std::size_t k = cols.cols();
    std::vector<bool> used(m, false);
    std::vector<double> w(m), best_w(m);
    for (std::size_t j = 0; j < k; ++j) {
        if (!needs_fill[j]) continue;
        double best_norm = -1.0;
        std::size_t best = m;
        for (std::size_t cand = 0; cand < m; ++cand) {
            if (used[cand]) continue;
            std::fill(w.begin(), w.end(), 0.0);
            w[cand] = 1.0;
            for (int round = 0; round < 2; ++round) {
                for (std::size_t c = 0; c < k; ++c) {
                    if (needs_fill[c] && c >= j) continue;  // not yet filled
                    double proj = 0.0;
                    for (std::size_t i = 0; i < m; ++i) proj += w[i] * cols(i, c);
                    for (std::size_t i = 0; i < m; ++i) w[i] -= proj * cols(i, c);
                }
            }
            const double nw = norm2(w);
            if (nw > best_norm) {
                best_norm = nw;
                best = cand;
                best_w = w;
            }
        }
        if (best == m || best_norm <= 1e-8)
            throw std::runtime_error("svd: failed to complete orthonormal basis");
        used[best] = true;
        for (std::size_t i = 0; i < m; ++i) cols(i, j) = best_w[i] / best_norm;
    }
}

}  // namespace

ThinSvd thin_svd(const Matrix& a, double rank_scale) {
    require_finite(a, "thin_svd input");
    const bool transposed = a.rows() < a.cols();
    // Work on b with b.rows() >= b.cols(); rows of `work` are columns of b.
    const Matrix b = transposed ? transpose(a) : a;
    const std::size_t m = b.rows();
    const std::size_t n = b.cols();

    Matrix work = transpose(b);          // n x m, row j is column j of b
    Matrix accum = Matrix::identity(n);  // rows track the right factor's columns

    one_sided_jacobi(work, accum);

    std::vector<double> sigma(n);
    for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) acc += work(j, i) * work(j, i);
        sigma[j] = std::sqrt(acc);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return sigma[i] > sigma[j]; });

    ThinSvd out;
    out.singular_values.resize(n);
    Matrix left(m, n);   // normalized columns of b
    Matrix right(n, n);  // accumulated rotations
    std::vector<bool> needs_fill(n, false);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t src = order[j];
        const double s = sigma[src];
        out.singular_values[j] = s;
        if (s > 0.0) {
            for (std::size_t i = 0; i < m; ++i) left(i, j) = work(src, i) / s;
        } else {
            needs_fill[j] = true;
        }
        for (std::size_t i = 0; i < n; ++i) right(i, j) = accum(src, i);
    }
    complete_orthonormal_columns(left, needs_fill);

    const double sigma_max = out.singular_values.empty() ? 0.0 : out.singular_values.front();
    out.rank_tolerance =
        static_cast<double>(std::max(a.rows(), a.cols())) * sigma_max * rank_scale;
    out.numerical_rank = 0;
    for (double s : out.singular_values)
        if (s > out.rank_tolerance) ++out.numerical_rank;

    if (transposed) {
        out.u = std::move(right);
        out.v = std::move(left);
    } else {
        out.u = std::move(left);
        out.v = std::move(right);
    }
    return out;
}

SvdFactors svd(const Matrix& a, double rank_scale) {
    ThinSvd thin = thin_svd(a, rank_scale);
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    const std::size_t r = std::min(m, n);

    SvdFactors out;
    out.singular_values = thin.singular_values;
    out.rank_tolerance = thin.rank_tolerance;
    out.numerical_rank = thin.numerical_rank;

    Matrix u(m, m);
    std::vector<bool> fill_u(m, false);
    for (std::size_t j = 0; j < m; ++j) {
        if (j < r) {
            for (std::size_t i = 0; i < m; ++i) u(i, j) = thin.u(i, j);
        } else {
            fill_u[j] = true;
        }
    }
    complete_orthonormal_columns(u, fill_u);

    Matrix v(n, n);
    std::vector<bool> fill_v(n, false);
    for (std::size_t j = 0; j < n; ++j) {
        if (j < r) {
            for (std::size_t i = 0; i < n; ++i) v(i, j) = thin.v(i, j);
        } else {
            fill_v[j] = true;
        }
    }
    complete_orthonormal_columns(v, fill_v);

    out.u = std::move(u);
    out.v = std::move(v);
    return out;
}

Matrix pseudoinverse(const ThinSvd& f) {
    const std::size_t m = f.u.rows();
    const std::size_t n = f.v.rows();
    Matrix out(n, m);
    for (std::size_t k = 0; k < f.numerical_rank; ++k) {
        const double inv = 1.0 / f.singular_values[k];
        for (std::size_t i = 0; i < n; ++i) {
            const double vik = f.v(i, k) * inv;
            if (vik == 0.0) continue;
            for (std::size_t j = 0; j < m; ++j) out(i, j) += vik * f.u(j, k);
        }
    }
    return out;
}

Matrix pseudoinverse(const Matrix& a, double rank_scale) {
    require_finite(a, "pseudoinverse input");
    return pseudoinverse(thin_svd(a, rank_scale));
}

Matrix range_projector(const ThinSvd& f) {
    const std::size_t m = f.u.rows();
    Matrix out(m, m);
    for (std::size_t k = 0; k < f.numerical_rank; ++k) {
        for (std::size_t i = 0; i < m; ++i) {
            const double uik = f.u(i, k);
            if (uik == 0.0) continue;
            for (std::size_t j = 0; j < m; ++j) out(i, j) += uik * f.u(j, k);
        }
    }
    return out;
}

Matrix range_projector(const Matrix& a, double rank_scale) {
    require_finite(a, "range_projector input");
    return range_projector(thin_svd(a, rank_scale));
}

Matrix corange_projector(const ThinSvd& f) {
    const std::size_t n = f.v.rows();
    Matrix out(n, n);
    for (std::size_t k = 0; k < f.numerical_rank; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            const double vik = f.v(i, k);
            if (vik == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) out(i, j) += vik * f.v(j, k);
        }
    }
    return out;
}

Matrix corange_projector(const Matrix& a, double rank_scale) {
    require_finite(a, "corange_projector input");
    return corange_projector(thin_svd(a, rank_scale));
}

std::vector<double> apply_pseudoinverse(const ThinSvd& f, const std::vector<double>& w) {
    if (w.size() != f.u.rows()) throw std::invalid_argument("apply_pseudoinverse: size mismatch");
    std::vector<double> out(f.v.rows(), 0.0);
    for (std::size_t k = 0; k < f.numerical_rank; ++k) {
        double coeff = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) coeff += f.u(i, k) * w[i];
        coeff /= f.singular_values[k];
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += coeff * f.v(i, k);
    }
    return out;
}

std::vector<double> apply_gram_pseudoinverse(const ThinSvd& f, const std::vector<double>& g) {
    if (g.size() != f.v.rows())
        throw std::invalid_argument("apply_gram_pseudoinverse: size mismatch");
    std::vector<double> out(f.v.rows(), 0.0);
    for (std::size_t k = 0; k < f.numerical_rank; ++k) {
        double coeff = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) coeff += f.v(i, k) * g[i];
        coeff /= f.singular_values[k] * f.singular_values[k];
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += coeff * f.v(i, k);
    }
    return out;
}

std::vector<double> apply_range_projector(const ThinSvd& f, const std::vector<double>& w) {
    if (w.size() != f.u.rows()) throw std::invalid_argument("apply_range_projector: size mismatch");
    std::vector<double> out(w.size(), 0.0);
    for (std::size_t k = 0; k < f.numerical_rank; ++k) {
        double coeff = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) coeff += f.u(i, k) * w[i];
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += coeff * f.u(i, k);
    }
    return out;
}

std::vector<double> apply_gram(const ThinSvd& f, const std::vector<double>& w) {
    if (w.size() != f.u.rows()) throw std::invalid_argument("apply_gram: size mismatch");
    std::vector<double> out(w.size(), 0.0);
    for (std::size_t k = 0; k < f.singular_values.size(); ++k) {
        double coeff = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) coeff += f.u(i, k) * w[i];
        coeff *= f.singular_values[k] * f.singular_values[k];
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += coeff * f.u(i, k);
    }
    return out;
}

double PenroseResiduals::max_relative() const {
    return std::max(std::max(reproduce_a, reproduce_pinv), std::max(symmetry_ab, symmetry_ba));
}

PenroseResiduals verify_penrose(const Matrix& a, const Matrix& a_pinv) {
    if (a_pinv.rows() != a.cols() || a_pinv.cols() != a.rows()) {
        throw std::invalid_argument("verify_penrose: candidate shape must be cols(A) x rows(A)");
    }
    require_finite(a, "verify_penrose A");
    require_finite(a_pinv, "verify_penrose candidate");

    const Matrix ab = a * a_pinv;
    const Matrix ba = a_pinv * a;

    PenroseResiduals r;
    r.abs_reproduce_a = frobenius_norm(ab * a - a);
    r.abs_reproduce_pinv = frobenius_norm(ba * a_pinv - a_pinv);
    r.abs_symmetry_ab = frobenius_norm(transpose(ab) - ab);
    r.abs_symmetry_ba = frobenius_norm(transpose(ba) - ba);
    r.reproduce_a = r.abs_reproduce_a / std::max(1.0, frobenius_norm(a));
    r.reproduce_pinv = r.abs_reproduce_pinv / std::max(1.0, frobenius_norm(a_pinv));
    r.symmetry_ab = r.abs_symmetry_ab / std::max(1.0, frobenius_norm(ab));
    r.symmetry_ba = r.abs_symmetry_ba / std::max(1.0, frobenius_norm(ba));
    return r;
}

bool kernel_agreement_check(const Matrix& a, const std::vector<std::vector<double>>& probes,
                            double tol) {
    const Matrix pinv = pseudoinverse(a);
    for (const auto& v : probes) {
        if (v.size() != a.cols())
            throw std::invalid_argument("kernel_agreement_check: probe length mismatch");
        const double nv = norm2(v);
        const std::vector<double> av = matvec(a, v);
        const std::vector<double> ata_v = matvec_transposed(a, av);
        const std::vector<double> pinv_a_v = matvec(pinv, av);
        const bool in_ker_gram = norm2(ata_v) <= tol * nv;
        const bool in_ker_pinv = norm2(pinv_a_v) <= tol * nv;
        if (in_ker_gram != in_ker_pinv) return false;
    }
    return true;
}

SymmetricEigen symmetric_eigen(const Matrix& a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("symmetric_eigen: matrix must be square");
    require_finite(a, "symmetric_eigen input");
    const std::size_t n = a.rows();

    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) m(i, j) = 0.5 * (a(i, j) + a(j, i));
    Matrix vec = Matrix::identity(n);

    const int max_sweeps = 60;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += m(p, q) * m(p, q);
        if (std::sqrt(off) <= 1e-15 * std::max(1e-300, frobenius_norm(m))) break;

        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = m(p, q);
                if (apq == 0.0) continue;
                const double diff = m(q, q) - m(p, p);
                if (std::abs(apq) <= 1e-18 * (std::abs(m(p, p)) + std::abs(m(q, q)) + 1e-300))
                    continue;
                const double zeta = diff / (2.0 * apq);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < n; ++i) {
                    const double mip = m(i, p);
                    const double miq = m(i, q);
                    m(i, p) = c * mip - s * miq;
                    m(i, q) = s * mip + c * miq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double mpi = m(p, i);
                    const double mqi = m(q, i);
                    m(p, i) = c * mpi - s * mqi;
                    m(q, i) = s * mpi + c * mqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = vec(i, p);
                    const double viq = vec(i, q);
                    vec(i, p) = c * vip - s * viq;
                    vec(i, q) = s * vip + c * viq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return m(i, i) < m(j, j); });

    SymmetricEigen out;
    out.eigenvalues.resize(n);
    out.eigenvectors = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        out.eigenvalues[j] = m(order[j], order[j]);
        for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, j) = vec(i, order[j]);
    }
    return out;
}

}  // namespace flowlab::linalg
