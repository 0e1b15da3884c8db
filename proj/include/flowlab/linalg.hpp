#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace flowlab::linalg {

/// Dense row-major matrix of 64-bit reals.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries);

    static Matrix identity(std::size_t n);
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);
Matrix transpose(const Matrix& a);

std::vector<double> matvec(const Matrix& a, const std::vector<double>& x);
std::vector<double> matvec_transposed(const Matrix& a, const std::vector<double>& x);

double frobenius_norm(const Matrix& a);
double max_abs(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);
bool all_finite(const Matrix& a);

// Throws std::invalid_argument naming the first non-finite entry.
void require_finite(const Matrix& a, const char* context);

// small vector helpers shared across modules
double dot(const std::vector<double>& a, const std::vector<double>& b);
double norm2(const std::vector<double>& a);
double max_abs(const std::vector<double>& a);
bool all_finite(const std::vector<double>& a);
std::vector<double> sub(const std::vector<double>& a, const std::vector<double>& b);
std::vector<double> add(const std::vector<double>& a, const std::vector<double>& b);
std::vector<double> scaled(double s, const std::vector<double>& a);
void axpy(double s, const std::vector<double>& x, std::vector<double>& y);

/// Default scale for the numerical-rank cutoff: tolerance = max(m,n) * sigma_max * scale.
inline constexpr double kDefaultRankScale = 1e-12;

/// Thin SVD: a = u * diag(sigma) * v^T with u (m x r_cols), v (n x r_cols),
/// r_cols = min(m,n). Columns beyond the numerical rank are still orthonormal
/// (completed when a column of the working matrix vanishes identically).
struct ThinSvd {
    Matrix u;
    std::vector<double> singular_values;  // nonincreasing, >= 0
    Matrix v;
    double rank_tolerance = 0.0;
    std::size_t numerical_rank = 0;
};

ThinSvd thin_svd(const Matrix& a, double rank_scale = kDefaultRankScale);

/// Full factorization with square orthogonal u (m x m) and v (n x n).
struct SvdFactors {
    Matrix u;
    std::vector<double> singular_values;  // length min(m,n), nonincreasing
    Matrix v;
    double rank_tolerance = 0.0;
    std::size_t numerical_rank = 0;
};

SvdFactors svd(const Matrix& a, double rank_scale = kDefaultRankScale);

Matrix pseudoinverse(const Matrix& a, double rank_scale = kDefaultRankScale);
Matrix pseudoinverse(const ThinSvd& f);

/// P_ran(A) = A A^+ (m x m).
Matrix range_projector(const Matrix& a, double rank_scale = kDefaultRankScale);
Matrix range_projector(const ThinSvd& f);
/// P_ran(A^T) = A^+ A (n x n).
Matrix corange_projector(const Matrix& a, double rank_scale = kDefaultRankScale);
Matrix corange_projector(const ThinSvd& f);

// Factored matrix-vector products used by the flow fields; singular values at
// or below the rank tolerance are treated as exactly zero.
std::vector<double> apply_pseudoinverse(const ThinSvd& f, const std::vector<double>& w);
std::vector<double> apply_gram_pseudoinverse(const ThinSvd& f, const std::vector<double>& g);
std::vector<double> apply_range_projector(const ThinSvd& f, const std::vector<double>& w);
std::vector<double> apply_gram(const ThinSvd& f, const std::vector<double>& w);

struct PenroseResiduals {
    // relative Frobenius residuals, each normalized by max(1, ||reference||_F)
    double reproduce_a = 0.0;       // A B A = A
    double reproduce_pinv = 0.0;    // B A B = B
    double symmetry_ab = 0.0;       // (A B)^T = A B
    double symmetry_ba = 0.0;       // (B A)^T = B A
    // absolute Frobenius norms of the same defects
    double abs_reproduce_a = 0.0;
    double abs_reproduce_pinv = 0.0;
    double abs_symmetry_ab = 0.0;
    double abs_symmetry_ba = 0.0;

    double max_relative() const;
};

PenroseResiduals verify_penrose(const Matrix& a, const Matrix& a_pinv);

/// True iff every probe v lands on the same side of the kernel test for
/// A^T A and A^+ A: ||A^T A v|| <= tol ||v||  <=>  ||A^+ A v|| <= tol ||v||.
bool kernel_agreement_check(const Matrix& a, const std::vector<std::vector<double>>& probes,
                            double tol = 1e-8);

struct SymmetricEigen {
    std::vector<double> eigenvalues;  // ascending
    Matrix eigenvectors;              // columns, same order
};

/// Cyclic Jacobi eigensolver; the input is symmetrized as (A + A^T)/2.
SymmetricEigen symmetric_eigen(const Matrix& a);

}  // namespace flowlab::linalg
