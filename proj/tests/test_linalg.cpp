#include "flowlab/linalg.hpp"

#include <cmath>
#include <random>

#include <limits>
#include <stdexcept>

#include "doctest.h"

using namespace flowlab;
using linalg::Matrix;

namespace {

Matrix random_matrix(std::mt19937_64& gen, std::size_t rows, std::size_t cols) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Matrix a(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) a(i, j) = dist(gen);
    return a;
}

// product of seeded Givens rotations: orthogonal to machine precision
Matrix random_rotation(std::mt19937_64& gen, std::size_t n) {
    std::uniform_real_distribution<double> angle(0.0, 6.28318530717958647);
    Matrix r = Matrix::identity(n);
    for (std::size_t p = 0; p + 1 < n; ++p) {
        for (std::size_t q = p + 1; q < n; ++q) {
            const double a = angle(gen);
            const double c = std::cos(a), s = std::sin(a);
            for (std::size_t i = 0; i < n; ++i) {
                const double rp = r(i, p), rq = r(i, q);
                r(i, p) = c * rp - s * rq;
                r(i, q) = s * rp + c * rq;
            }
        }
    }
    return r;
}

double orthogonality_defect(const Matrix& u) {
    return linalg::max_abs(linalg::transpose(u) * u - Matrix::identity(u.cols()));
}

}  // namespace

TEST_CASE("svd reconstructs and is orthogonal across shapes") {
    std::mt19937_64 gen(42);
    for (auto [m, n] : {std::pair<std::size_t, std::size_t>{5, 3},
                        {3, 5},
                        {4, 4},
                        {1, 7},
                        {7, 1},
                        {12, 20}}) {
        const Matrix a = random_matrix(gen, m, n);
        const linalg::SvdFactors f = linalg::svd(a);
        CHECK(orthogonality_defect(f.u) <= 1e-10);
        CHECK(orthogonality_defect(f.v) <= 1e-10);
        for (std::size_t i = 0; i + 1 < f.singular_values.size(); ++i)
            CHECK(f.singular_values[i] >= f.singular_values[i + 1]);
        for (double s : f.singular_values) CHECK(s >= 0.0);
        // rebuild u * diag(sigma) * v^T
        Matrix us(m, n);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t k = 0; k < f.singular_values.size(); ++k)
                us(i, k) = f.u(i, k) * f.singular_values[k];
        const Matrix rebuilt = us * linalg::transpose(f.v);
        CHECK(linalg::frobenius_norm(rebuilt - a) <= 1e-10 * std::max(1.0, linalg::frobenius_norm(a)));
    }
}

TEST_CASE("pseudoinverse of invertible identity is identity") {
    const Matrix p = linalg::pseudoinverse(Matrix::identity(3));
    CHECK(linalg::max_abs_diff(p, Matrix::identity(3)) <= 1e-12);
}

TEST_CASE("pseudoinverse of the zero matrix is the transposed-shape zero") {
    const Matrix z(2, 4);
    const Matrix p = linalg::pseudoinverse(z);
    CHECK(p.rows() == 4);
    CHECK(p.cols() == 2);
    CHECK(linalg::max_abs(p) == 0.0);
}

TEST_CASE("rank-one pseudoinverse matches v u^T / (|u|^2 |v|^2)") {
    // A = u v^T with u = v = (1,2): A+ = A / 25
    const Matrix a = Matrix::from_rows({{1.0, 2.0}, {2.0, 4.0}});
    const Matrix p = linalg::pseudoinverse(a);
    CHECK(linalg::max_abs_diff(p, (1.0 / 25.0) * a) <= 1e-12);
    const linalg::PenroseResiduals res = linalg::verify_penrose(a, p);
    CHECK(res.max_relative() <= 1e-8);
}

TEST_CASE("range projector examples") {
    CHECK(linalg::max_abs_diff(linalg::range_projector(Matrix::identity(2)), Matrix::identity(2)) <=
          1e-12);

    const Matrix column = Matrix::from_rows({{1.0}, {0.0}});
    CHECK(linalg::max_abs_diff(linalg::range_projector(column),
                               Matrix::from_rows({{1.0, 0.0}, {0.0, 0.0}})) <= 1e-12);

    const Matrix a = Matrix::from_rows({{1.0, 2.0}, {2.0, 4.0}});
    const Matrix p = linalg::range_projector(a);
    CHECK(linalg::max_abs_diff(p, (1.0 / 5.0) * a) <= 1e-12);
    CHECK(linalg::max_abs(p * p - p) <= 1e-10);
    CHECK(linalg::max_abs(linalg::transpose(p) - p) <= 1e-10);
}

TEST_CASE("corange projector projects onto the row space") {
    const Matrix a = Matrix::from_rows({{1.0, 0.0, 0.0}, {0.0, 0.0, 0.0}});
    const Matrix p = linalg::corange_projector(a);
    CHECK(p.rows() == 3);
    CHECK(linalg::max_abs_diff(
              p, Matrix::from_rows({{1.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}})) <= 1e-12);
}

TEST_CASE("verify_penrose reports zero residuals for an exact pair") {
    const linalg::PenroseResiduals res =
        linalg::verify_penrose(Matrix::identity(3), Matrix::identity(3));
    CHECK(res.max_relative() == 0.0);
}

TEST_CASE("verify_penrose rejects a wrong candidate") {
    // A = [[2,0],[0,0]] with candidate A^T = A: A A^T A = 8 e11, so the first
    // identity fails with absolute Frobenius defect |8 - 2| = 6.
    const Matrix a = Matrix::from_rows({{2.0, 0.0}, {0.0, 0.0}});
    const linalg::PenroseResiduals res = linalg::verify_penrose(a, linalg::transpose(a));
    CHECK(res.abs_reproduce_a == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(res.reproduce_a == doctest::Approx(3.0).epsilon(1e-12));  // normalized by ||A||_F = 2
    CHECK(res.abs_symmetry_ab == 0.0);
    CHECK(res.max_relative() > 1e-8);
}

TEST_CASE("verify_penrose rejects shape mismatches") {
    const Matrix a(2, 3);
    CHECK_THROWS_AS((void)linalg::verify_penrose(a, Matrix(2, 3)), std::invalid_argument);
}

TEST_CASE("penrose residuals on seeded random 5x3 matrices") {
    std::mt19937_64 gen(19);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix a = random_matrix(gen, 5, 3);
        CHECK(linalg::verify_penrose(a, linalg::pseudoinverse(a)).max_relative() <= 1e-10);
    }
}

TEST_CASE("penrose residuals stay below 1e-10 over seeded random matrices") {
    std::mt19937_64 gen(7);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t m = 1 + gen() % 8;
        const std::size_t n = 1 + gen() % 8;
        Matrix a = random_matrix(gen, m, n);
        if (trial % 3 == 0 && std::min(m, n) >= 2) {
            const std::size_t r = 1 + gen() % (std::min(m, n) - 1);
            a = random_matrix(gen, m, r) * random_matrix(gen, r, n);
        }
        const Matrix p = linalg::pseudoinverse(a);
        CHECK(linalg::verify_penrose(a, p).max_relative() <= 1e-10);
    }
}

TEST_CASE("pseudoinverse involution and transpose identities") {
    std::mt19937_64 gen(11);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t m = 1 + gen() % 7;
        const std::size_t n = 1 + gen() % 7;
        Matrix a = random_matrix(gen, m, n);
        if (trial % 2 == 0 && std::min(m, n) >= 2) {
            const std::size_t r = 1 + gen() % (std::min(m, n) - 1);
            a = random_matrix(gen, m, r) * random_matrix(gen, r, n);
        }
        const Matrix p = linalg::pseudoinverse(a);
        const double scale = std::max(1.0, linalg::frobenius_norm(a));

        CHECK(linalg::frobenius_norm(linalg::pseudoinverse(p) - a) <= 1e-8 * scale);
        CHECK(linalg::frobenius_norm(linalg::pseudoinverse(linalg::transpose(a)) -
                                     linalg::transpose(p)) <=
              1e-8 * std::max(1.0, linalg::frobenius_norm(p)));

        const Matrix at = linalg::transpose(a);
        CHECK(linalg::frobenius_norm(linalg::pseudoinverse(at * a) -
                                     p * linalg::pseudoinverse(at)) <= 1e-8);
        CHECK(linalg::frobenius_norm(a * at * linalg::pseudoinverse(at) - a) <= 1e-8 * scale);
    }
}

TEST_CASE("numerical rank is invariant under orthogonal factors") {
    std::mt19937_64 gen(13);
    for (int trial = 0; trial < 15; ++trial) {
        const std::size_t m = 2 + gen() % 6;
        const std::size_t n = 2 + gen() % 6;
        const std::size_t r = 1 + gen() % std::min(m, n);
        const Matrix a = random_matrix(gen, m, r) * random_matrix(gen, r, n);
        const std::size_t rank = linalg::thin_svd(a).numerical_rank;
        CHECK(rank == r);  // generic product has full factor rank

        const Matrix rotated = random_rotation(gen, m) * a * random_rotation(gen, n);
        CHECK(linalg::thin_svd(rotated).numerical_rank == rank);
    }
}

TEST_CASE("kernel agreement examples") {
    std::vector<std::vector<double>> basis = {{1.0, 0.0}, {0.0, 1.0}};
    CHECK(linalg::kernel_agreement_check(Matrix::identity(2), basis));

    const Matrix a = Matrix::from_rows({{1.0, 0.0}, {0.0, 0.0}});
    CHECK(linalg::kernel_agreement_check(a, {{0.0, 1.0}}));
}

TEST_CASE("kernel agreement on a seeded rank-deficient matrix") {
    std::mt19937_64 gen(17);
    const Matrix a = random_matrix(gen, 4, 2) * random_matrix(gen, 2, 6);  // rank 2, 4x6
    const linalg::SvdFactors f = linalg::svd(a);
    REQUIRE(f.numerical_rank == 2);
    std::vector<std::vector<double>> probes;
    for (std::size_t k = f.numerical_rank; k < 6; ++k) {
        std::vector<double> v(6);
        for (std::size_t i = 0; i < 6; ++i) v[i] = f.v(i, k);
        probes.push_back(std::move(v));
    }
    for (int extra = 0; extra < 3; ++extra) {
        std::vector<double> v(6);
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        for (auto& x : v) x = dist(gen);
        probes.push_back(std::move(v));
    }
    CHECK(linalg::kernel_agreement_check(a, probes));
}

TEST_CASE("non-finite entries are rejected with the offending index") {
    Matrix a(2, 2);
    a(0, 1) = std::nan("");
    CHECK_THROWS_WITH_AS((void)linalg::pseudoinverse(a), doctest::Contains("(0,1)"),
                         std::invalid_argument);
}

TEST_CASE("matrix construction validates shape and finiteness") {
    CHECK_THROWS_AS(Matrix(0, 3), std::invalid_argument);
    CHECK_THROWS_AS(Matrix(2, 2, {1.0, 2.0, 3.0}), std::invalid_argument);
    CHECK_THROWS_AS(Matrix(1, 2, {1.0, std::numeric_limits<double>::infinity()}),
                    std::invalid_argument);
}

TEST_CASE("symmetric eigensolver on a known spectrum") {
    // diag(3, 1) rotated by 45 degrees
    const Matrix a = Matrix::from_rows({{2.0, 1.0}, {1.0, 2.0}});
    const linalg::SymmetricEigen eig = linalg::symmetric_eigen(a);
    CHECK(eig.eigenvalues[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(eig.eigenvalues[1] == doctest::Approx(3.0).epsilon(1e-12));
    // residual A v = lambda v
    for (std::size_t k = 0; k < 2; ++k) {
        std::vector<double> v = {eig.eigenvectors(0, k), eig.eigenvectors(1, k)};
        const std::vector<double> av = linalg::matvec(a, v);
        for (std::size_t i = 0; i < 2; ++i)
            CHECK(av[i] == doctest::Approx(eig.eigenvalues[k] * v[i]).epsilon(1e-10));
    }
}

TEST_CASE("factored apply helpers agree with explicit products") {
    std::mt19937_64 gen(23);
    const Matrix a = random_matrix(gen, 4, 7);
    const linalg::ThinSvd f = linalg::thin_svd(a);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> w(4), g(7);
    for (auto& x : w) x = dist(gen);
    for (auto& x : g) x = dist(gen);

    const Matrix pinv = linalg::pseudoinverse(a);
    const std::vector<double> via_factors = linalg::apply_pseudoinverse(f, w);
    const std::vector<double> via_matrix = linalg::matvec(pinv, w);
    CHECK(linalg::norm2(linalg::sub(via_factors, via_matrix)) <= 1e-12);

    const Matrix gram_pinv = linalg::pseudoinverse(linalg::transpose(a) * a);
    CHECK(linalg::norm2(linalg::sub(linalg::apply_gram_pseudoinverse(f, g),
                                    linalg::matvec(gram_pinv, g))) <= 1e-10);

    CHECK(linalg::norm2(linalg::sub(linalg::apply_range_projector(f, w),
                                    linalg::matvec(linalg::range_projector(a), w))) <= 1e-12);

    const Matrix gram = a * linalg::transpose(a);
    CHECK(linalg::norm2(linalg::sub(linalg::apply_gram(f, w), linalg::matvec(gram, w))) <= 1e-12);
}
