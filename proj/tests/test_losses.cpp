#include "flowlab/losses.hpp"

#include <cmath>
#include <random>

#include <stdexcept>

#include "doctest.h"

using namespace flowlab;
using losses::LossKind;

namespace {

std::vector<double> random_vector(std::mt19937_64& gen, std::size_t n, double radius) {
    std::uniform_real_distribution<double> dist(-radius, radius);
    std::vector<double> v(n);
    for (auto& x : v) x = dist(gen);
    return v;
}

std::vector<double> random_simplex(std::mt19937_64& gen, std::size_t q) {
    std::uniform_real_distribution<double> dist(0.05, 1.0);
    std::vector<double> y(q);
    double sum = 0.0;
    for (auto& x : y) {
        x = dist(gen);
        sum += x;
    }
    for (auto& x : y) x /= sum;
    // renormalize exactly enough for the 1e-12 simplex gate
    double s2 = 0.0;
    for (double x : y) s2 += x;
    y[0] += 1.0 - s2;
    return y;
}

}  // namespace

TEST_CASE("squared cost basics") {
    CHECK(losses::cost(LossKind::Squared, {1.0, 2.0}, {1.0, 2.0}, 1) == 0.0);
    CHECK(losses::cost(LossKind::Squared, {1.0, 0.0}, {0.0, 0.0}, 1) == doctest::Approx(0.5));
}

TEST_CASE("cross-entropy cost at the uniform point is log 2") {
    CHECK(losses::cost(LossKind::CrossEntropy, {0.0, 0.0}, {0.5, 0.5}, 1) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("cross-entropy cost survives extreme logits") {
    const double c = losses::cost(LossKind::CrossEntropy, {800.0, -800.0}, {0.5, 0.5}, 1);
    CHECK(std::isfinite(c));
    CHECK(c == doctest::Approx(800.0).epsilon(1e-10));
}

TEST_CASE("gradients at pinned evaluation points") {
    const std::vector<double> zero = losses::grad_x(LossKind::Squared, {1.0, 2.0}, {1.0, 2.0}, 1);
    CHECK(linalg::norm2(zero) == 0.0);

    const std::vector<double> eq = losses::grad_x(LossKind::CrossEntropy, {0.0, 0.0}, {0.5, 0.5}, 1);
    CHECK(linalg::max_abs(eq) <= 1e-15);

    const std::vector<double> g =
        losses::grad_x(LossKind::CrossEntropy, {1.0, -1.0}, {0.75, 0.25}, 1);
    const double sigma1 = 1.0 / (1.0 + std::exp(-2.0));
    CHECK(g[0] == doctest::Approx(sigma1 - 0.75).epsilon(1e-12));
    CHECK(g[1] == doctest::Approx(-(sigma1 - 0.75)).epsilon(1e-12));
    CHECK(g[0] == doctest::Approx(0.1307970779778824).epsilon(1e-12));
}

TEST_CASE("grad_x matches central finite differences of cost") {
    std::mt19937_64 gen(31);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t q = 2 + gen() % 4;
        const std::size_t n = 1 + gen() % 3;
        std::vector<double> x = random_vector(gen, q * n, 2.0);
        std::vector<double> y;
        for (std::size_t b = 0; b < n; ++b) {
            const auto block = random_simplex(gen, q);
            y.insert(y.end(), block.begin(), block.end());
        }
        for (const auto kind : {LossKind::Squared, LossKind::CrossEntropy}) {
            const std::vector<double> g = losses::grad_x(kind, x, y, n);
            const double h = 1e-6;
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double saved = x[i];
                x[i] = saved + h;
                const double cp = losses::cost(kind, x, y, n);
                x[i] = saved - h;
                const double cm = losses::cost(kind, x, y, n);
                x[i] = saved;
                const double fd = (cp - cm) / (2.0 * h);
                CHECK(std::abs(g[i] - fd) <= 1e-7 * std::max(1.0, std::abs(fd)));
            }
        }
    }
}

TEST_CASE("cross-entropy gradient blocks sum to zero") {
    std::mt19937_64 gen(37);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t q = 2 + gen() % 5;
        const std::vector<double> x = random_vector(gen, q, 5.0);
        const std::vector<double> y = random_simplex(gen, q);
        const std::vector<double> g = losses::grad_x(LossKind::CrossEntropy, x, y, 1);
        double sum = 0.0;
        for (double v : g) sum += v;
        CHECK(std::abs(sum) <= 1e-12);
    }
}

TEST_CASE("cross-entropy rejects labels off the simplex") {
    CHECK_THROWS_AS((void)losses::cost(LossKind::CrossEntropy, {0.0, 0.0}, {0.7, 0.7}, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)losses::grad_x(LossKind::CrossEntropy, {0.0, 0.0}, {-0.2, 1.2}, 1),
                    std::invalid_argument);
}

TEST_CASE("hessian block at the symmetric point") {
    const losses::HessianBlock h = losses::ce_hessian_block({0.0, 0.0});
    CHECK(h.matrix(0, 0) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(h.matrix(0, 1) == doctest::Approx(-0.25).epsilon(1e-14));
    CHECK(h.matrix(1, 0) == doctest::Approx(-0.25).epsilon(1e-14));
    CHECK(h.matrix(1, 1) == doctest::Approx(0.25).epsilon(1e-14));
    const linalg::SymmetricEigen eig = linalg::symmetric_eigen(h.matrix);
    CHECK(eig.eigenvalues[0] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(eig.eigenvalues[1] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("hessian kernel contains the all-ones direction for any logits") {
    std::mt19937_64 gen(41);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t q = 2 + gen() % 5;
        const losses::HessianBlock h = losses::ce_hessian_block(random_vector(gen, q, 8.0));
        for (std::size_t i = 0; i < q; ++i) {
            double row_sum = 0.0;
            for (std::size_t j = 0; j < q; ++j) row_sum += h.matrix(i, j);
            CHECK(std::abs(row_sum) <= 1e-12);
        }
    }
}

TEST_CASE("uniform softmax at Q=3 gives I/3 - J/9 with rank 2") {
    const losses::HessianBlock h = losses::ce_hessian_block({0.0, 0.0, 0.0});
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(h.matrix(i, j) ==
                  doctest::Approx((i == j ? 1.0 / 3.0 : 0.0) - 1.0 / 9.0).epsilon(1e-14));
    const losses::HessianSpectrumReport rep = losses::ce_hessian_rank_psd_check({0.0, 0.0, 0.0});
    CHECK(rep.rank == 2);
    CHECK(rep.min_eigenvalue >= -1e-10);
}

TEST_CASE("rank and positive semidefiniteness across seeded logits") {
    std::mt19937_64 gen(43);
    for (int trial = 0; trial < 30; ++trial) {
        const losses::HessianSpectrumReport rep =
            losses::ce_hessian_rank_psd_check(random_vector(gen, 5, 6.0));
        CHECK(rep.rank == 4);
        CHECK(rep.min_eigenvalue >= -1e-10);
        CHECK(!rep.rank_collapsed);
    }
}

TEST_CASE("extreme logits may collapse the numerical rank but stay flagged") {
    const losses::HessianSpectrumReport rep = losses::ce_hessian_rank_psd_check({50.0, -50.0});
    CHECK(rep.rank <= 1);
    CHECK(rep.min_eigenvalue >= -1e-10);
    if (rep.rank == 0) CHECK(rep.rank_collapsed);
}

TEST_CASE("restricted quadratic form is positive away from extreme logits") {
    std::mt19937_64 gen(47);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t q = 2 + gen() % 4;
        const losses::HessianBlock h = losses::ce_hessian_block(random_vector(gen, q, 30.0));
        std::vector<double> v(q);
        for (auto& x : v) x = dist(gen);
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(q);
        for (auto& x : v) x -= mean;
        const double nv = linalg::norm2(v);
        if (nv < 1e-8) continue;
        for (auto& x : v) x /= nv;
        CHECK(linalg::dot(v, linalg::matvec(h.matrix, v)) > 0.0);
    }
}

TEST_CASE("cost at the closed-form equilibrium equals the label entropy") {
    // f* = log y + shift * ones has softmax(f*) = y, so the loss is -y . log y
    std::mt19937_64 gen(53);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t q = 2 + gen() % 4;
        const std::vector<double> y = random_simplex(gen, q);
        const std::vector<double> f0 = random_vector(gen, q, 3.0);
        double shift = 0.0;
        for (std::size_t j = 0; j < q; ++j) shift += f0[j] - std::log(y[j]);
        shift /= static_cast<double>(q);
        std::vector<double> f_star(q);
        for (std::size_t j = 0; j < q; ++j) f_star[j] = std::log(y[j]) + shift;

        double entropy = 0.0;
        for (double v : y) entropy -= v * std::log(v);
        CHECK(losses::cost(LossKind::CrossEntropy, f_star, y, 1) ==
              doctest::Approx(entropy).epsilon(1e-10));
    }
}
