#include "flowlab/reparam.hpp"

#include <cmath>

#include <stdexcept>

#include "doctest.h"
#include "flowlab/references.hpp"

using namespace flowlab;
using linalg::Matrix;
using models::Dataset;
using models::ModelSpec;
using models::ParamVector;

namespace {

ModelSpec small_net() {
    ModelSpec spec;
    spec.input_dim = 2;
    spec.output_dim = 2;
    spec.hidden_widths = {3};
    return spec;
}

Dataset small_data() {
    return Dataset(Matrix(2, 2, {0.3, -0.8, 1.1, 0.4}), Matrix(2, 2, {1.0, 0.0, 0.0, 1.0}));
}

flows::FlowConfig t_config(double h, std::size_t stride = 1) {
    flows::FlowConfig cfg;
    cfg.alpha = 1.0;
    cfg.step_size = h;
    cfg.max_time = 1.0;  // unused by the t-parametrized run
    cfg.stop_grad_norm = 0.0;
    cfg.record_stride = stride;
    return cfg;
}

}  // namespace

TEST_CASE("t = 0 record is exactly the initial output") {
    const ModelSpec spec = small_net();
    const Dataset data = small_data();
    const ParamVector theta0 = models::init_params(spec, 3);
    const auto traj = reparam::reparametrized_flow(spec, theta0, data, t_config(0.01), 0.5);
    REQUIRE(!traj.records.empty());
    CHECK(traj.records.front().t == 0.0);
    CHECK(traj.records.front().x_flat == traj.x0);
    CHECK(traj.records.front().deviation_norm == 0.0);
}

TEST_CASE("already-fitted start keeps x = y with zero deviation") {
    const ModelSpec spec = small_net();
    const ParamVector theta0 = models::init_params(spec, 4);
    const Matrix inputs(2, 2, {0.3, -0.8, 1.1, 0.4});
    const Dataset probe(inputs, Matrix(2, 2));
    const std::vector<double> x0 = models::output_flatten(spec, theta0, probe);
    Matrix labels(2, 2);
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t q = 0; q < 2; ++q) labels(q, n) = x0[n * 2 + q];
    const Dataset fitted(inputs, std::move(labels));

    const auto traj = reparam::reparametrized_flow(spec, theta0, fitted, t_config(0.01), 0.9);
    for (const auto& rec : traj.records) CHECK(rec.deviation_norm <= 1e-12);
}

TEST_CASE("full-rank adapted flow follows linear interpolation in t") {
    const ModelSpec spec = small_net();
    const Dataset data = small_data();
    const ParamVector theta0 = models::init_params(spec, 5);
    const auto traj = reparam::reparametrized_flow(spec, theta0, data, t_config(1e-3, 10), 0.99);
    REQUIRE(!traj.diverged);
    const double scale = 1.0 + linalg::norm2(linalg::sub(traj.x0, traj.y));
    for (const auto& rec : traj.records) CHECK(rec.deviation_norm <= 1e-4 * scale);

    // terminal contraction: ||x(t_max) - y|| <= (1 - t_max) ||x0 - y|| (1 + tol)
    const double dist0 = linalg::norm2(linalg::sub(traj.x0, traj.y));
    const double terminal = linalg::norm2(linalg::sub(traj.records.back().x_flat, traj.y));
    CHECK(terminal <= 0.01 * dist0 * 1.1);
}

TEST_CASE("t-run matches the s-run under the substitution s = -N log(1-t)") {
    const ModelSpec spec = small_net();
    const Dataset data = small_data();
    const ParamVector theta0 = models::init_params(spec, 6);
    const double n = static_cast<double>(data.sample_count());

    const double t_star = 0.6;
    const auto t_traj = reparam::reparametrized_flow(spec, theta0, data, t_config(5e-4, 100), t_star);

    const double s_star = -n * std::log(1.0 - t_star);
    flows::FlowConfig s_cfg;
    s_cfg.alpha = 1.0;
    s_cfg.step_size = s_star / 4096.0;
    s_cfg.max_time = s_star;
    s_cfg.stop_grad_norm = 0.0;
    s_cfg.record_stride = 1u << 30;  // first and last records only
    const flows::Trajectory s_traj = flows::integrate(spec, theta0, data, losses::LossKind::Squared, s_cfg);

    const auto& x_t = t_traj.records.back().x_flat;
    const auto& x_s = s_traj.records.back().x_flat;
    CHECK(std::abs(t_traj.records.back().t - t_star) <= 1e-12);
    CHECK(std::abs(s_traj.records.back().time - s_star) <= 1e-9);
    CHECK(linalg::norm2(linalg::sub(x_t, x_s)) <= 1e-5);
}

TEST_CASE("t_max above the stiffness cap is rejected") {
    const ModelSpec spec = small_net();
    const Dataset data = small_data();
    const ParamVector theta0 = models::init_params(spec, 7);
    CHECK_THROWS_AS(
        (void)reparam::reparametrized_flow(spec, theta0, data, t_config(0.01), 0.9999),
        std::invalid_argument);
}

TEST_CASE("rank-deficient construction certifies the rank drop") {
    const auto deficient = reparam::build_rank_deficient_case(false);
    const linalg::Matrix d =
        models::jacobian(deficient.spec, deficient.theta0, deficient.dataset).matrix;
    const linalg::ThinSvd f = linalg::thin_svd(d);
    const std::size_t q = deficient.spec.output_dim;
    const std::size_t n = deficient.dataset.sample_count();
    CHECK(f.numerical_rank <= q * (n - 1));
    CHECK(f.numerical_rank < q * n);

    // duplicated inputs give identical Jacobian rows
    for (std::size_t k = 0; k < d.cols(); ++k) {
        CHECK(d(0, k) == d(1 * q + 0, k));
        CHECK(d(1, k) == d(1 * q + 1, k));
    }
}

TEST_CASE("consistent duplicate labels still reach zero loss") {
    const auto consistent = reparam::build_rank_deficient_case(true);
    const auto traj = reparam::reparametrized_flow(consistent.spec, consistent.theta0,
                                                   consistent.dataset, t_config(1e-3, 50), 0.99);
    const double terminal_cost = losses::cost(losses::LossKind::Squared,
                                              traj.records.back().x_flat, traj.y,
                                              consistent.dataset.sample_count());
    CHECK(terminal_cost <= 1e-4);

    // the target difference lies in the range of D throughout
    for (const auto& rec : traj.records) CHECK(rec.projector_defect <= 1e-8);
}

TEST_CASE("inconsistent duplicate labels leave residual cost and deviation") {
    const auto deficient = reparam::build_rank_deficient_case(false);
    const auto traj = reparam::reparametrized_flow(deficient.spec, deficient.theta0,
                                                   deficient.dataset, t_config(1e-3, 50), 0.99);
    const double terminal_cost = losses::cost(losses::LossKind::Squared,
                                              traj.records.back().x_flat, traj.y,
                                              deficient.dataset.sample_count());
    CHECK(terminal_cost > 0.01);
    CHECK(traj.records.back().deviation_norm > 1e-3);
    CHECK(traj.records.front().projector_defect > 0.01);
}

TEST_CASE("propagator prediction vanishes for the full-rank run") {
    const ModelSpec spec = small_net();
    const Dataset data = small_data();
    const ParamVector theta0 = models::init_params(spec, 8);
    const auto traj = reparam::reparametrized_flow(spec, theta0, data, t_config(2e-3, 10), 0.75);
    const auto predicted = reparam::deviation_via_propagator(traj);
    for (const auto& p : predicted) CHECK(linalg::norm2(p) <= 1e-10);
}

TEST_CASE("propagator starts at the identity and composes") {
    const auto deficient = reparam::build_rank_deficient_case(false);
    const auto traj = reparam::reparametrized_flow(deficient.spec, deficient.theta0,
                                                   deficient.dataset, t_config(1e-3, 25), 0.6);
    REQUIRE(traj.records.size() >= 9);

    const auto identity = reparam::advance_propagator(traj, 4, 4);
    CHECK(linalg::max_abs_diff(identity.u, Matrix::identity(traj.x0.size())) == 0.0);

    const std::size_t mid = traj.records.size() / 2;
    const std::size_t last = traj.records.size() - 1;
    const auto whole = reparam::advance_propagator(traj, 0, last);
    const auto first_half = reparam::advance_propagator(traj, 0, mid);
    const auto second_half = reparam::advance_propagator(traj, mid, last);
    CHECK(linalg::max_abs_diff(whole.u, second_half.u * first_half.u) <= 1e-6);
}

TEST_CASE("Duhamel prediction matches the measured deviation under rank loss") {
    const auto deficient = reparam::build_rank_deficient_case(false);
    const auto traj = reparam::reparametrized_flow(deficient.spec, deficient.theta0,
                                                   deficient.dataset, t_config(1e-3, 1), 0.5);
    const auto predicted = reparam::deviation_via_propagator(traj);
    const auto& rec = traj.records.back();
    const std::vector<double> measured = linalg::sub(rec.x_flat, rec.lin_interp_ref);
    const double rel =
        linalg::norm2(linalg::sub(measured, predicted.back())) / linalg::norm2(measured);
    CHECK(rel <= 1e-3);
}

TEST_CASE("Duhamel prediction tracks a genuinely rotating projector") {
    // Underparametrized bottleneck (K = 4 < QN = 5): ran(D) moves with theta,
    // unlike the duplicated-input case whose out-of-range directions are
    // fixed. Started from a solidly full-rank point so the rank decision stays
    // well conditioned over most of the run.
    ModelSpec spec;
    spec.input_dim = 1;
    spec.output_dim = 1;
    spec.hidden_widths = {1};
    const Dataset data(Matrix(1, 5, {-2.0, -1.0, 0.0, 1.0, 2.0}),
                       Matrix(1, 5, {1.0, -1.0, 1.0, -1.0, 1.0}));
    ParamVector theta0;
    theta0.theta = {1.2, 0.1, 1.0, 0.0};

    const auto traj = reparam::reparametrized_flow(spec, theta0, data, t_config(5e-4, 1), 0.6);
    REQUIRE(!traj.diverged);
    CHECK(linalg::max_abs_diff(traj.projectors.front(), traj.projectors.back()) > 0.1);

    const auto predicted = reparam::deviation_via_propagator(traj);
    for (std::size_t i : {traj.records.size() / 3, 2 * traj.records.size() / 3,
                          traj.records.size() - 1}) {
        const auto& rec = traj.records[i];
        const std::vector<double> measured = linalg::sub(rec.x_flat, rec.lin_interp_ref);
        const double mnorm = linalg::norm2(measured);
        REQUIRE(mnorm > 0.1);
        CHECK(linalg::norm2(linalg::sub(measured, predicted[i])) / mnorm <= 2e-3);
    }
}

TEST_CASE("the two deviation_via_propagator overloads agree") {
    const auto deficient = reparam::build_rank_deficient_case(false);
    const auto traj = reparam::reparametrized_flow(deficient.spec, deficient.theta0,
                                                   deficient.dataset, t_config(2e-3, 10), 0.4);
    const auto a = reparam::deviation_via_propagator(traj);
    const auto b = reparam::deviation_via_propagator(traj.records, traj.projectors);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(linalg::norm2(linalg::sub(a[i], b[i])) <= 1e-10);
}

TEST_CASE("mismatched grids are rejected") {
    const auto deficient = reparam::build_rank_deficient_case(false);
    const auto traj = reparam::reparametrized_flow(deficient.spec, deficient.theta0,
                                                   deficient.dataset, t_config(2e-3, 20), 0.3);
    auto projectors = traj.projectors;
    projectors.pop_back();
    CHECK_THROWS_AS((void)reparam::deviation_via_propagator(traj.records, projectors),
                    std::invalid_argument);
}
