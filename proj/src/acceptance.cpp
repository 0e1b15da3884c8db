#include "flowlab/acceptance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "flowlab/analysis.hpp"
#include "flowlab/csvio.hpp"
#include "flowlab/experiments.hpp"
#include "flowlab/flows.hpp"
#include "flowlab/losses.hpp"
#include "flowlab/models.hpp"
#include "flowlab/references.hpp"
#include "flowlab/reparam.hpp"

namespace flowlab::acceptance {

namespace {

using experiments::Rng;
using nlohmann::json;

std::string num(double v) { return csvio::format_double(v); }

std::string subdir(const Options& opts, const std::string& name) {
    return (std::filesystem::path(opts.output_dir) / name).string();
}

// Runs one experiment config and folds its manifest verdict into a criterion.
experiments::RunOutcome run_experiment(const json& config) {
    return experiments::run_config_json(config);
}

double check_value(const experiments::RunManifest& m, const std::string& name) {
    for (const auto& c : m.checks)
        if (c.name == name) return c.value;
    return std::nan("");
}

json flow_json(double alpha, double step, double max_time, double stop, std::size_t stride) {
    return {{"alpha", alpha},          {"step_size", step},       {"max_time", max_time},
            {"stop_grad_norm", stop},  {"integrator", "rk4"},     {"record_stride", stride}};
}

// --------------------------------------------------------------- criterion 1

CriterionResult criterion_penrose(const Options& opts) {
    const json config = {{"experiment", "penrose_suite"},
                         {"seed", opts.seed},
                         {"output_dir", subdir(opts, "c01_penrose")},
                         {"penrose", {{"matrix_count", 200}, {"max_rows", 12}, {"max_cols", 20}}}};
    const auto outcome = run_experiment(config);
    return {1, "pseudoinverse identity suite", outcome.manifest.passed,
            "worst residual " + num(check_value(outcome.manifest, "penrose_residuals"))};
}

// --------------------------------------------------------------- criterion 2

CriterionResult criterion_jacobian(const Options& opts) {
    const double fd_step = 1e-5;
    const double gate = 1e-8;
    double worst_rel = 0.0;
    std::string csv = "model,draw,worst_relative_error\n";
    for (const std::string name : {"tiny-full-rank", "rank-deficient", "affine"}) {
        const references::ReferenceCase ref = references::by_name(name);
        const std::size_t k_params = ref.spec.param_count();
        for (std::size_t draw = 0; draw < 20; ++draw) {
            const models::ParamVector params =
                models::init_params(ref.spec, opts.seed * 1000 + draw * 29 + 7);
            const linalg::Matrix d = models::jacobian(ref.spec, params, ref.dataset).matrix;
            double draw_worst = 0.0;
            models::ParamVector shifted = params;
            for (std::size_t k = 0; k < k_params; ++k) {
                shifted.theta[k] = params.theta[k] + fd_step;
                const std::vector<double> plus =
                    models::output_flatten(ref.spec, shifted, ref.dataset);
                shifted.theta[k] = params.theta[k] - fd_step;
                const std::vector<double> minus =
                    models::output_flatten(ref.spec, shifted, ref.dataset);
                shifted.theta[k] = params.theta[k];
                for (std::size_t r = 0; r < plus.size(); ++r) {
                    const double fd = (plus[r] - minus[r]) / (2.0 * fd_step);
                    const double an = d(r, k);
                    const double mag = std::max(std::abs(an), std::abs(fd));
                    if (mag <= gate) continue;
                    draw_worst = std::max(draw_worst, std::abs(an - fd) / mag);
                }
            }
            worst_rel = std::max(worst_rel, draw_worst);
            csv += name + "," + std::to_string(draw) + "," + num(draw_worst) + "\n";
        }
    }
    std::filesystem::create_directories(subdir(opts, "c02_jacobian"));
    csvio::write_text_file(subdir(opts, "c02_jacobian") + "/jacobian_fd.csv", csv);
    return {2, "Jacobian vs central finite differences", worst_rel <= 1e-6,
            "worst relative error " + num(worst_rel)};
}

// --------------------------------------------------------------- criterion 3

CriterionResult criterion_induced_field(const Options& opts) {
    double worst_ratio = 0.0;
    std::string csv = "model,alpha,draw,residual,bound\n";
    for (const std::string name : {"tiny-full-rank", "rank-deficient"}) {
        const references::ReferenceCase ref = references::by_name(name);
        for (double alpha : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            for (std::size_t draw = 0; draw < 20; ++draw) {
                const models::ParamVector params =
                    models::init_params(ref.spec, opts.seed * 2000 + draw * 13 + 5);
                const flows::OutputFieldSample sample = flows::induced_output_field(
                    ref.spec, params, ref.dataset, losses::LossKind::Squared, alpha);
                const double bound =
                    1e-8 * std::max(1.0, linalg::norm2(sample.predicted_velocity));
                worst_ratio = std::max(worst_ratio, sample.residual_norm / bound * 1e-8);
                csv += name + "," + num(alpha) + "," + std::to_string(draw) + "," +
                       num(sample.residual_norm) + "," + num(bound) + "\n";
            }
        }
    }
    std::filesystem::create_directories(subdir(opts, "c03_induced_field"));
    csvio::write_text_file(subdir(opts, "c03_induced_field") + "/residuals.csv", csv);
    return {3, "induced output field identity", worst_ratio <= 1e-8,
            "worst scaled residual " + num(worst_ratio)};
}

// --------------------------------------------------------------- criterion 4

CriterionResult criterion_equilibrium(const Options& opts) {
    const json alphas = {0.0, 0.25, 0.5, 0.75, 1.0};
    const json run_a = {{"experiment", "alpha_sweep"},
                        {"seed", opts.seed},
                        {"output_dir", subdir(opts, "c04_sweep_from_standard")},
                        {"model", {{"reference", "tiny-full-rank"}}},
                        {"dataset", {{"reference", "tiny-full-rank"}}},
                        {"loss", "squared"},
                        {"flow", flow_json(0.0, 0.05, 40000.0, 1e-8, 4000)},
                        {"alphas", alphas}};
    const json run_b = {{"experiment", "alpha_sweep"},
                        {"seed", opts.seed},
                        {"output_dir", subdir(opts, "c04_sweep_from_adapted")},
                        {"model", {{"reference", "tiny-full-rank"}}},
                        {"dataset", {{"reference", "tiny-full-rank"}}},
                        {"loss", "squared"},
                        {"flow", flow_json(1.0, 0.02, 400.0, 1e-8, 1000)},
                        {"alphas", alphas}};
    const auto a = run_experiment(run_a);
    const auto b = run_experiment(run_b);
    const double worst =
        std::max(check_value(a.manifest, "sweep_field_norms"),
                 check_value(b.manifest, "sweep_field_norms"));
    return {4, "equilibrium preservation across alpha", a.manifest.passed && b.manifest.passed,
            "worst sweep field norm " + num(worst)};
}

// --------------------------------------------------------------- criterion 5

CriterionResult criterion_linear_interpolation(const Options& opts) {
    const json config = {{"experiment", "reparam_check"},
                         {"seed", opts.seed},
                         {"output_dir", subdir(opts, "c05_reparam")},
                         {"model", {{"reference", "tiny-full-rank"}}},
                         {"dataset", {{"reference", "tiny-full-rank"}}},
                         {"flow", flow_json(1.0, 1e-3, 1.0, 0.0, 1)},
                         {"reparam", {{"t_max", 0.99}}}};
    const auto outcome = run_experiment(config);
    return {5, "reparametrized flow is linear interpolation", outcome.manifest.passed,
            "max deviation " + num(check_value(outcome.manifest, "max_deviation_from_linear"))};
}

// --------------------------------------------------------------- criterion 6

CriterionResult criterion_rank_loss(const Options& opts) {
    const json config = {{"experiment", "rank_loss_check"},
                         {"seed", opts.seed},
                         {"output_dir", subdir(opts, "c06_rank_loss")},
                         {"flow", flow_json(1.0, 1e-3, 1.0, 0.0, 1)},
                         {"rank_loss", {{"t_checks", {0.25, 0.5, 0.75}}}}};
    const auto outcome = run_experiment(config);

    // Full-rank control: the propagator prediction must vanish.
    const references::ReferenceCase ref = references::tiny_full_rank();
    flows::FlowConfig flow;
    flow.alpha = 1.0;
    flow.step_size = 1e-3;
    flow.max_time = 1.0;
    flow.integrator = flows::Integrator::Rk4;
    flow.record_stride = 10;
    const reparam::ReparamTrajectory traj =
        reparam::reparametrized_flow(ref.spec, ref.theta0, ref.dataset, flow, 0.75);
    const auto predicted = reparam::deviation_via_propagator(traj);
    double worst_full_rank = 0.0;
    for (const auto& p : predicted) worst_full_rank = std::max(worst_full_rank, linalg::norm2(p));

    const bool pass = outcome.manifest.passed && worst_full_rank <= 1e-10;
    return {6, "rank-loss deviation propagator", pass,
            "deficient mismatch " + num(check_value(outcome.manifest, "propagator_vs_measured")) +
                ", full-rank prediction " + num(worst_full_rank)};
}

// --------------------------------------------------------------- criterion 7

CriterionResult criterion_ce_closed_form(const Options& opts) {
    const json config = {{"experiment", "ce_equilibrium_check"},
                         {"seed", opts.seed},
                         {"output_dir", subdir(opts, "c07_ce_equilibrium")},
                         {"ce",
                          {{"q_values", {2, 3, 5}},
                           {"draws_per_q", 20},
                           {"horizon", 50.0},
                           {"step_size", 0.01}}}};
    const auto outcome = run_experiment(config);
    return {7, "cross-entropy closed-form equilibrium", outcome.manifest.passed,
            "worst ODE-to-formula distance " +
                num(check_value(outcome.manifest, "ode_vs_closed_form"))};
}

// --------------------------------------------------------------- criterion 8

CriterionResult criterion_ce_hessian(const Options& opts) {
    Rng rng(opts.seed * 4409 + 11);
    double worst_min_eig = 0.0;   // most negative
    double worst_kernel = 0.0;    // ||H u||_inf
    double worst_restricted = 1e300;
    bool ranks_ok = true;
    for (std::size_t q : {std::size_t{2}, std::size_t{3}, std::size_t{5}}) {
        for (int i = 0; i < 100; ++i) {
            std::vector<double> z(q);
            // kept inside |z| <= 5 so every softmax component stays above
            // ~5e-5 and the 1e-6 floor on the restricted quadratic form holds
            // with a wide margin; |z| up to 10 would push components to e^-20
            for (auto& v : z) v = rng.uniform(-5.0, 5.0);

            const losses::HessianSpectrumReport rep = losses::ce_hessian_rank_psd_check(z);
            ranks_ok = ranks_ok && (rep.rank == q - 1);
            worst_min_eig = std::min(worst_min_eig, rep.min_eigenvalue);

            const losses::HessianBlock block = losses::ce_hessian_block(z);
            std::vector<double> hu(q, 0.0);
            for (std::size_t r = 0; r < q; ++r)
                for (std::size_t c = 0; c < q; ++c) hu[r] += block.matrix(r, c);
            worst_kernel = std::max(worst_kernel, linalg::max_abs(hu));

            // unit vector orthogonal to the all-ones direction
            std::vector<double> v(q);
            for (auto& x : v) x = rng.uniform(-1.0, 1.0);
            double mean = 0.0;
            for (double x : v) mean += x;
            mean /= static_cast<double>(q);
            for (auto& x : v) x -= mean;
            const double nv = linalg::norm2(v);
            if (nv < 1e-6) continue;
            for (auto& x : v) x /= nv;
            const std::vector<double> hv = linalg::matvec(block.matrix, v);
            worst_restricted = std::min(worst_restricted, linalg::dot(v, hv));
        }
    }
    const bool pass = ranks_ok && worst_min_eig >= -1e-10 && worst_kernel <= 1e-12 &&
                      worst_restricted > 1e-6;
    std::filesystem::create_directories(subdir(opts, "c08_ce_hessian"));
    const json report = {{"ranks_equal_q_minus_1", ranks_ok},
                         {"min_eigenvalue", worst_min_eig},
                         {"max_kernel_violation", worst_kernel},
                         {"min_restricted_quadratic_form", worst_restricted}};
    csvio::write_text_file(subdir(opts, "c08_ce_hessian") + "/hessian_report.json",
                           report.dump(2) + "\n");
    return {8, "cross-entropy Hessian spectrum", pass,
            "min eig " + num(worst_min_eig) + ", min restricted form " + num(worst_restricted)};
}

// --------------------------------------------------------------- criterion 9

CriterionResult criterion_prescribed_path(const Options& opts) {
    auto path_config = [&](const std::string& dir, double step) {
        return json{{"experiment", "prescribed_path"},
                    {"seed", opts.seed},
                    {"output_dir", subdir(opts, dir)},
                    {"model", {{"reference", "tiny-full-rank"}}},
                    {"dataset", {{"reference", "tiny-full-rank"}}},
                    {"path",
                     {{"kind", "linear_interpolation"},
                      {"end_time", 1.0},
                      {"step_size", step},
                      {"record_stride", 1},
                      {"defect_threshold", 1e-8}}}};
    };
    const auto coarse = run_experiment(path_config("c09_path", 0.025));
    const auto fine = run_experiment(path_config("c09_path_half_step", 0.0125));
    const double err_coarse = check_value(coarse.manifest, "terminal_tracking_error");
    const double err_fine = check_value(fine.manifest, "terminal_tracking_error");
    const double ratio = err_fine > 0.0 ? err_coarse / err_fine : 1e300;
    const bool pass = coarse.manifest.passed && fine.manifest.passed && ratio >= 8.0;
    return {9, "prescribed linear path solver", pass,
            "terminal error " + num(err_coarse) + ", halving ratio " + num(ratio)};
}

// -------------------------------------------------------------- criterion 10

CriterionResult criterion_collapse(const Options& opts) {
    const json config = {{"experiment", "collapse_report"},
                         {"seed", opts.seed},
                         {"output_dir", subdir(opts, "c10_collapse")},
                         {"model", {{"reference", "collapse-two-class"}}},
                         {"dataset", {{"reference", "collapse-two-class"}}},
                         {"flow", flow_json(1.0, 1e-3, 1.0, 0.0, 1)},
                         {"reparam", {{"t_max", 0.99}}}};
    const auto outcome = run_experiment(config);
    return {10, "final-layer collapse and cost decomposition", outcome.manifest.passed,
            "terminal within-class energy " +
                num(check_value(outcome.manifest, "terminal_within_class_energy")) +
                ", mean mismatch " +
                num(check_value(outcome.manifest, "terminal_mean_mismatch_energy"))};
}

// -------------------------------------------------------------- criterion 11

CriterionResult criterion_ntk(const Options& opts) {
    auto ntk_config = [&](const std::string& dir, const std::string& ref, bool expect_pd) {
        return json{{"experiment", "ntk_report"},
                    {"seed", opts.seed},
                    {"output_dir", subdir(opts, dir)},
                    {"model", {{"reference", ref}}},
                    {"dataset", {{"reference", ref}}},
                    {"ntk", {{"expect_positive_definite", expect_pd}}}};
    };
    const auto tiny = run_experiment(ntk_config("c11_ntk_tiny", "tiny-full-rank", true));
    const auto deficient = run_experiment(ntk_config("c11_ntk_deficient", "rank-deficient", false));
    const auto aff = run_experiment(ntk_config("c11_ntk_affine", "affine", true));
    const double worst_gap = std::max({check_value(tiny.manifest, "blocks_match_gram"),
                                       check_value(deficient.manifest, "blocks_match_gram"),
                                       check_value(aff.manifest, "blocks_match_gram")});
    const bool pass =
        tiny.manifest.passed && deficient.manifest.passed && aff.manifest.passed;
    return {11, "tangent-kernel block identity", pass, "worst block gap " + num(worst_gap)};
}

}  // namespace

std::vector<CriterionResult> run_primary_criteria(const Options& opts) {
    std::filesystem::create_directories(opts.output_dir);
    std::vector<CriterionResult> results;
    results.push_back(criterion_penrose(opts));
    results.push_back(criterion_jacobian(opts));
    results.push_back(criterion_induced_field(opts));
    results.push_back(criterion_equilibrium(opts));
    results.push_back(criterion_linear_interpolation(opts));
    results.push_back(criterion_rank_loss(opts));
    results.push_back(criterion_ce_closed_form(opts));
    results.push_back(criterion_ce_hessian(opts));
    results.push_back(criterion_prescribed_path(opts));
    results.push_back(criterion_collapse(opts));
    results.push_back(criterion_ntk(opts));
    return results;
}

std::string format_line(const CriterionResult& r) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "[%2d] %s  ", r.index, r.pass ? "PASS" : "FAIL");
    return buf + r.name + " (" + r.detail + ")";
}

}  // namespace flowlab::acceptance
