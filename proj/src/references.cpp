#include "flowlab/references.hpp"

#include <stdexcept>

namespace flowlab::references {

namespace {

constexpr std::uint64_t kTinySeed = 2024;
constexpr std::uint64_t kCollapseSeed = 77;

models::ModelSpec tiny_spec() {
    models::ModelSpec spec;
    spec.input_dim = 2;
    spec.output_dim = 2;
    spec.hidden_widths = {16};
    spec.activation = models::Activation::Tanh;
    return spec;
}

linalg::Matrix tiny_inputs() {
    // columns are samples
    return linalg::Matrix(2, 3, {0.2, 1.0, -0.7,
                                 -1.0, 0.5, 0.8});
}

linalg::Matrix tiny_labels() {
    return linalg::Matrix(2, 3, {1.0, 0.0, 0.5,
                                 0.0, 1.0, -0.5});
}

}  // namespace

ReferenceCase tiny_full_rank() {
    models::ModelSpec spec = tiny_spec();
    return ReferenceCase{"tiny-full-rank", spec, models::init_params(spec, kTinySeed),
                         models::Dataset(tiny_inputs(), tiny_labels())};
}

ReferenceCase rank_deficient_case(bool consistent_labels) {
    models::ModelSpec spec = tiny_spec();
    linalg::Matrix inputs = tiny_inputs();
    inputs(0, 1) = inputs(0, 0);  // duplicate the first sample into the second
    inputs(1, 1) = inputs(1, 0);
    linalg::Matrix labels = tiny_labels();
    if (consistent_labels) {
        labels(0, 1) = labels(0, 0);
        labels(1, 1) = labels(1, 0);
    }
    return ReferenceCase{consistent_labels ? "rank-deficient-consistent" : "rank-deficient", spec,
                         models::init_params(spec, kTinySeed),
                         models::Dataset(std::move(inputs), std::move(labels))};
}

ReferenceCase affine() {
    models::ModelSpec spec;
    spec.input_dim = 2;
    spec.output_dim = 2;
    return ReferenceCase{"affine", spec, models::init_params(spec, kTinySeed),
                         models::Dataset(tiny_inputs(), tiny_labels())};
}

ReferenceCase tiny_simplex() {
    models::ModelSpec spec = tiny_spec();
    linalg::Matrix labels(2, 3, {0.6, 0.3, 0.5,
                                 0.4, 0.7, 0.5});
    return ReferenceCase{"tiny-simplex", spec, models::init_params(spec, kTinySeed),
                         models::Dataset(tiny_inputs(), std::move(labels),
                                         models::LabelKind::Simplex)};
}

ReferenceCase collapse_two_class() {
    models::ModelSpec spec = tiny_spec();
    // Two tight input clusters, two samples per class.
    linalg::Matrix inputs(2, 4, {-1.00, -0.96, 0.90, 0.94,
                                 0.30, 0.33, -0.40, -0.37});
    const models::ParamVector theta0 = models::init_params(spec, kCollapseSeed);
    // Labels = initial class means +/- a pinned component-wise offset.
    const models::Dataset probe(inputs, linalg::Matrix(2, 4), models::LabelKind::Regression);
    const std::vector<double> x0 = models::output_flatten(spec, theta0, probe);
    const double offset = 0.025;
    linalg::Matrix labels(2, 4);
    for (std::size_t q = 0; q < 2; ++q) {
        const double mean0 = 0.5 * (x0[0 * 2 + q] + x0[1 * 2 + q]);
        const double mean1 = 0.5 * (x0[2 * 2 + q] + x0[3 * 2 + q]);
        const double bump = (q == 0 ? offset : -offset);
        labels(q, 0) = labels(q, 1) = mean0 + bump;
        labels(q, 2) = labels(q, 3) = mean1 - bump;
    }
    return ReferenceCase{"collapse-two-class", spec, theta0,
                         models::Dataset(std::move(inputs), std::move(labels),
                                         models::LabelKind::Regression, {0, 0, 1, 1})};
}

std::vector<std::string> names() {
    return {"tiny-full-rank", "rank-deficient", "rank-deficient-consistent", "affine",
            "tiny-simplex", "collapse-two-class"};
}

ReferenceCase by_name(const std::string& name) {
    if (name == "tiny-full-rank") return tiny_full_rank();
    if (name == "rank-deficient") return rank_deficient_case(false);
    if (name == "rank-deficient-consistent") return rank_deficient_case(true);
    if (name == "affine") return affine();
    if (name == "tiny-simplex") return tiny_simplex();
    if (name == "collapse-two-class") return collapse_two_class();
    throw std::invalid_argument("unknown reference case: " + name);
}

}  // namespace flowlab::references
