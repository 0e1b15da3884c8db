#pragma once

#include <string>
#include <vector>

#include "flowlab/models.hpp"

namespace flowlab::references {

/// Fixed desk-scale configurations used by the experiment catalog and the
/// verification suite. All of them are deterministic: architecture, data and
/// the initialization seed are pinned here.
struct ReferenceCase {
    std::string name;
    models::ModelSpec spec;
    models::ParamVector theta0;
    models::Dataset dataset;
};

/// M=2, Q=2, N=3, one hidden tanh layer of width 16 (K = 82 >= QN = 6).
ReferenceCase tiny_full_rank();

/// tiny-full-rank with the second training input duplicated from the first;
/// labels differ unless `consistent_labels`, certifying rank(D) <= Q(N-1).
ReferenceCase rank_deficient_case(bool consistent_labels = false);

/// No hidden layer: f(x) = W x + b with K = 6 = QN; the Jacobian is constant.
ReferenceCase affine();

/// tiny-full-rank inputs with strictly positive simplex labels.
ReferenceCase tiny_simplex();

/// Q=2, N=4 two-class regression set on the tiny-full-rank architecture. The
/// class labels sit a small pinned offset away from the initial class means so
/// a reparametrized run sweeps the energies over several orders of magnitude.
ReferenceCase collapse_two_class();

std::vector<std::string> names();
ReferenceCase by_name(const std::string& name);

}  // namespace flowlab::references
