#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace flowlab::acceptance {

struct CriterionResult {
    int index = 0;
    std::string name;
    bool pass = false;
    std::string detail;
};

struct Options {
    std::uint64_t seed = 1;
    std::string output_dir = "verify_out";
};

/// Runs verification criteria 1-11 (everything except the cross-process
/// determinism check), writing per-criterion artifacts under output_dir.
std::vector<CriterionResult> run_primary_criteria(const Options& opts);

/// "[ 3] PASS  induced-field identity ..." formatting used by the CLI and the
/// acceptance binary.
std::string format_line(const CriterionResult& r);

}  // namespace flowlab::acceptance
