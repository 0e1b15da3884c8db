#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace flowlab::experiments {

inline constexpr const char* kToolVersion = "flowlab 1.0.0";
/// Overrides the root that output_dir is resolved under.
inline constexpr const char* kOutputRootEnv = "FLOWLAB_OUTPUT_ROOT";

struct CheckResult {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct RunManifest {
    nlohmann::json config_echo;
    std::vector<std::string> artifacts;
    std::vector<CheckResult> checks;
    std::string tool_version = kToolVersion;
    double wall_clock_seconds = 0.0;
    bool passed = false;
};

struct RunOutcome {
    RunManifest manifest;
    std::string output_dir;
};

/// Validates the config (rejecting unknown keys field by field), executes the
/// named experiment, writes its artifacts plus run_manifest.json into the
/// output directory, and returns the manifest.
RunOutcome run_config_json(const nlohmann::json& config);
RunOutcome run_config_file(const std::string& path);

struct ExperimentInfo {
    std::string name;
    std::string description;
};

/// The nine experiment kinds, in stable catalog order.
const std::vector<ExperimentInfo>& list_experiments();

/// Deterministic uniform draws shared by the experiment and verification
/// suites (53-bit mantissa mapping, independent of std distributions).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}
    double unit();                          // [0, 1)
    double uniform(double lo, double hi);   // [lo, hi)
    std::size_t index(std::size_t bound);   // [0, bound)

private:
    std::uint64_t next_word();
    std::uint64_t state_;
};

}  // namespace flowlab::experiments
