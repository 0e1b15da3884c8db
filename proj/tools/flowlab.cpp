#include <clocale>
#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "flowlab/acceptance.hpp"
#include "flowlab/experiments.hpp"

namespace {

int cmd_run(const std::string& config_path) {
    const flowlab::experiments::RunOutcome outcome =
        flowlab::experiments::run_config_file(config_path);
    for (const auto& check : outcome.manifest.checks) {
        std::printf("%-34s %s  (value %.6g, tolerance %.6g)\n", check.name.c_str(),
                    check.pass ? "PASS" : "FAIL", check.value, check.tolerance);
    }
    std::printf("manifest: %s/run_manifest.json\n", outcome.output_dir.c_str());
    std::printf("%s\n", outcome.manifest.passed ? "PASSED" : "FAILED");
    return outcome.manifest.passed ? 0 : 1;
}

int cmd_list() {
    for (const auto& e : flowlab::experiments::list_experiments())
        std::printf("%-22s %s\n", e.name.c_str(), e.description.c_str());
    return 0;
}

int cmd_verify(const flowlab::acceptance::Options& opts) {
    const auto results = flowlab::acceptance::run_primary_criteria(opts);
    int failures = 0;
    for (const auto& r : results) {
        std::printf("%s\n", flowlab::acceptance::format_line(r).c_str());
        if (!r.pass) ++failures;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(results.size()) - failures,
                results.size());
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    std::setlocale(LC_ALL, "C");

    CLI::App app{"numerical laboratory for pseudoinverse-adapted gradient flows"};
    app.require_subcommand(1);

    std::string config_path;
    CLI::App* run = app.add_subcommand("run", "execute one experiment from a JSON config");
    run->add_option("config", config_path, "experiment config file")->required();

    app.add_subcommand("list", "print the experiment catalog");

    flowlab::acceptance::Options opts;
    bool verify_all = false;
    CLI::App* verify = app.add_subcommand("verify", "run the verification suite");
    verify->add_flag("--all", verify_all, "run every criterion");
    verify->add_option("--seed", opts.seed, "base seed for the seeded draws");
    verify->add_option("--output-dir", opts.output_dir, "artifact directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path);
        if (app.get_subcommand("list")->parsed()) return cmd_list();
        if (verify->parsed()) {
            if (!verify_all) {
                std::fprintf(stderr, "verify: pass --all to run the full suite\n");
                return 2;
            }
            return cmd_verify(opts);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 2;
}
