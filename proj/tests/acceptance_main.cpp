// Acceptance suite: runs every verification criterion at its pinned tolerance
// and prints one PASS/FAIL line per criterion. Criterion 12 (determinism)
// launches the flowlab binary twice and byte-compares the CSV artifacts.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "flowlab/acceptance.hpp"

namespace fs = std::filesystem;

namespace {

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::vector<fs::path> csv_files(const fs::path& root) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(root))
        if (entry.is_regular_file() && entry.path().extension() == ".csv")
            files.push_back(fs::relative(entry.path(), root));
    std::sort(files.begin(), files.end());
    return files;
}

flowlab::acceptance::CriterionResult determinism_criterion(const fs::path& work) {
#ifdef FLOWLAB_BIN_PATH
    const std::string binary = FLOWLAB_BIN_PATH;
#else
    const std::string binary = "flowlab";
#endif
    const fs::path dir_a = work / "determinism_a";
    const fs::path dir_b = work / "determinism_b";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);

    flowlab::acceptance::CriterionResult result;
    result.index = 12;
    result.name = "verify --all determinism";

    for (const fs::path& dir : {dir_a, dir_b}) {
        const std::string cmd = "\"" + binary + "\" verify --all --seed 1 --output-dir \"" +
                                dir.string() + "\" > \"" + (dir.string() + ".log") + "\" 2>&1";
        const int rc = std::system(cmd.c_str());
        if (rc != 0) {
            result.pass = false;
            result.detail = "verify run in " + dir.string() + " exited with " + std::to_string(rc);
            return result;
        }
    }

    const std::vector<fs::path> files_a = csv_files(dir_a);
    const std::vector<fs::path> files_b = csv_files(dir_b);
    if (files_a.empty() || files_a != files_b) {
        result.pass = false;
        result.detail = "artifact lists differ (" + std::to_string(files_a.size()) + " vs " +
                        std::to_string(files_b.size()) + ")";
        return result;
    }
    for (const fs::path& rel : files_a) {
        if (read_bytes(dir_a / rel) != read_bytes(dir_b / rel)) {
            result.pass = false;
            result.detail = "byte mismatch in " + rel.string();
            return result;
        }
    }
    result.pass = true;
    result.detail = std::to_string(files_a.size()) + " CSV artifacts byte-identical";
    return result;
}

}  // namespace

int main() {
    const fs::path work = fs::current_path() / "acceptance_out";
    fs::create_directories(work);

    flowlab::acceptance::Options opts;
    opts.seed = 1;
    opts.output_dir = (work / "criteria").string();

    std::vector<flowlab::acceptance::CriterionResult> results =
        flowlab::acceptance::run_primary_criteria(opts);
    results.push_back(determinism_criterion(work));

    int failures = 0;
    for (const auto& r : results) {
        std::printf("%s\n", flowlab::acceptance::format_line(r).c_str());
        if (!r.pass) ++failures;
    }
    std::printf("%zu/%zu acceptance criteria passed\n", results.size() - failures, results.size());
    return failures == 0 ? 0 : 1;
}
