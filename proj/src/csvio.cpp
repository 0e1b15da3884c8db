#include "flowlab/csvio.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace flowlab::csvio {

std::string format_double(double v) {
    char buf[40];
    // 17 significant digits round-trip any double exactly.
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_text_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << contents;
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::string trajectory_csv(const flows::Trajectory& traj) {
    std::string out = "s,cost,grad_norm,rank";
    const std::size_t qn = traj.records.empty() ? 0 : traj.records.front().x_flat.size();
    for (std::size_t i = 0; i < qn; ++i) out += ",x_" + std::to_string(i);
    out += "\n";
    for (const auto& r : traj.records) {
        out += format_double(r.time) + "," + format_double(r.cost) + "," +
               format_double(r.grad_theta_norm) + "," + std::to_string(r.jacobian_rank);
        for (double v : r.x_flat) out += "," + format_double(v);
        out += "\n";
    }
    return out;
}

std::string theta_sidecar_csv(const flows::Trajectory& traj) {
    std::string out = "s";
    const std::size_t k = traj.records.empty() ? 0 : traj.records.front().theta.theta.size();
    for (std::size_t i = 0; i < k; ++i) out += ",theta_" + std::to_string(i);
    out += "\n";
    for (const auto& r : traj.records) {
        out += format_double(r.time);
        for (double v : r.theta.theta) out += "," + format_double(v);
        out += "\n";
    }
    return out;
}

std::string reparam_csv(const reparam::ReparamTrajectory& traj) {
    std::string out = "t,deviation_norm,projector_defect";
    const std::size_t qn = traj.records.empty() ? 0 : traj.records.front().x_flat.size();
    for (std::size_t i = 0; i < qn; ++i) out += ",x_" + std::to_string(i);
    out += "\n";
    for (const auto& r : traj.records) {
        out += format_double(r.t) + "," + format_double(r.deviation_norm) + "," +
               format_double(r.projector_defect);
        for (double v : r.x_flat) out += "," + format_double(v);
        out += "\n";
    }
    return out;
}

std::string path_csv(const pathsolve::PathSolveResult& result) {
    std::string out = "s,tracking_error,defect,rank";
    const std::size_t qn = result.records.empty() ? 0 : result.records.front().x_realized.size();
    for (std::size_t i = 0; i < qn; ++i) out += ",x_" + std::to_string(i);
    for (std::size_t i = 0; i < qn; ++i) out += ",xhat_" + std::to_string(i);
    out += "\n";
    // Range diagnostics live on the step grid; align records with the nearest
    // step sample at or before the record time.
    std::size_t ridx = 0;
    for (const auto& rec : result.records) {
        while (ridx + 1 < result.range.size() && result.range[ridx + 1].s <= rec.s + 1e-15) ++ridx;
        const auto& rg = result.range.empty() ? pathsolve::RangeSample{} : result.range[ridx];
        out += format_double(rec.s) + "," + format_double(rec.tracking_error) + "," +
               format_double(rg.defect) + "," + std::to_string(rg.rank);
        for (double v : rec.x_realized) out += "," + format_double(v);
        for (double v : rec.x_prescribed) out += "," + format_double(v);
        out += "\n";
    }
    return out;
}

std::string sweep_csv(const std::vector<flows::EquilibriumSweepEntry>& sweep) {
    std::string out = "alpha,field_norm\n";
    for (const auto& e : sweep)
        out += format_double(e.alpha) + "," + format_double(e.field_norm) + "\n";
    return out;
}

}  // namespace flowlab::csvio
