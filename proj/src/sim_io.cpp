#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "mppfc/sim.hpp"

namespace mppfc {

namespace {

void append(std::string& line, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g,", v);
  line += buf;
}

std::ofstream open_for_write(const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot open " + file.string() + " for writing");
  return out;
}

}  // namespace

const std::string& csv_header() {
  static const std::string header =
      "t,x,y,z,vx,vy,vz,roll,pitch,yaw,dT,roll_cmd,pitch_cmd,yawrate_cmd,s1,s1dot,s2,s2dot,nu1,"
      "nu2,px,py,pz,pyaw,ex,ey,ez,eyaw,solve_iters,solve_time_ms,status";
  return header;
}

void export_csv(const SimLog& log, const std::filesystem::path& file) {
  std::ofstream out = open_for_write(file);
  out << csv_header() << '\n';
  std::string line;
  for (const SimRecord& r : log.records) {
    line.clear();
    append(line, r.t);
    const StateVector x = r.state.to_vector();
    for (int i = 0; i < kStateDim; ++i) append(line, x(i));
    const InputVector u = r.input.to_vector();
    for (int i = 0; i < kInputDim; ++i) append(line, u(i));
    append(line, r.z.s);
    append(line, r.z.s_dot);
    if (log.corridor) {
      append(line, r.z.s2);
      append(line, r.z.s2_dot);
    } else {
      line += ",,";
    }
    append(line, r.nu.nu1);
    if (log.corridor) {
      append(line, r.nu.nu2);
    } else {
      line += ',';
    }
    for (int i = 0; i < 4; ++i) append(line, r.reference(i));
    for (int i = 0; i < 4; ++i) append(line, r.error(i));
    line += std::to_string(r.solve_iters) + ',';
    append(line, r.solve_time_ms);
    line += to_string(r.status);
    out << line << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + file.string());
}

std::vector<CsvRow> read_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  std::string line;
  if (!std::getline(in, line) || line != csv_header()) {
    throw std::runtime_error(file.string() + ": unexpected CSV header");
  }
  std::vector<CsvRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    CsvRow row;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 31) {
      throw std::runtime_error(file.string() + ": expected 31 columns, got " +
                               std::to_string(cells.size()));
    }
    for (std::size_t i = 0; i + 1 < cells.size(); ++i) {
      row.values.push_back(cells[i].empty() ? std::numeric_limits<double>::quiet_NaN()
                                            : std::stod(cells[i]));
    }
    row.status = cells.back();
    rows.push_back(std::move(row));
  }
  return rows;
}

void summarize_json(const RunMetrics& metrics, const std::filesystem::path& file) {
  if (metrics.steps <= 0) throw std::invalid_argument("summarize_json: run has no steps");
  nlohmann::ordered_json doc;
  doc["scenario"] = metrics.scenario;
  doc["rms_position_error_m"] = metrics.rms_position_error;
  doc["max_abs_yaw_rate_rad_s"] = metrics.max_abs_yaw_rate;
  doc["time_to_path_end_s"] = metrics.time_to_path_end;  // NaN (never reached) dumps as null
  doc["constraint_violation_max"] = metrics.constraint_violation_max;
  doc["mean_solver_iters"] = metrics.mean_solver_iters;
  doc["max_solve_time_ms"] = metrics.max_solve_time_ms;
  doc["failures"] = metrics.failures;
  std::ofstream out = open_for_write(file);
  out << doc.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + file.string());
}

}  // namespace mppfc
