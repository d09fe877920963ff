#ifndef UAVMEC_REPORT_IO_HPP
#define UAVMEC_REPORT_IO_HPP

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "uavmec/model.hpp"
#include "uavmec/orchestrator.hpp"

// Plot-ready result files. All floats are written with 17 significant
// digits, so reloading reproduces the solution bit-for-bit; every CSV starts
// with the versioned header line "# uav-mec v1".

namespace uavmec {

inline constexpr const char* kCsvHeader = "# uav-mec v1";

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// n, x, y, speed for n = 0..N (speed of the step arriving at waypoint n)
inline void write_trajectory_csv(std::ostream& os, const Scenario& scen,
                                 const Trajectory& traj) {
  os << kCsvHeader << "\nn,x,y,speed\n";
  const double dt = scen.time.slot_len();
  for (size_t n = 0; n < traj.points.size(); ++n) {
    const double speed =
        n == 0 ? 0.0 : (traj.points[n] - traj.points[n - 1]).norm() / dt;
    os << n << ',' << fmt17(traj.points[n].x()) << ',' << fmt17(traj.points[n].y())
       << ',' << fmt17(speed) << "\n";
  }
}

// n, served_ue with 1-based slot and UE indices
inline void write_association_csv(std::ostream& os, const Association& assoc) {
  os << kCsvHeader << "\nn,served_ue\n";
  for (int n = 0; n < assoc.N(); ++n)
    os << (n + 1) << ',' << (assoc.served_ue(n) + 1) << "\n";
}

// n, k, p_watts over all slots and UEs (slot-major)
inline void write_power_csv(std::ostream& os, const PowerSchedule& power) {
  os << kCsvHeader << "\nn,k,p_watts\n";
  for (int n = 0; n < power.p.cols(); ++n)
    for (int k = 0; k < power.p.rows(); ++k)
      os << (n + 1) << ',' << (k + 1) << ',' << fmt17(power.p(k, n)) << "\n";
}

inline void write_iterations_csv(std::ostream& os,
                                 const std::vector<IterationRecord>& records) {
  os << kCsvHeader << "\nr,S_bits,E_F,E_C,residual\n";
  for (const auto& rec : records)
    os << rec.r << ',' << fmt17(rec.s_bits) << ',' << fmt17(rec.ledger.flight) << ','
       << fmt17(rec.ledger.compute) << ',' << fmt17(rec.max_residual) << "\n";
}

inline nlohmann::json summary_json(const Scenario& scen, const SolveReport& report) {
  nlohmann::json j;
  j["status"] = to_string(report.status);
  j["S_bits"] = report.s_bits;
  j["iterations"] = report.iterations;
  j["max_residual"] = report.max_residual;
  j["energy"] = {{"flight_J", report.ledger.flight},
                 {"compute_J", report.ledger.compute},
                 {"battery_J", scen.uav.battery}};
  for (int k = 0; k < scen.K(); ++k) {
    nlohmann::json ju;
    ju["id"] = scen.ues[k].id;
    const double sk = report.s_per_ue.size() > k ? report.s_per_ue[k] : 0.0;
    ju["S_bits"] = sk;
    ju["min_bits"] = scen.ues[k].min_bits;
    ju["qos_met"] = sk >= scen.ues[k].min_bits * (1.0 - kFeasTol);
    j["ues"].push_back(ju);
  }
  if (!report.reason.empty()) j["reason"] = report.reason;
  return j;
}

struct SweepRow {
  std::string param;
  double value = 0.0;
  Scheme scheme = Scheme::Proposed;
  std::string status;
  double s_bits = 0.0;
  double flight = 0.0;
  double compute = 0.0;
  int iterations = 0;
};

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << kCsvHeader << "\nparam,param_value,scheme,status,S_bits,E_F,E_C,iterations\n";
  for (const auto& r : rows)
    os << r.param << ',' << fmt17(r.value) << ',' << to_string(r.scheme) << ','
       << r.status << ',' << fmt17(r.s_bits) << ',' << fmt17(r.flight) << ','
       << fmt17(r.compute) << ',' << r.iterations << "\n";
}

// ---------------------------------------------------------------------------
// Readers (round-trip checks and downstream tooling)

namespace detail_io {

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, sep)) out.push_back(tok);
  return out;
}

inline std::vector<std::vector<std::string>> read_csv(std::istream& is,
                                                      const std::string& what) {
  std::string line;
  if (!std::getline(is, line) || line != kCsvHeader)
    throw std::invalid_argument(what + ": missing '# uav-mec v1' header");
  std::getline(is, line); // column names
  std::vector<std::vector<std::string>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    rows.push_back(split(line, ','));
  }
  return rows;
}

} // namespace detail_io

inline Trajectory read_trajectory_csv(std::istream& is) {
  Trajectory t;
  for (const auto& row : detail_io::read_csv(is, "trajectory.csv")) {
    if (row.size() != 4) throw std::invalid_argument("trajectory.csv: bad row");
    t.points.emplace_back(std::stod(row[1]), std::stod(row[2]));
  }
  return t;
}

inline Association read_association_csv(std::istream& is, int K) {
  std::vector<int> served;
  for (const auto& row : detail_io::read_csv(is, "association.csv")) {
    if (row.size() != 2) throw std::invalid_argument("association.csv: bad row");
    served.push_back(std::stoi(row[1]) - 1);
  }
  Association a;
  a.b = MatXi::Zero(K, static_cast<int>(served.size()));
  for (size_t n = 0; n < served.size(); ++n) {
    if (served[n] < 0 || served[n] >= K)
      throw std::invalid_argument("association.csv: UE index out of range");
    a.b(served[n], static_cast<int>(n)) = 1;
  }
  return a;
}

inline PowerSchedule read_power_csv(std::istream& is, int K, int N) {
  PowerSchedule p;
  p.p = MatX::Zero(K, N);
  for (const auto& row : detail_io::read_csv(is, "power.csv")) {
    if (row.size() != 3) throw std::invalid_argument("power.csv: bad row");
    const int n = std::stoi(row[0]) - 1;
    const int k = std::stoi(row[1]) - 1;
    if (n < 0 || n >= N || k < 0 || k >= K)
      throw std::invalid_argument("power.csv: index out of range");
    p.p(k, n) = std::stod(row[2]);
  }
  return p;
}

} // namespace uavmec

#endif // UAVMEC_REPORT_IO_HPP
