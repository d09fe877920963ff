#ifndef UAVMEC_CLI_HPP
#define UAVMEC_CLI_HPP

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "uavmec/orchestrator.hpp"
#include "uavmec/report_io.hpp"
#include "uavmec/scenario_io.hpp"

// Command front end. A solve writes trajectory.csv, association.csv,
// power.csv, iterations.csv and summary.json into the output directory; a
// sweep writes sweep.csv with one row per (parameter value, scheme).
// Exit codes: 0 solved, 2 infeasible instance, 1 usage or input error.

namespace uavmec {

struct SweepSpec {
  std::string param; // battery_J | cpu_freq_hz | v_max
  std::vector<double> values;
};

struct CliOptions {
  std::string scenario_path;
  std::string out_dir = ".";
  std::vector<Scheme> schemes = {Scheme::Proposed};
  std::optional<SweepSpec> sweep;
  std::optional<std::uint64_t> seed;
  double tol_rel = 1e-4;
  int max_iters = 100;
  bool verbose = false;
  int jobs = 1;
};

inline SweepSpec parse_sweep(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("sweep spec must look like PARAM=v1,v2,...");
  SweepSpec spec;
  spec.param = text.substr(0, eq);
  if (spec.param != "battery_J" && spec.param != "cpu_freq_hz" && spec.param != "v_max")
    throw std::invalid_argument("unknown sweep parameter: " + spec.param +
                                " (expected battery_J, cpu_freq_hz or v_max)");
  std::stringstream ss(text.substr(eq + 1));
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    spec.values.push_back(std::stod(tok));
  }
  if (spec.values.empty()) throw std::invalid_argument("sweep value list is empty");
  for (double v : spec.values)
    if (!(v > 0)) throw std::invalid_argument("sweep values must be positive");
  return spec;
}

inline Scheme parse_scheme(const std::string& name) {
  if (name == "proposed") return Scheme::Proposed;
  if (name == "scheme1") return Scheme::SchemeI;
  if (name == "scheme2") return Scheme::SchemeII;
  throw std::invalid_argument("unknown scheme: " + name);
}

namespace detail_cli {

inline Scenario apply_sweep_value(Scenario s, const std::string& param, double value) {
  if (param == "battery_J") s.uav.battery = value;
  else if (param == "cpu_freq_hz") s.uav.cpu_freq = value;
  else if (param == "v_max") s.uav.v_max = value;
  s.validate();
  return s;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

} // namespace detail_cli

inline int cmd_solve(const CliOptions& opt) {
  Scenario scen;
  try {
    const std::uint64_t* seed = opt.seed ? &*opt.seed : nullptr;
    scen = load_scenario(opt.scenario_path, seed);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }

  RunConfig cfg;
  cfg.tol_rel = opt.tol_rel;
  cfg.max_iters = opt.max_iters;
  cfg.scheme = opt.schemes.empty() ? Scheme::Proposed : opt.schemes.front();
  cfg.seed = scen.seed;
  cfg.verbose = opt.verbose;
  const SolveReport report = run(scen, cfg);

  try {
    namespace fs = std::filesystem;
    fs::create_directories(opt.out_dir);
    const fs::path dir(opt.out_dir);
    if (report.status != RunStatus::Infeasible) {
      auto os = detail_cli::open_out(dir / "trajectory.csv");
      write_trajectory_csv(os, scen, report.trajectory);
      os = detail_cli::open_out(dir / "association.csv");
      write_association_csv(os, report.association);
      os = detail_cli::open_out(dir / "power.csv");
      write_power_csv(os, report.power);
      os = detail_cli::open_out(dir / "iterations.csv");
      write_iterations_csv(os, report.records);
    }
    auto os = detail_cli::open_out(dir / "summary.json");
    os << summary_json(scen, report).dump(2) << "\n";
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }

  switch (report.status) {
    case RunStatus::Converged:
    case RunStatus::MaxIterations:
      return 0;
    case RunStatus::Infeasible:
      std::fprintf(stderr, "infeasible: %s\n", report.reason.c_str());
      return 2;
    case RunStatus::MonotoneBreach:
      std::fprintf(stderr, "error: %s\n", report.reason.c_str());
      return 1;
  }
  return 1;
}

inline int cmd_sweep(const CliOptions& opt) {
  if (!opt.sweep) {
    std::fprintf(stderr, "error: no sweep specification\n");
    return 1;
  }
  Scenario base;
  try {
    const std::uint64_t* seed = opt.seed ? &*opt.seed : nullptr;
    base = load_scenario(opt.scenario_path, seed);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }

  std::vector<double> values = opt.sweep->values;
  std::sort(values.begin(), values.end());
  std::vector<Scheme> schemes = opt.schemes;
  if (schemes.empty()) schemes = {Scheme::Proposed};

  struct Point {
    double value;
    Scheme scheme;
  };
  std::vector<Point> points;
  for (double v : values)
    for (Scheme sc : schemes) points.push_back({v, sc});
  std::vector<SweepRow> rows(points.size());

  auto run_point = [&](size_t i) {
    SweepRow row;
    row.param = opt.sweep->param;
    row.value = points[i].value;
    row.scheme = points[i].scheme;
    try {
      Scenario scen =
          detail_cli::apply_sweep_value(base, opt.sweep->param, points[i].value);
      RunConfig cfg;
      cfg.tol_rel = opt.tol_rel;
      cfg.max_iters = opt.max_iters;
      cfg.scheme = points[i].scheme;
      cfg.seed = scen.seed;
      const SolveReport rep = run(scen, cfg);
      row.status = to_string(rep.status);
      row.s_bits = rep.s_bits;
      row.flight = rep.ledger.flight;
      row.compute = rep.ledger.compute;
      row.iterations = rep.iterations;
    } catch (const std::exception& e) {
      row.status = std::string("error: ") + e.what();
    }
    rows[i] = row;
  };

  const int jobs = std::max(1, opt.jobs);
  if (jobs == 1) {
    for (size_t i = 0; i < points.size(); ++i) run_point(i);
  } else {
    size_t next = 0;
    std::vector<std::thread> pool;
    std::mutex mu;
    for (int t = 0; t < jobs; ++t)
      pool.emplace_back([&] {
        for (;;) {
          size_t i;
          {
            std::lock_guard<std::mutex> lock(mu);
            if (next >= points.size()) return;
            i = next++;
          }
          run_point(i);
        }
      });
    for (auto& th : pool) th.join();
  }

  try {
    namespace fs = std::filesystem;
    fs::create_directories(opt.out_dir);
    auto os = detail_cli::open_out(fs::path(opt.out_dir) / "sweep.csv");
    write_sweep_csv(os, rows);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

} // namespace uavmec

#endif // UAVMEC_CLI_HPP
