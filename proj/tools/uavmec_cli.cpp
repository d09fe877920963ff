#include <string>
#include <vector>

#include "CLI11.hpp"
#include "uavmec/cli.hpp"

// uavmec --scenario FILE [--scheme NAME]... [--sweep PARAM=v1,v2,...]
//        [--out DIR] [--seed U64] [--tol REL] [--max-iter N] [--jobs N]
//        [--verbose]

int main(int argc, char** argv) {
  CLI::App app{"Joint user association, trajectory and uploading-power "
               "optimizer for UAV-aided mobile edge computing"};

  std::string scenario_path;
  std::string out_dir = ".";
  std::vector<std::string> scheme_names;
  std::string sweep_text;
  std::uint64_t seed = 0;
  bool seed_given = false;
  double tol_rel = 1e-4;
  int max_iter = 100;
  int jobs = 1;
  bool verbose = false;

  app.add_option("--scenario", scenario_path, "scenario JSON file")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("--scheme", scheme_names,
                 "schemes to run: proposed, scheme1, scheme2 (repeatable)")
      ->check(CLI::IsMember({"proposed", "scheme1", "scheme2"}));
  app.add_option("--sweep", sweep_text,
                 "sweep spec PARAM=v1,v2,... with PARAM one of battery_J, "
                 "cpu_freq_hz, v_max");
  app.add_option("--out", out_dir, "output directory (created if absent)");
  app.add_option("--seed", seed, "override the scenario seed")
      ->each([&](const std::string&) { seed_given = true; });
  app.add_option("--tol", tol_rel, "relative convergence tolerance");
  app.add_option("--max-iter", max_iter, "outer iteration cap");
  app.add_option("--jobs", jobs, "concurrent sweep points");
  app.add_flag("--verbose", verbose, "per-iteration progress on stderr");

  CLI11_PARSE(app, argc, argv);

  uavmec::CliOptions opt;
  opt.scenario_path = scenario_path;
  opt.out_dir = out_dir;
  opt.tol_rel = tol_rel;
  opt.max_iters = max_iter;
  opt.jobs = jobs;
  opt.verbose = verbose;
  if (seed_given) opt.seed = seed;
  try {
    opt.schemes.clear();
    for (const auto& name : scheme_names) opt.schemes.push_back(uavmec::parse_scheme(name));
    if (opt.schemes.empty()) {
      if (sweep_text.empty())
        opt.schemes = {uavmec::Scheme::Proposed};
      else
        opt.schemes = {uavmec::Scheme::Proposed, uavmec::Scheme::SchemeI,
                       uavmec::Scheme::SchemeII};
    }
    if (!sweep_text.empty()) opt.sweep = uavmec::parse_sweep(sweep_text);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }

  return opt.sweep ? uavmec::cmd_sweep(opt) : uavmec::cmd_solve(opt);
}
