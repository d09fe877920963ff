// Acceptance suite: one criterion per line, [PASS]/[FAIL] with detail.
// Exit code is the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "test_scenarios.hpp"
#include "uavmec/cli.hpp"
#include "uavmec/orchestrator.hpp"
#include "uavmec/report_io.hpp"
#include "uavmec/scenario_io.hpp"
#include "uavmec/trajectory.hpp"

using namespace uavmec;
namespace fs = std::filesystem;

namespace {

double now_s() {
  using clock = std::chrono::steady_clock;
  static const clock::time_point t0 = clock::now();
  return std::chrono::duration<double>(clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
  va_list args;
  va_start(args, f);
  char buf[512];
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

// ---------------------------------------------------------------------------

AssociationIlp random_ilp(std::mt19937_64& rng, int K, int N, bool tight_qos,
                          bool tight_energy) {
  AssociationIlp ilp;
  ilp.K = K;
  ilp.N = N;
  ilp.weights = MatX(K, N);
  ilp.costs = MatX(K, N);
  for (int k = 0; k < K; ++k) {
    const double coef = oracles::uniform(rng, 0.5, 2.0) * 1e-6;
    for (int n = 0; n < N; ++n) {
      ilp.weights(k, n) = oracles::uniform(rng, 1e7, 4e8);
      ilp.costs(k, n) = coef * ilp.weights(k, n);
    }
  }
  ilp.qos = VecX::Zero(K);
  if (tight_qos)
    for (int k = 0; k < K; ++k) {
      double best = 0.0;
      for (int n = 0; n < N; ++n) best = std::max(best, ilp.weights(k, n));
      ilp.qos[k] = oracles::uniform(rng, 0.2, 0.9) * best;
    }
  double greedy_cost = 0.0;
  for (int n = 0; n < N; ++n) {
    double c = 0.0;
    for (int k = 0; k < K; ++k) c = std::max(c, ilp.costs(k, n));
    greedy_cost += c;
  }
  ilp.energy_budget = tight_energy ? oracles::uniform(rng, 0.55, 0.85) * greedy_cost
                                   : 10.0 * greedy_cost;
  return ilp;
}

bool c1_bnb_exact(std::string& detail) {
  std::mt19937_64 rng(1001);
  const double t0 = now_s();
  int checked = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int K = 2 + static_cast<int>(rng() % 2);
    const int N = 4 + static_cast<int>(rng() % 3);
    auto ilp = random_ilp(rng, K, N, trial % 2 == 0, trial % 3 != 2);
    auto value = [&](const std::vector<int>& a) {
      return ilp.feasible(a) ? ilp.objective_of(a)
                             : -std::numeric_limits<double>::infinity();
    };
    const auto brute = oracles::brute_force_assignment(K, N, value);
    const auto res = solve_bnb(ilp);
    const bool brute_infeasible =
        brute.best == -std::numeric_limits<double>::infinity();
    if (brute_infeasible) {
      if (res.status != SolveStatus::Infeasible) {
        detail = fmt("instance %d: expected infeasible", trial);
        return false;
      }
    } else {
      if (res.status != SolveStatus::Optimal || res.objective != brute.best) {
        detail = fmt("instance %d: bnb %.17g vs brute %.17g", trial,
                     res.objective, brute.best);
        return false;
      }
    }
    ++checked;
  }
  const double el = now_s() - t0;
  detail = fmt("%d instances exact, %.2fs", checked, el);
  return el < 10.0;
}

bool c2_sandwich(std::string& detail) {
  std::mt19937_64 rng(1002);
  Scenario base = test_scenarios::paper_style(2, 1, 4);
  int checked = 0;
  for (int i = 0; i < 1000; ++i) {
    Scenario s = base;
    s.uav.altitude = oracles::uniform(rng, 30.0, 100.0);
    const Vec2 z(oracles::uniform(rng, -200, 200), oracles::uniform(rng, -200, 200));
    const double p = oracles::uniform(rng, 0.05, 3.0);
    auto in_disc = [&](double radius) {
      const double ang = oracles::uniform(rng, 0.0, 6.2831853071795865);
      const double r = radius * std::sqrt(oracles::uniform(rng, 0.0, 1.0));
      return Vec2(z + r * Vec2(std::cos(ang), std::sin(ang)));
    };
    const Vec2 qr = in_disc(600.0);
    const Vec2 q = in_disc(600.0);
    auto surr = make_surrogate(qr, z, p, s, 700.0);
    const double truth =
        rate(p, channel_gain(q, z, s.channel, s.uav), s.channel.noise_power);
    const double lo = lower_bound(q, z, surr);
    const double up = upper_bound(q, surr);
    const double tol = 1e-10 * (1.0 + std::abs(truth));
    if (lo > truth + tol || truth > up + tol) {
      detail = fmt("sample %d: lo=%.12g R=%.12g up=%.12g", i, lo, truth, up);
      return false;
    }
    const double at_ref =
        rate(p, channel_gain(qr, z, s.channel, s.uav), s.channel.noise_power);
    const double rtol = 1e-10 * (1.0 + std::abs(at_ref));
    if (std::abs(lower_bound(qr, z, surr) - at_ref) > rtol ||
        std::abs(upper_bound(qr, surr) - at_ref) > rtol) {
      detail = fmt("sample %d: not tight at the expansion point", i);
      return false;
    }
    // power linearization dominance on [P_min, 5]
    const double gain = channel_gain(qr, z, s.channel, s.uav);
    const double pr = oracles::uniform(rng, 0.1, 5.0);
    const double pp = oracles::uniform(rng, 0.1, 5.0);
    auto lin = linearize_rate_in_power(pr, gain, s.channel.noise_power);
    const double affine = lin.value + lin.slope * (pp - pr);
    const double rp = rate(pp, gain, s.channel.noise_power);
    if (affine < rp - 1e-10 * (1.0 + std::abs(rp))) {
      detail = fmt("sample %d: power linearization below the rate", i);
      return false;
    }
    const double rp_ref = rate(pr, gain, s.channel.noise_power);
    if (std::abs(lin.value - rp_ref) > 1e-10 * (1.0 + std::abs(rp_ref))) {
      detail = fmt("sample %d: power linearization not tight", i);
      return false;
    }
    ++checked;
  }
  detail = fmt("%d samples sandwiched", checked);
  return true;
}

bool c3_derivatives(std::string& detail) {
  std::mt19937_64 rng(1003);
  Scenario s = test_scenarios::paper_style(3, 1, 4);
  const Vec2 z = s.ues[0].position;
  for (int i = 0; i < 100; ++i) {
    const Vec2 q(oracles::uniform(rng, -400, 400), oracles::uniform(rng, -400, 400));
    const double p = oracles::uniform(rng, 0.05, 3.0);
    auto der = rate_gradient_hessian(q, z, p, s);
    auto rate_at = [&](const Vec2& qq) {
      return rate(p, channel_gain(qq, z, s.channel, s.uav), s.channel.noise_power);
    };
    const double h = 1e-4 * (1.0 + q.norm());
    const Vec2 fd = oracles::fd_gradient(rate_at, q, h);
    if ((der.grad - fd).norm() > 1e-6 * (1.0 + fd.norm())) {
      detail = fmt("gradient mismatch at sample %d", i);
      return false;
    }
    const auto fdH = oracles::fd_hessian(
        [&](const Vec2& qq) { return rate_gradient_hessian(qq, z, p, s).grad; }, q, h);
    if ((der.hess - fdH).norm() > 1e-5 * (1.0 + fdH.norm())) {
      detail = fmt("hessian mismatch at sample %d", i);
      return false;
    }
  }
  detail = "100 points within 1e-6 / 1e-5";
  return true;
}

bool c4_monotone_loop(std::string& detail) {
  const double t0 = now_s();
  Scenario s = test_scenarios::paper_style(7); // K=8, N=50, T=120s experiment constants
  RunConfig cfg;
  auto rep = run(s, cfg);
  const double el = now_s() - t0;
  if (rep.status != RunStatus::Converged) {
    detail = fmt("status %s after %d iterations", to_string(rep.status), rep.iterations);
    return false;
  }
  for (size_t i = 1; i < rep.records.size(); ++i)
    if (rep.records[i].s_bits < rep.records[i - 1].s_bits * (1.0 - 1e-6)) {
      detail = fmt("S decreased at iteration %zu", i + 1);
      return false;
    }
  if (rep.max_residual > 1e-6) {
    detail = fmt("audit residual %.3e", rep.max_residual);
    return false;
  }
  detail = fmt("converged in %d iterations, S=%.4e bits, %.1fs", rep.iterations,
               rep.s_bits, el);
  return el < 300.0;
}

bool c5_scheme_ordering(std::string& detail) {
  std::vector<double> gains;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Scenario s = test_scenarios::small(seed, 3, 10);
    RunConfig cfg;
    cfg.tol_rel = 1e-5;
    double sbits[3];
    for (int i = 0; i < 3; ++i) {
      cfg.scheme = static_cast<Scheme>(i);
      auto rep = run(s, cfg);
      if (rep.status == RunStatus::Infeasible) {
        detail = fmt("seed %llu infeasible", static_cast<unsigned long long>(seed));
        return false;
      }
      sbits[i] = rep.s_bits;
    }
    const double slack = 1e-9;
    if (sbits[0] < sbits[1] * (1.0 - slack) || sbits[1] < sbits[2] * (1.0 - slack)) {
      detail = fmt("seed %llu: proposed %.6e, scheme1 %.6e, scheme2 %.6e",
                   static_cast<unsigned long long>(seed), sbits[0], sbits[1], sbits[2]);
      return false;
    }
    gains.push_back(sbits[0] / sbits[2] - 1.0);
  }
  std::sort(gains.begin(), gains.end());
  const double median = 0.5 * (gains[4] + gains[5]);
  detail = fmt("ordering holds on 10 seeds; median gain over scheme2 = %.1f%%",
               100.0 * median);
  return median > 0.05;
}

bool c6_budget_sweep(std::string& detail) {
  Scenario base = test_scenarios::small(5, 3, 10);
  const std::vector<double> budgets = {4e4, 6e4, 8e4, 1.0e5, 1.3e5, 1.6e5, 2.0e5, 2.5e5};
  std::vector<double> sbits, slack;
  for (double e0 : budgets) {
    Scenario s = base;
    s.uav.battery = e0;
    RunConfig cfg;
    cfg.tol_rel = 1e-7;
    auto rep = run(s, cfg);
    if (rep.status == RunStatus::Infeasible) {
      detail = fmt("E0=%.3g infeasible", e0);
      return false;
    }
    sbits.push_back(rep.s_bits);
    slack.push_back(1.0 - rep.ledger.total() / e0);
  }
  for (size_t i = 1; i < sbits.size(); ++i)
    if (sbits[i] < sbits[i - 1] * (1.0 - 1e-6)) {
      detail = fmt("S decreased from E0=%.3g to %.3g (%.6e -> %.6e)", budgets[i - 1],
                   budgets[i], sbits[i - 1], sbits[i]);
      return false;
    }
  // find where the battery stops binding (the per-UE caps take over)
  size_t sat = sbits.size();
  for (size_t i = 0; i < sbits.size(); ++i)
    if (slack[i] >= 0.01) {
      sat = i;
      break;
    }
  if (sat + 1 >= sbits.size()) {
    detail = fmt("battery never saturates (max slack %.3f)",
                 *std::max_element(slack.begin(), slack.end()));
    return false;
  }
  for (size_t i = sat; i + 1 < sbits.size(); ++i)
    if (std::abs(sbits[i + 1] - sbits[i]) >= 1e-3 * sbits[i]) {
      detail = fmt("not flat after saturation at E0=%.3g", budgets[i]);
      return false;
    }
  detail = fmt("S rises then flattens from E0=%.3g (plateau %.4e bits)", budgets[sat],
               sbits.back());
  return true;
}

bool c7_cpu_freq(std::string& detail) {
  // computation-heavy UEs at a fixed battery: the per-bit compute energy
  // scales with f_C^2, so the affordable bits drop when f_C doubles
  Scenario base = test_scenarios::small(5, 3, 10);
  base.uav.battery = 8e4;
  for (auto& ue : base.ues) ue.cycles_per_bit *= 4.0;
  double s_bits[2];
  int i = 0;
  for (double f : {1e9, 2e9}) {
    Scenario s = base;
    s.uav.cpu_freq = f;
    RunConfig cfg;
    cfg.tol_rel = 1e-6;
    auto rep = run(s, cfg);
    if (rep.status == RunStatus::Infeasible) {
      detail = fmt("f_C=%.1e infeasible", f);
      return false;
    }
    s_bits[i++] = rep.s_bits;
  }
  detail = fmt("S(1GHz)=%.5e >= S(2GHz)=%.5e", s_bits[0], s_bits[1]);
  return s_bits[0] >= s_bits[1] * (1.0 - 1e-9);
}

bool c8_velocity_cap(std::string& detail) {
  double s_bits[2];
  int i = 0;
  for (double vmax : {10.0, 30.0}) {
    Scenario s = test_scenarios::paper_style(7);
    s.uav.v_max = vmax;
    RunConfig cfg;
    auto rep = run(s, cfg);
    if (rep.status == RunStatus::Infeasible) {
      detail = fmt("v_max=%g infeasible", vmax);
      return false;
    }
    const double dt = s.time.slot_len();
    for (int n = 0; n < s.N(); ++n) {
      const double speed = rep.trajectory.step_speed(n, s.time);
      (void)dt;
      if (speed > vmax + 1e-6) {
        detail = fmt("v_max=%g violated: step %d at %.9g m/s", vmax, n, speed);
        return false;
      }
    }
    s_bits[i++] = rep.s_bits;
  }
  detail = fmt("S(30)=%.5e >= S(10)=%.5e, all speeds capped", s_bits[1], s_bits[0]);
  return s_bits[1] >= s_bits[0] * (1.0 - 1e-9);
}

bool c9_solver_certification(std::string& detail) {
  std::mt19937_64 rng(1009);
  int problems = 0;
  auto certify = [&](const SolveOutcome& out) {
    return out.status == SolveStatus::Optimal && out.kkt.stationarity <= 1e-6 &&
           out.kkt.ineq <= 1e-6 && out.kkt.eq <= 1e-6;
  };

  // 14 random concave QPs against the active-set oracle
  for (int trial = 0; trial < 14; ++trial) {
    const int n = 5, m = 6;
    MatX B(n, n), G(m, n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) B(a, b) = oracles::uniform(rng, -1, 1);
    MatX P = B.transpose() * B + 0.3 * MatX::Identity(n, n);
    VecX q(n);
    for (int a = 0; a < n; ++a) q[a] = oracles::uniform(rng, -2, 2);
    for (int r = 0; r < m; ++r)
      for (int b = 0; b < n; ++b) G(r, b) = oracles::uniform(rng, -1, 1);
    VecX center(n);
    for (int a = 0; a < n; ++a) center[a] = oracles::uniform(rng, -0.5, 0.5);
    VecX h = G * center;
    for (int r = 0; r < m; ++r) h[r] += oracles::uniform(rng, 0.3, 1.5);

    SmoothProgram prog;
    prog.dim = n;
    prog.objective = [P, q](const VecX& x, VecX* g, MatX* hs) {
      if (g) *g = -(P * x) + q;
      if (hs) *hs = -P;
      return -0.5 * x.dot(P * x) + q.dot(x);
    };
    for (int r = 0; r < m; ++r) {
      std::vector<int> vars(n);
      for (int b = 0; b < n; ++b) vars[static_cast<size_t>(b)] = b;
      prog.ineqs.push_back(affine_ineq(vars, G.row(r).transpose(), -h[r]));
    }
    prog.x0 = center;
    auto out = solve(prog);
    auto oracle = oracles::active_set_qp(P, q, G, h);
    ++problems;
    if (!certify(out) || !oracle.found ||
        std::abs(out.objective - oracle.value) > 1e-6 * (1.0 + std::abs(oracle.value))) {
      detail = fmt("QP %d: status=%s stat=%.2e vs oracle gap %.2e", trial,
                   to_string(out.status), out.kkt.stationarity,
                   std::abs(out.objective - oracle.value));
      return false;
    }
  }

  // half-line projection, water filling, equality-constrained QP
  {
    SmoothProgram prog;
    prog.dim = 1;
    prog.objective = [](const VecX& x, VecX* g, MatX* h) {
      if (g) { g->resize(1); (*g)[0] = -2.0 * x[0]; }
      if (h) { h->resize(1, 1); (*h)(0, 0) = -2.0; }
      return -x[0] * x[0];
    };
    prog.ineqs.push_back(lower_bound_ineq(0, 1.0));
    prog.x0 = VecX::Constant(1, 3.0);
    auto out = solve(prog);
    ++problems;
    if (!certify(out) || std::abs(out.x[0] - 1.0) > 1e-6) {
      detail = "half-line projection failed";
      return false;
    }
  }
  {
    SmoothProgram prog;
    prog.dim = 3;
    prog.objective = [](const VecX& x, VecX* g, MatX* h) {
      double v = 0.0;
      if (g) g->resize(3);
      if (h) h->setZero(3, 3);
      for (int a = 0; a < 3; ++a) {
        v += std::log(1.0 + x[a]);
        if (g) (*g)[a] = 1.0 / (1.0 + x[a]);
        if (h) (*h)(a, a) = -1.0 / ((1.0 + x[a]) * (1.0 + x[a]));
      }
      return v;
    };
    prog.ineqs.push_back(affine_ineq({0, 1, 2}, VecX::Ones(3), -6.0));
    for (int a = 0; a < 3; ++a) prog.ineqs.push_back(lower_bound_ineq(a, 0.0));
    prog.x0 = VecX::Constant(3, 0.5);
    auto out = solve(prog);
    ++problems;
    if (!certify(out) || std::abs(out.x[0] - 2.0) > 1e-5) {
      detail = "water filling failed";
      return false;
    }
  }
  {
    SmoothProgram prog;
    prog.dim = 3;
    prog.objective = [](const VecX& x, VecX* g, MatX* h) {
      if (g) *g = -2.0 * x;
      if (h) *h = -2.0 * MatX::Identity(3, 3);
      return -x.squaredNorm();
    };
    prog.eq_A = MatX(2, 3);
    prog.eq_A << 1, 1, 1, 0, 1, -1;
    prog.eq_b = VecX(2);
    prog.eq_b << 3, 1;
    prog.x0 = VecX::Zero(3);
    auto out = solve(prog);
    MatX A = prog.eq_A;
    VecX xstar = A.transpose() * (A * A.transpose()).ldlt().solve(prog.eq_b);
    ++problems;
    if (!certify(out) || (out.x - xstar).lpNorm<Eigen::Infinity>() > 1e-6) {
      detail = "equality QP failed";
      return false;
    }
  }

  // three LPs with known optima
  {
    VecX c(2);
    c << 1, 1;
    MatX G(1, 2);
    G << 1, 1;
    VecX h(1);
    h << 1;
    auto out = solve_lp(c, G, h, MatX(0, 2), VecX(), VecX::Zero(2), VecX());
    ++problems;
    if (!certify(out) || std::abs(out.objective - 1.0) > 1e-8) {
      detail = "simplex-face LP failed";
      return false;
    }
  }
  for (int trial = 0; trial < 2; ++trial) {
    const int K = 3, N = 4;
    VecX costs(K * N);
    for (int a = 0; a < K * N; ++a) costs[a] = oracles::uniform(rng, 0.0, 10.0);
    MatX A = MatX::Zero(N, K * N);
    for (int n = 0; n < N; ++n)
      for (int k = 0; k < K; ++k) A(n, n * K + k) = 1.0;
    auto out = solve_lp(costs, MatX(0, K * N), VecX(), A, VecX::Ones(N),
                        VecX::Zero(K * N), VecX::Ones(K * N));
    double greedy = 0.0;
    for (int n = 0; n < N; ++n) {
      double best = 0.0;
      for (int k = 0; k < K; ++k) best = std::max(best, costs[n * K + k]);
      greedy += best;
    }
    ++problems;
    if (!certify(out) || std::abs(out.objective - greedy) > 1e-6 * (1.0 + greedy)) {
      detail = fmt("assignment LP %d failed", trial);
      return false;
    }
  }

  detail = fmt("%d problems certified (stationarity and feasibility <= 1e-6)", problems);
  return problems == 20;
}

bool c10_round_trip(std::string& detail) {
  const fs::path dir = "acceptance_io";
  fs::remove_all(dir);
  fs::create_directories(dir);
  Scenario scen = test_scenarios::small(10, 3, 10);
  save_scenario(scen, (dir / "scen.json").string());

  CliOptions opt;
  opt.scenario_path = (dir / "scen.json").string();
  for (const char* sub : {"a", "b"}) {
    opt.out_dir = (dir / sub).string();
    if (cmd_solve(opt) != 0) {
      detail = "solve failed";
      return false;
    }
  }
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  for (const char* f :
       {"trajectory.csv", "association.csv", "power.csv", "iterations.csv",
        "summary.json"}) {
    if (slurp(dir / "a" / f) != slurp(dir / "b" / f)) {
      detail = fmt("%s differs between runs", f);
      return false;
    }
  }
  // recompute the bits from the emitted files
  Scenario reloaded = load_scenario((dir / "scen.json").string());
  std::ifstream tin(dir / "a" / "trajectory.csv");
  Trajectory traj = read_trajectory_csv(tin);
  std::ifstream ain(dir / "a" / "association.csv");
  Association assoc = read_association_csv(ain, reloaded.K());
  std::ifstream pin(dir / "a" / "power.csv");
  PowerSchedule power = read_power_csv(pin, reloaded.K(), reloaded.N());
  auto j = nlohmann::json::parse(slurp(dir / "a" / "summary.json"));
  const double s_file = j["S_bits"].get<double>();
  const double s_re = bits_of(reloaded, traj, assoc, power).total;
  if (std::abs(s_file - s_re) > 1e-9 * s_file) {
    detail = fmt("summary %.17g vs recomputed %.17g", s_file, s_re);
    return false;
  }
  detail = fmt("byte-identical outputs; S reproduced to %.1e relative",
               std::abs(s_file - s_re) / s_file);
  return true;
}

} // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<bool(std::string&)> fn;
  };
  const std::vector<Criterion> criteria = {
      {1, "branch-and-bound exactness vs exhaustive enumeration", c1_bnb_exact},
      {2, "surrogate sandwich and power linearization dominance", c2_sandwich},
      {3, "analytic rate derivatives vs finite differences", c3_derivatives},
      {4, "monotone convergent outer loop on the reference instance", c4_monotone_loop},
      {5, "scheme ordering and median improvement", c5_scheme_ordering},
      {6, "battery-budget monotonicity and saturation", c6_budget_sweep},
      {7, "higher CPU frequency cannot increase sum bits", c7_cpu_freq},
      {8, "velocity-cap behavior", c8_velocity_cap},
      {9, "solver KKT certification on the regression suite", c9_solver_certification},
      {10, "round-trip determinism of emitted files", c10_round_trip},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    std::string detail;
    bool ok = false;
    const double t0 = now_s();
    try {
      ok = c.fn(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double el = now_s() - t0;
    std::printf("[%s] criterion %2d: %s — %s (%.1fs)\n", ok ? "PASS" : "FAIL", c.id,
                c.name, detail.c_str(), el);
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures;
}
