#ifndef UAVMEC_ORCHESTRATOR_HPP
#define UAVMEC_ORCHESTRATOR_HPP

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "uavmec/association.hpp"
#include "uavmec/model.hpp"
#include "uavmec/power.hpp"
#include "uavmec/trajectory.hpp"

// The alternating loop: association (exact), trajectory step, power step,
// repeated until the sum-bits sequence settles. Also the two baselines:
// Scheme I runs association + trajectory at fixed power, Scheme II runs
// association only at the initial trajectory and power.

namespace uavmec {

enum class Scheme { Proposed, SchemeI, SchemeII };

inline const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::Proposed: return "proposed";
    case Scheme::SchemeI: return "scheme1";
    case Scheme::SchemeII: return "scheme2";
  }
  return "?";
}

enum class RunStatus { Converged, MaxIterations, Infeasible, MonotoneBreach };

inline const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Converged: return "converged";
    case RunStatus::MaxIterations: return "max_iterations";
    case RunStatus::Infeasible: return "infeasible";
    case RunStatus::MonotoneBreach: return "monotone_breach";
  }
  return "?";
}

struct RunConfig {
  double tol_rel = 1e-4;  // epsilon = tol_rel * S_hat after iteration 1
  double tol_bits = 0.0;  // absolute epsilon in bits; overrides when > 0
  int max_iters = 100;
  Scheme scheme = Scheme::Proposed;
  std::uint64_t seed = 0;
  bool verbose = false;
  SolverOptions solver;
};

struct IterationRecord {
  int r = 0;
  double s_bits = 0.0;
  double ds_assoc = 0.0; // gain of the association block this round
  double ds_traj = 0.0;
  double ds_power = 0.0;
  EnergyLedger ledger;
  double max_residual = 0.0; // worst scaled audit residual
  double wall_s = 0.0;
};

struct SolveReport {
  RunStatus status = RunStatus::Infeasible;
  std::string reason;
  std::vector<IterationRecord> records;
  Trajectory trajectory;
  Association association;
  PowerSchedule power;
  double s_bits = 0.0;
  VecX s_per_ue;
  EnergyLedger ledger;
  double max_residual = 0.0;
  int iterations = 0;
  double wall_s = 0.0;
};

// ---------------------------------------------------------------------------
// Initialization: ring over the UE centroid blended into the two endpoints.

namespace detail_orch {

inline Trajectory straight_line(const Scenario& scen) {
  const int N = scen.N();
  Trajectory t;
  t.points.reserve(static_cast<size_t>(N + 1));
  for (int n = 0; n <= N; ++n) {
    const double a = static_cast<double>(n) / N;
    t.points.push_back((1.0 - a) * scen.uav.start_point + a * scen.uav.end_point);
  }
  return t;
}

inline bool speed_ok(const Trajectory& t, const Scenario& scen) {
  const double cap = scen.uav.v_max * scen.time.slot_len() * (1.0 + 1e-9);
  for (int n = 0; n < scen.N(); ++n)
    if ((t.points[static_cast<size_t>(n + 1)] - t.points[static_cast<size_t>(n)]).norm() > cap)
      return false;
  return true;
}

} // namespace detail_orch

// Initial state: a ring around the UE centroid, radius capped so a full lap
// fits the horizon, blended into q_0 over the first ceil(N/5) slots and into
// q_T over the last ceil(N/5); uniform 0.3 W uploading power (capped by the
// per-UE energy budget). Falls back to the straight endpoint chain when the
// blend cannot meet the velocity cap.
inline std::pair<Trajectory, PowerSchedule> init_state(const Scenario& scen) {
  const int N = scen.N();
  const double p0 =
      std::min(0.3, scen.budget.energy_cap / (scen.time.horizon));
  PowerSchedule power{MatX::Constant(scen.K(), N, std::max(p0, scen.budget.p_min))};

  Vec2 centroid(0.0, 0.0);
  for (const auto& ue : scen.ues) centroid += ue.position;
  centroid /= static_cast<double>(scen.K());
  double max_dist = 0.0;
  for (const auto& ue : scen.ues)
    max_dist = std::max(max_dist, (ue.position - centroid).norm());
  const double two_pi = 2.0 * std::numbers::pi_v<double>;
  const double rho = std::min(0.5 * max_dist,
                              scen.uav.v_max * scen.time.horizon / (two_pi + 0.5));

  if (N >= 2) {
    const Vec2 from_start = scen.uav.start_point - centroid;
    const double theta0 =
        from_start.norm() > 1e-12 ? std::atan2(from_start.y(), from_start.x()) : 0.0;
    // the declared radius first; shrink geometrically while the blend breaks
    // the velocity cap
    for (double r = rho; r > 1e-6 * (1.0 + rho); r *= 0.8) {
      Trajectory ring;
      ring.points.resize(static_cast<size_t>(N + 1));
      for (int n = 0; n <= N; ++n) {
        const double th = theta0 + two_pi * n / N;
        ring.points[static_cast<size_t>(n)] =
            centroid + r * Vec2(std::cos(th), std::sin(th));
      }
      const int m = (N + 4) / 5; // ceil(N/5)
      for (int n = 0; n <= std::min(m, N); ++n) {
        const double a = static_cast<double>(n) / m;
        ring.points[static_cast<size_t>(n)] =
            (1.0 - a) * scen.uav.start_point + a * ring.points[static_cast<size_t>(n)];
      }
      for (int n = std::max(0, N - m); n <= N; ++n) {
        const double a = static_cast<double>(n - (N - m)) / m;
        ring.points[static_cast<size_t>(n)] =
            (1.0 - a) * ring.points[static_cast<size_t>(n)] + a * scen.uav.end_point;
      }
      ring.points.front() = scen.uav.start_point;
      ring.points.back() = scen.uav.end_point;
      if (detail_orch::speed_ok(ring, scen)) return {ring, power};
    }
  }
  // no v_max-feasible ring blend at any radius: straight chain (feasible by
  // validation)
  return {detail_orch::straight_line(scen), power};
}

// ---------------------------------------------------------------------------
// Feasibility restoration: used when no assignment satisfies QoS + energy at
// the initial state. Alternates deficit-driven assignments with max-min-slack
// trajectory and power steps until an assignment passes, or fails after a
// fixed number of rounds.

struct RestoreResult {
  bool ok = false;
  Trajectory trajectory;
  PowerSchedule power;
  int rounds = 0;
  std::string reason;
};

namespace detail_orch {

// Slot-by-slot assignment favouring UEs that still miss their QoS floor.
inline Association deficit_greedy(const Scenario& scen, const AssociationIlp& ilp) {
  const int K = ilp.K, N = ilp.N;
  Association a;
  a.b = MatXi::Zero(K, N);
  VecX bits = VecX::Zero(K);
  for (int n = 0; n < N; ++n) {
    int pick = -1;
    double best_w = -1.0;
    for (int k = 0; k < K; ++k) {
      if (bits[k] >= scen.ues[k].min_bits) continue;
      if (ilp.weights(k, n) > best_w + 1e-15) {
        best_w = ilp.weights(k, n);
        pick = k;
      }
    }
    if (pick < 0) {
      for (int k = 0; k < K; ++k)
        if (ilp.weights(k, n) > (pick < 0 ? -1.0 : ilp.weights(pick, n))) pick = k;
    }
    a.b(pick, n) = 1;
    bits[pick] += ilp.weights(pick, n);
  }
  return a;
}

inline bool assignment_feasible(const Scenario& scen, const AssociationIlp& ilp,
                                const Association& a) {
  std::vector<int> assign(static_cast<size_t>(ilp.N));
  for (int n = 0; n < ilp.N; ++n) assign[static_cast<size_t>(n)] = a.served_ue(n);
  (void)scen;
  return !ilp.budget_exhausted() && ilp.feasible(assign);
}

} // namespace detail_orch

inline RestoreResult restore_feasibility(const Scenario& scen, const Trajectory& traj0,
                                         const PowerSchedule& power0,
                                         const SolverOptions& solver_opts = {},
                                         int max_rounds = 12) {
  RestoreResult res;
  res.trajectory = traj0;
  res.power = power0;

  // analytic per-UE ceiling: all N slots at the whole uploading budget in
  // each slot, zero horizontal distance
  const double dt = scen.time.slot_len();
  const double p_cap = scen.budget.energy_cap / dt;
  const double gain_cap = scen.channel.ref_gain /
                          (scen.uav.altitude * scen.uav.altitude);
  const double s_cap = scen.N() * dt * scen.channel.bandwidth *
                       rate(p_cap, gain_cap, scen.channel.noise_power);
  for (int k = 0; k < scen.K(); ++k) {
    if (scen.ues[k].min_bits > s_cap) {
      res.reason = "QoS floor of UE " + std::to_string(k + 1) +
                   " exceeds the analytic bits ceiling";
      return res;
    }
  }

  for (res.rounds = 1; res.rounds <= max_rounds; ++res.rounds) {
    AssociationIlp ilp = build_ilp(scen, res.trajectory, res.power);
    Association a = detail_orch::deficit_greedy(scen, ilp);
    if (detail_orch::assignment_feasible(scen, ilp, a) &&
        audit(scen, res.trajectory, a, res.power).feasible()) {
      res.ok = true;
      return res;
    }
    auto tstep = solve_p2prime(scen, a, res.power, res.trajectory, solver_opts,
                               /*max_min_slack=*/true);
    if (tstep.moved) res.trajectory = tstep.trajectory;

    ilp = build_ilp(scen, res.trajectory, res.power);
    a = detail_orch::deficit_greedy(scen, ilp);
    if (detail_orch::assignment_feasible(scen, ilp, a) &&
        audit(scen, res.trajectory, a, res.power).feasible()) {
      res.ok = true;
      return res;
    }
    auto pstep = solve_p3prime(scen, a, res.trajectory, res.power, solver_opts,
                               /*max_min_slack=*/true);
    if (pstep.moved) res.power = pstep.power;

    ilp = build_ilp(scen, res.trajectory, res.power);
    a = detail_orch::deficit_greedy(scen, ilp);
    if (detail_orch::assignment_feasible(scen, ilp, a) &&
        audit(scen, res.trajectory, a, res.power).feasible()) {
      res.ok = true;
      return res;
    }
  }
  res.reason = "restoration rounds exhausted";
  return res;
}

// ---------------------------------------------------------------------------

inline SolveReport run(const Scenario& scen, const RunConfig& cfg = {}) {
  using clock = std::chrono::steady_clock;
  const auto run_start = clock::now();
  auto seconds_since = [](clock::time_point t0) {
    return std::chrono::duration<double>(clock::now() - t0).count();
  };

  scen.validate();
  SolveReport report;
  auto [traj, power] = init_state(scen);
  Association assoc;

  double s_prev = 0.0;
  double eps = cfg.tol_bits;
  bool restored = false;
  std::vector<int> prev_assign; // warm incumbent: feasible across block steps

  for (int r = 1; r <= cfg.max_iters; ++r) {
    const auto iter_start = clock::now();

    // association block (always); the node budget keeps adversarially
    // symmetric instances time-bounded, and a MaxIter incumbent is still a
    // feasible monotone step thanks to the warm seed
    AssociationIlp ilp = build_ilp(scen, traj, power);
    BnbResult bnb = solve_bnb(ilp, [&] {
      BnbOptions b;
      b.lp.tol_gap = std::max(cfg.solver.tol_gap * 10.0, 1e-8);
      b.seed_assignment = prev_assign;
      b.max_nodes = 10000;
      return b;
    }());
    if (bnb.status != SolveStatus::Optimal && bnb.status != SolveStatus::MaxIter) {
      if (r == 1 && !restored) {
        RestoreResult rest = restore_feasibility(scen, traj, power, cfg.solver);
        restored = true;
        if (!rest.ok) {
          report.status = RunStatus::Infeasible;
          report.reason = "QoS infeasible: " + rest.reason;
          report.trajectory = traj;
          report.power = power;
          report.wall_s = seconds_since(run_start);
          return report;
        }
        traj = rest.trajectory;
        power = rest.power;
        ilp = build_ilp(scen, traj, power);
        bnb = solve_bnb(ilp, [&] {
          BnbOptions b;
          b.max_nodes = 10000;
          return b;
        }());
      }
      if (bnb.status != SolveStatus::Optimal && bnb.status != SolveStatus::MaxIter) {
        report.status = RunStatus::Infeasible;
        report.reason = bnb.reason.empty() ? "association subproblem infeasible"
                                           : bnb.reason;
        report.trajectory = traj;
        report.power = power;
        report.wall_s = seconds_since(run_start);
        return report;
      }
    }
    assoc = bnb.assoc;
    prev_assign = bnb.assign;
    const double s_assoc = bits_of(scen, traj, assoc, power).total;

    // trajectory block (Proposed, Scheme I)
    double s_traj = s_assoc;
    if (cfg.scheme != Scheme::SchemeII) {
      auto step = solve_p2prime(scen, assoc, power, traj, cfg.solver);
      traj = step.trajectory;
      s_traj = bits_of(scen, traj, assoc, power).total;
    }

    // power block (Proposed only)
    double s_power = s_traj;
    if (cfg.scheme == Scheme::Proposed) {
      auto step = solve_p3prime(scen, assoc, traj, power, cfg.solver);
      power = step.power;
      s_power = bits_of(scen, traj, assoc, power).total;
    }

    const double s_now = s_power;
    IterationRecord rec;
    rec.r = r;
    rec.s_bits = s_now;
    rec.ds_assoc = s_assoc - s_prev;
    rec.ds_traj = s_traj - s_assoc;
    rec.ds_power = s_power - s_traj;
    rec.ledger = energy_ledger(scen, traj, assoc, power);
    rec.max_residual = audit(scen, traj, assoc, power).worst_scaled();
    rec.wall_s = seconds_since(iter_start);
    report.records.push_back(rec);
    if (cfg.verbose) {
      std::fprintf(stderr,
                   "iter %3d  S=%.6e bits  dS=(%+.3e, %+.3e, %+.3e)  EF=%.4e  "
                   "EC=%.4e  resid=%.2e  %.2fs\n",
                   r, s_now, rec.ds_assoc, rec.ds_traj, rec.ds_power,
                   rec.ledger.flight, rec.ledger.compute, rec.max_residual,
                   rec.wall_s);
    }

    if (eps <= 0.0) eps = cfg.tol_rel * s_now; // set after the first round
    if (r >= 2 && s_now < s_prev * (1.0 - 1e-6)) {
      report.status = RunStatus::MonotoneBreach;
      report.reason = "sum bits decreased beyond tolerance at iteration " +
                      std::to_string(r);
      break;
    }
    if (std::abs(s_now - s_prev) <= eps) {
      report.status = RunStatus::Converged;
      break;
    }
    s_prev = s_now;
    if (r == cfg.max_iters) report.status = RunStatus::MaxIterations;
  }

  report.trajectory = traj;
  report.association = assoc;
  report.power = power;
  const BitsResult bits = bits_of(scen, traj, assoc, power);
  report.s_bits = bits.total;
  report.s_per_ue = bits.per_ue;
  report.ledger = energy_ledger(scen, traj, assoc, power);
  report.max_residual = audit(scen, traj, assoc, power).worst_scaled();
  report.iterations = static_cast<int>(report.records.size());
  report.wall_s = seconds_since(run_start);
  return report;
}

} // namespace uavmec

#endif // UAVMEC_ORCHESTRATOR_HPP
