#ifndef UAVMEC_POWER_HPP
#define UAVMEC_POWER_HPP

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "uavmec/model.hpp"
#include "uavmec/solver.hpp"

// Uploading-power step at fixed association and trajectory. The objective
// and the QoS rows use the true concave rate; the compute-energy row uses
// the first-order Taylor expansion of the rate in p at the current iterate,
// which upper-bounds the concave rate and makes the row affine.
//
// Slots where a UE is not served keep p = P_min exactly: the objective is
// flat there and the floor is the deterministic choice.

namespace uavmec {

struct PowerLinearization {
  double value = 0.0; // R(p_r)
  double slope = 0.0; // dR/dp at p_r, always > 0 for positive gain
};

// R(p) <= value + slope*(p - p_r) for all p >= 0, equality at p_r.
inline PowerLinearization linearize_rate_in_power(double p_r, double gain,
                                                  double noise_power) {
  PowerLinearization lin;
  if (gain <= 0.0) return lin;
  lin.value = std::log2(1.0 + p_r * gain / noise_power);
  lin.slope = gain / (std::numbers::ln2_v<double> * (noise_power + p_r * gain));
  return lin;
}

struct PowerStep {
  PowerSchedule power;
  SolveOutcome outcome;
  bool moved = false;
  bool kept_expansion_point = false;
  std::string note;
};

// With max_min_slack set, the QoS rows turn into slack rows and the
// objective becomes the worst normalized QoS slack (restoration mode).
inline PowerStep solve_p3prime(const Scenario& scen, const Association& assoc,
                               const Trajectory& traj, const PowerSchedule& p_r,
                               const SolverOptions& solver_opts = {},
                               bool max_min_slack = false) {
  const int K = scen.K(), N = scen.N();
  const double dt = scen.time.slot_len();
  const double bits_scale = dt * scen.channel.bandwidth;
  const double p_min = scen.budget.p_min;
  const double e_u = scen.budget.energy_cap;
  const double e0 = scen.uav.battery;
  const double f2 = scen.uav.cpu_freq * scen.uav.cpu_freq;

  PowerStep step;
  // unserved slots rest at the floor in every outcome
  step.power.p = MatX::Constant(K, N, p_min);

  std::vector<int> slot_ue(static_cast<size_t>(N));
  std::vector<double> snr(static_cast<size_t>(N)); // gain/sigma^2 per served slot
  std::vector<double> coef(static_cast<size_t>(N)); // joules per rate unit
  std::vector<PowerLinearization> lin(static_cast<size_t>(N));
  std::vector<int> count_per_ue(static_cast<size_t>(K), 0);
  for (int n = 0; n < N; ++n) {
    const int k = assoc.served_ue(n);
    if (k < 0) throw std::invalid_argument("solve_p3prime: invalid association column");
    slot_ue[static_cast<size_t>(n)] = k;
    const double gain = channel_gain(traj.serving_position(n), scen.ues[k].position,
                                     scen.channel, scen.uav);
    snr[static_cast<size_t>(n)] = gain / scen.channel.noise_power;
    coef[static_cast<size_t>(n)] =
        scen.uav.switch_cap * scen.ues[k].cycles_per_bit * f2 * bits_scale;
    lin[static_cast<size_t>(n)] =
        linearize_rate_in_power(p_r.p(k, n), gain, scen.channel.noise_power);
    ++count_per_ue[static_cast<size_t>(k)];
  }
  const double flight = flight_energy(traj, scen).total;

  SmoothProgram prog;
  const int slack_var = N;
  prog.dim = N + (max_min_slack ? 1 : 0);
  prog.x0 = VecX(prog.dim);
  for (int n = 0; n < N; ++n)
    prog.x0[n] = std::max(p_r.p(slot_ue[static_cast<size_t>(n)], n), p_min);
  if (max_min_slack) {
    const VecX s_now = bits_of(scen, traj, assoc, p_r).per_ue;
    double worst = std::numeric_limits<double>::infinity();
    for (int k = 0; k < K; ++k)
      worst = std::min(worst, (s_now[k] - scen.ues[k].min_bits) / bits_scale);
    prog.x0[slack_var] = worst - 1.0;
  }

  if (max_min_slack) {
    prog.objective = [slack_var](const VecX& x, VecX* g, MatX* h) {
      if (g) { g->setZero(x.size()); (*g)[slack_var] = 1.0; }
      if (h) h->setZero(x.size(), x.size());
      return x[slack_var];
    };
  } else {
    prog.objective = [&snr, N](const VecX& x, VecX* g, MatX* h) {
      double val = 0.0;
      if (g) g->setZero(x.size());
      if (h) h->setZero(x.size(), x.size());
      for (int i = 0; i < N; ++i) {
        const double s = snr[static_cast<size_t>(i)];
        const double one = 1.0 + s * x[i];
        val += std::log2(one);
        if (g) (*g)[i] = s / (std::numbers::ln2_v<double> * one);
        if (h) (*h)(i, i) = -s * s / (std::numbers::ln2_v<double> * one * one);
      }
      return val;
    };
  }

  for (int i = 0; i < N; ++i)
    prog.ineqs.push_back(lower_bound_ineq(i, p_min, std::max(p_min, 1e-9)));

  // per-UE uploading-energy budgets over that UE's served slots
  for (int k = 0; k < K; ++k) {
    if (count_per_ue[static_cast<size_t>(k)] == 0) continue;
    ConstraintFn c;
    for (int n = 0; n < N; ++n)
      if (slot_ue[static_cast<size_t>(n)] == k) c.vars.push_back(n);
    const double pinned = (N - count_per_ue[static_cast<size_t>(k)]) * p_min;
    c.eval = [dt, pinned, e_u](const VecX& xs, VecX* g, MatX* h) {
      if (g) g->setConstant(xs.size(), dt / e_u);
      if (h) h->setZero(xs.size(), xs.size());
      return (dt * (xs.sum() + pinned) - e_u) / e_u;
    };
    prog.ineqs.push_back(std::move(c));
  }

  // QoS rows with the true concave bits; in slack mode every UE gets a row
  // coupling the slack variable
  for (int k = 0; k < K; ++k) {
    const double need = scen.ues[k].min_bits / bits_scale;
    if (count_per_ue[static_cast<size_t>(k)] == 0 && !max_min_slack) {
      if (need > 0.0) {
        step.outcome.status = SolveStatus::Infeasible;
        step.kept_expansion_point = true;
        step.note = "QoS row unsatisfiable: UE " + std::to_string(k + 1) +
                    " has no served slots";
        step.power = p_r;
        return step;
      }
      continue;
    }
    ConstraintFn c;
    std::vector<double> snr_local;
    for (int n = 0; n < N; ++n)
      if (slot_ue[static_cast<size_t>(n)] == k) {
        c.vars.push_back(n);
        snr_local.push_back(snr[static_cast<size_t>(n)]);
      }
    if (max_min_slack) c.vars.push_back(slack_var);
    const bool with_slack = max_min_slack;
    c.eval = [need, snr_local, with_slack](const VecX& xs, VecX* g, MatX* h) {
      double val = need;
      if (g) g->setZero(xs.size());
      if (h) h->setZero(xs.size(), xs.size());
      const int nserved = static_cast<int>(snr_local.size());
      for (int i = 0; i < nserved; ++i) {
        const double s = snr_local[static_cast<size_t>(i)];
        const double one = 1.0 + s * xs[i];
        val -= std::log2(one);
        if (g) (*g)[i] = -s / (std::numbers::ln2_v<double> * one);
        if (h) (*h)(i, i) = s * s / (std::numbers::ln2_v<double> * one * one);
      }
      if (with_slack) {
        const int tv = static_cast<int>(xs.size()) - 1;
        val += xs[tv];
        if (g) (*g)[tv] += 1.0;
      }
      return val;
    };
    prog.ineqs.push_back(std::move(c));
  }

  // affine compute-energy row from the rate linearization
  {
    ConstraintFn c;
    c.vars.resize(static_cast<size_t>(N));
    for (int i = 0; i < N; ++i) c.vars[static_cast<size_t>(i)] = i;
    double base = flight - e0;
    VecX slope_vec(N);
    for (int i = 0; i < N; ++i) {
      const double p_ref = p_r.p(slot_ue[static_cast<size_t>(i)], i);
      base += coef[static_cast<size_t>(i)] *
              (lin[static_cast<size_t>(i)].value -
               lin[static_cast<size_t>(i)].slope * p_ref);
      slope_vec[i] = coef[static_cast<size_t>(i)] * lin[static_cast<size_t>(i)].slope;
    }
    c.eval = [base, slope_vec, e0](const VecX& xs, VecX* g, MatX* h) {
      if (g) *g = slope_vec / e0;
      if (h) h->setZero(xs.size(), xs.size());
      return (base + slope_vec.dot(xs)) / e0;
    };
    prog.ineqs.push_back(std::move(c));
  }

  const double s_before = bits_of(scen, traj, assoc, p_r).total;
  SolveOutcome out = solve(prog, solver_opts);
  step.outcome = out;
  if (out.status != SolveStatus::Optimal) {
    if (max_min_slack && out.status == SolveStatus::Infeasible &&
        out.x.size() == prog.dim) {
      // restoration mode: adopt the least-violation point (floors enforced)
      PowerSchedule pn;
      pn.p = MatX::Constant(K, N, p_min);
      for (int n = 0; n < N; ++n)
        pn.p(slot_ue[static_cast<size_t>(n)], n) = std::max(out.x[n], p_min);
      step.power = std::move(pn);
      step.moved = true;
      step.note = "adopted least-violation point";
      return step;
    }
    step.kept_expansion_point = true;
    step.power = p_r;
    for (int n = 0; n < N; ++n)
      for (int k = 0; k < K; ++k)
        if (assoc.b(k, n) == 0) step.power.p(k, n) = p_min;
    if (out.status == SolveStatus::Infeasible) {
      const bool pr_ok = audit(scen, traj, assoc, p_r).feasible();
      step.note = pr_ok ? "surrogate has no strict interior; kept p_r"
                        : "expansion point infeasible (precondition breach)";
    }
    return step;
  }

  PowerSchedule pn;
  pn.p = MatX::Constant(K, N, p_min);
  for (int n = 0; n < N; ++n) pn.p(slot_ue[static_cast<size_t>(n)], n) = out.x[n];
  if (!max_min_slack) {
    const double s_after = bits_of(scen, traj, assoc, pn).total;
    if (s_after < s_before - 1e-9 * (1.0 + s_before)) {
      step.kept_expansion_point = true;
      step.note = "monotone safeguard kept p_r";
      step.power = p_r;
      for (int n = 0; n < N; ++n)
        for (int k = 0; k < K; ++k)
          if (assoc.b(k, n) == 0) step.power.p(k, n) = p_min;
      return step;
    }
  }
  step.power = std::move(pn);
  step.moved = true;
  return step;
}

} // namespace uavmec

#endif // UAVMEC_POWER_HPP
