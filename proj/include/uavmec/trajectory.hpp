#ifndef UAVMEC_TRAJECTORY_HPP
#define UAVMEC_TRAJECTORY_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "uavmec/association.hpp"
#include "uavmec/model.hpp"
#include "uavmec/solver.hpp"

// One successive-convex-approximation step over the trajectory at fixed
// association and power. The rate is convex in the squared horizontal
// distance u = ||q - z||^2, so its first-order Taylor expansion in u is a
// global lower bound (used for the objective and the QoS rows), while the
// descent-lemma quadratic with a Lipschitz constant of the rate gradient is
// a global upper bound (used for the compute-energy row).
//
// Writing c0 = H^2 and a = p*rho0/sigma^2:
//   R(u)  = log2(1 + a/(c0+u))
//   A(u)  = dR/du = -a / (ln2 (c0+u)(c0+u+a))
//   A'(u) = (1/ln2) (1/(c0+u)^2 - 1/(c0+u+a)^2)
//   grad R = 2 A(u) (q - z)
//   hess R = 2 A(u) I + 4 A'(u) (q - z)(q - z)^T,
// with Hessian eigenvalues 2A(u) and 2A(u) + 4u A'(u).

namespace uavmec {

struct TaylorCoeffs {
  double A = 0.0; // slope in u, always <= 0
  double W = 0.0; // rate at the expansion point
};

namespace detail_traj {

inline double snr_numerator(double p_watts, const Scenario& scen) {
  return p_watts * scen.channel.ref_gain / scen.channel.noise_power;
}

inline double rate_of_u(double u, double a, double c0) {
  return std::log2(1.0 + a / (c0 + u));
}

inline double slope_of_u(double u, double a, double c0) {
  return -a / (std::numbers::ln2_v<double> * (c0 + u) * (c0 + u + a));
}

inline double slope_deriv_of_u(double u, double a, double c0) {
  const double d1 = c0 + u, d2 = c0 + u + a;
  return (1.0 / (d1 * d1) - 1.0 / (d2 * d2)) / std::numbers::ln2_v<double>;
}

} // namespace detail_traj

// Coefficients of the Taylor expansion of R in u at the expansion point q_r:
// R(q) >= A * (||q-z||^2 - ||q_r-z||^2) + W for every q.
inline TaylorCoeffs taylor_lower(const Vec2& q_r, const Vec2& z, double p_watts,
                                 const Scenario& scen) {
  const double a = detail_traj::snr_numerator(p_watts, scen);
  const double c0 = scen.uav.altitude * scen.uav.altitude;
  const double u_r = (q_r - z).squaredNorm();
  TaylorCoeffs tc;
  if (a == 0.0) return tc; // zero power: R identically 0
  tc.W = detail_traj::rate_of_u(u_r, a, c0);
  tc.A = detail_traj::slope_of_u(u_r, a, c0);
  return tc;
}

struct RateDerivatives {
  Vec2 grad;
  Eigen::Matrix2d hess;
};

// Analytic gradient and Hessian of R with respect to the UAV position.
inline RateDerivatives rate_gradient_hessian(const Vec2& q, const Vec2& z,
                                             double p_watts, const Scenario& scen) {
  const double a = detail_traj::snr_numerator(p_watts, scen);
  const double c0 = scen.uav.altitude * scen.uav.altitude;
  const Vec2 d = q - z;
  const double u = d.squaredNorm();
  RateDerivatives out;
  if (a == 0.0) {
    out.grad.setZero();
    out.hess.setZero();
    return out;
  }
  const double A = detail_traj::slope_of_u(u, a, c0);
  const double Ap = detail_traj::slope_deriv_of_u(u, a, c0);
  out.grad = 2.0 * A * d;
  out.hess = 2.0 * A * Eigen::Matrix2d::Identity() + 4.0 * Ap * d * d.transpose();
  return out;
}

// Upper bound on the rate-gradient Lipschitz constant over every position
// within arena_radius of the UE: dense 1-D grid over u plus local refinement
// of the two eigenvalue magnitudes, then a 1.1 safety factor.
inline double lipschitz_constant(const Vec2& z, double p_watts, const Scenario& scen,
                                 double arena_radius) {
  (void)z;
  const double a = detail_traj::snr_numerator(p_watts, scen);
  if (a == 0.0) return 0.0;
  const double c0 = scen.uav.altitude * scen.uav.altitude;
  const double u_hi = arena_radius * arena_radius;
  auto spectral = [&](double u) {
    const double A = detail_traj::slope_of_u(u, a, c0);
    const double Ap = detail_traj::slope_deriv_of_u(u, a, c0);
    return std::max(std::abs(2.0 * A), std::abs(2.0 * A + 4.0 * u * Ap));
  };
  const int grid = 10000;
  double best = 0.0;
  int best_i = 0;
  for (int i = 0; i <= grid; ++i) {
    const double u = u_hi * i / grid;
    const double v = spectral(u);
    if (v > best) {
      best = v;
      best_i = i;
    }
  }
  // refine around the best cell
  const double lo = u_hi * std::max(0, best_i - 1) / grid;
  const double hi = u_hi * std::min(grid, best_i + 1) / grid;
  for (int i = 0; i <= 200; ++i) {
    const double u = lo + (hi - lo) * i / 200.0;
    best = std::max(best, spectral(u));
  }
  return 1.1 * best;
}

// Per-(k, n) convexification data at the expansion trajectory.
struct RateSurrogate {
  Vec2 q_ref;
  double u_ref = 0.0;
  TaylorCoeffs taylor; // lower bound coefficients
  Vec2 grad;           // rate gradient at q_ref
  double lipschitz = 0.0;
};

inline RateSurrogate make_surrogate(const Vec2& q_r, const Vec2& z, double p_watts,
                                    const Scenario& scen, double arena_radius) {
  RateSurrogate s;
  s.q_ref = q_r;
  s.u_ref = (q_r - z).squaredNorm();
  s.taylor = taylor_lower(q_r, z, p_watts, scen);
  s.grad = rate_gradient_hessian(q_r, z, p_watts, scen).grad;
  s.lipschitz = lipschitz_constant(z, p_watts, scen, arena_radius);
  return s;
}

inline double lower_bound(const Vec2& q, const Vec2& z, const RateSurrogate& s) {
  return s.taylor.A * ((q - z).squaredNorm() - s.u_ref) + s.taylor.W;
}

// Descent-lemma majorizer; valid wherever the Lipschitz constant covers the
// Hessian, i.e. inside the arena the surrogate was built for.
inline double upper_bound(const Vec2& q, const RateSurrogate& s) {
  const Vec2 d = q - s.q_ref;
  return s.taylor.W + s.grad.dot(d) + 0.5 * s.lipschitz * d.squaredNorm();
}

// Disc certain to contain every reachable UAV position: covers the start,
// the end and all UEs, inflated by v_max*T/2.
struct Arena {
  Vec2 center;
  double radius = 0.0;
  double radius_from(const Vec2& z) const { return (z - center).norm() + radius; }
};

inline Arena arena_of(const Scenario& scen) {
  Arena a;
  Vec2 c = scen.uav.start_point + scen.uav.end_point;
  for (const auto& ue : scen.ues) c += ue.position;
  a.center = c / static_cast<double>(scen.K() + 2);
  double r = std::max((scen.uav.start_point - a.center).norm(),
                      (scen.uav.end_point - a.center).norm());
  for (const auto& ue : scen.ues) r = std::max(r, (ue.position - a.center).norm());
  a.radius = r + 0.5 * scen.uav.v_max * scen.time.horizon;
  return a;
}

struct TrajectoryStep {
  Trajectory trajectory;
  SolveOutcome outcome;
  bool moved = false;
  bool kept_expansion_point = false;
  std::string note;
};

// Solve the convexified trajectory problem at fixed (association, power),
// expanding around q_r. The returned trajectory is feasible for the true
// constraints whenever q_r was; when the conservative majorizer leaves no
// strict interior the step returns q_r unchanged, which is a valid
// (zero-progress) SCA step.
//
// With max_min_slack set, the QoS rows turn into slack rows and the
// objective becomes the worst normalized QoS slack min_k (S_k^low - D_k);
// used by the feasibility-restoration phase.
inline TrajectoryStep solve_p2prime(const Scenario& scen, const Association& assoc,
                                    const PowerSchedule& power, const Trajectory& q_r,
                                    const SolverOptions& solver_opts = {},
                                    bool max_min_slack = false) {
  TrajectoryStep step;
  step.trajectory = q_r;
  const int N = scen.N();
  const int n_free = N - 1;
  if (n_free <= 0) { // both waypoints pinned; nothing to decide
    step.outcome.status = SolveStatus::Optimal;
    step.kept_expansion_point = true;
    step.note = "no free waypoints";
    return step;
  }

  const double dt = scen.time.slot_len();
  const double bits_scale = dt * scen.channel.bandwidth;
  const double cap2 = (scen.uav.v_max * dt) * (scen.uav.v_max * dt);
  const double e0 = scen.uav.battery;
  const double f2 = scen.uav.cpu_freq * scen.uav.cpu_freq;
  const Arena arena = arena_of(scen);

  // free waypoint j in 1..N-1 <-> vars (2(j-1), 2(j-1)+1)
  auto var_of = [](int waypoint) { return 2 * (waypoint - 1); };
  auto point_at = [&](const VecX& x, int waypoint) -> Vec2 {
    if (waypoint == 0) return scen.uav.start_point;
    if (waypoint == N) return scen.uav.end_point;
    return Vec2(x[var_of(waypoint)], x[var_of(waypoint) + 1]);
  };

  struct ServedTerm {
    int k = 0;
    int waypoint = 0; // N means pinned landing point
    RateSurrogate surr;
    double coef_energy = 0.0; // gamma_C C_k f_C^2 * delta_t B, joules per rate unit
  };
  std::vector<ServedTerm> terms;
  double const_rate = 0.0;    // objective contribution of pinned waypoints
  double const_energy = 0.0;  // same for the energy row
  VecX const_rate_by_ue = VecX::Zero(scen.K());
  for (int n0 = 0; n0 < N; ++n0) {
    const int k = assoc.served_ue(n0);
    if (k < 0) throw std::invalid_argument("solve_p2prime: invalid association column");
    ServedTerm t;
    t.k = k;
    t.waypoint = n0 + 1;
    t.surr = make_surrogate(q_r.points[static_cast<size_t>(n0 + 1)], scen.ues[k].position,
                            power.p(k, n0), scen,
                            arena.radius_from(scen.ues[k].position));
    t.coef_energy = scen.uav.switch_cap * scen.ues[k].cycles_per_bit * f2 * bits_scale;
    if (t.waypoint == N) {
      const_rate += t.surr.taylor.W;
      const_rate_by_ue[k] += t.surr.taylor.W;
      const_energy += t.coef_energy * t.surr.taylor.W;
    } else {
      terms.push_back(std::move(t));
    }
  }

  SmoothProgram prog;
  const int slack_var = 2 * n_free; // used only in max_min_slack mode
  prog.dim = 2 * n_free + (max_min_slack ? 1 : 0);
  prog.x0 = VecX(prog.dim);
  for (int j = 1; j < N; ++j) {
    prog.x0[var_of(j)] = q_r.points[static_cast<size_t>(j)].x();
    prog.x0[var_of(j) + 1] = q_r.points[static_cast<size_t>(j)].y();
  }
  if (max_min_slack) {
    const VecX s_now = bits_of(scen, q_r, assoc, power).per_ue;
    double worst = std::numeric_limits<double>::infinity();
    for (int k = 0; k < scen.K(); ++k)
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
    // objective: sum of rate lower bounds over served free waypoints
    prog.objective = [&scen, &terms, var_of, const_rate](const VecX& x, VecX* g, MatX* h) {
      double val = const_rate;
      if (g) g->setZero(x.size());
      if (h) h->setZero(x.size(), x.size());
      for (const auto& t : terms) {
        const int v = var_of(t.waypoint);
        const Vec2 q(x[v], x[v + 1]);
        const Vec2 d = q - scen.ues[t.k].position;
        val += t.surr.taylor.A * (d.squaredNorm() - t.surr.u_ref) + t.surr.taylor.W;
        if (g) {
          (*g)[v] += 2.0 * t.surr.taylor.A * d.x();
          (*g)[v + 1] += 2.0 * t.surr.taylor.A * d.y();
        }
        if (h) {
          (*h)(v, v) += 2.0 * t.surr.taylor.A;
          (*h)(v + 1, v + 1) += 2.0 * t.surr.taylor.A;
        }
      }
      return val;
    };
  }

  // QoS rows: D_k/bits_scale - sum_served R_low <= 0, or with the slack
  // variable t - (sum_served R_low - D_k/bits_scale) <= 0
  for (int k = 0; k < scen.K(); ++k) {
    std::vector<const ServedTerm*> mine;
    for (const auto& t : terms)
      if (t.k == k) mine.push_back(&t);
    const double need = scen.ues[k].min_bits / bits_scale - const_rate_by_ue[k];
    if (mine.empty() && !max_min_slack) {
      if (need > 0.0) {
        step.outcome.status = SolveStatus::Infeasible;
        step.note = "QoS row unsatisfiable: UE " + std::to_string(k + 1) +
                    " has no served slots";
        step.kept_expansion_point = true;
        return step;
      }
      continue;
    }
    ConstraintFn c;
    for (const auto* t : mine) {
      c.vars.push_back(var_of(t->waypoint));
      c.vars.push_back(var_of(t->waypoint) + 1);
    }
    if (max_min_slack) c.vars.push_back(slack_var);
    const bool with_slack = max_min_slack;
    c.eval = [mine, need, &scen, with_slack](const VecX& xs, VecX* g, MatX* h) {
      double val = need;
      if (g) g->setZero(xs.size());
      if (h) h->setZero(xs.size(), xs.size());
      for (size_t i = 0; i < mine.size(); ++i) {
        const int v = static_cast<int>(2 * i);
        const Vec2 q(xs[v], xs[v + 1]);
        const Vec2 d = q - scen.ues[mine[i]->k].position;
        const auto& tc = mine[i]->surr.taylor;
        val -= tc.A * (d.squaredNorm() - mine[i]->surr.u_ref) + tc.W;
        if (g) {
          (*g)[v] -= 2.0 * tc.A * d.x();
          (*g)[v + 1] -= 2.0 * tc.A * d.y();
        }
        if (h) {
          (*h)(v, v) -= 2.0 * tc.A;
          (*h)(v + 1, v + 1) -= 2.0 * tc.A;
        }
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

  // energy row: (E_F(q) + E_C_up(q) - E_0)/E_0 <= 0, support = all variables
  {
    ConstraintFn c;
    c.vars.resize(static_cast<size_t>(prog.dim));
    for (int i = 0; i < prog.dim; ++i) c.vars[static_cast<size_t>(i)] = i;
    const double fe_coef = scen.flight_kappa() / (dt * dt);
    c.eval = [&scen, &terms, var_of, point_at, fe_coef, const_energy, e0,
              N](const VecX& x, VecX* g, MatX* h) {
      double val = const_energy - e0;
      if (g) g->setZero(x.size());
      if (h) h->setZero(x.size(), x.size());
      for (int n = 0; n < N; ++n) {
        const Vec2 a = point_at(x, n);
        const Vec2 b = point_at(x, n + 1);
        const Vec2 d = b - a;
        val += fe_coef * d.squaredNorm();
        const bool a_free = n >= 1 && n <= N - 1;
        const bool b_free = n + 1 >= 1 && n + 1 <= N - 1;
        const int va = a_free ? var_of(n) : -1;
        const int vb = b_free ? var_of(n + 1) : -1;
        if (g) {
          if (a_free) {
            (*g)[va] += -2.0 * fe_coef * d.x();
            (*g)[va + 1] += -2.0 * fe_coef * d.y();
          }
          if (b_free) {
            (*g)[vb] += 2.0 * fe_coef * d.x();
            (*g)[vb + 1] += 2.0 * fe_coef * d.y();
          }
        }
        if (h) {
          for (int axis = 0; axis < 2; ++axis) {
            if (a_free) (*h)(va + axis, va + axis) += 2.0 * fe_coef;
            if (b_free) (*h)(vb + axis, vb + axis) += 2.0 * fe_coef;
            if (a_free && b_free) {
              (*h)(va + axis, vb + axis) += -2.0 * fe_coef;
              (*h)(vb + axis, va + axis) += -2.0 * fe_coef;
            }
          }
        }
      }
      for (const auto& t : terms) {
        const int v = var_of(t.waypoint);
        const Vec2 q(x[v], x[v + 1]);
        const Vec2 d = q - t.surr.q_ref;
        val += t.coef_energy *
               (t.surr.taylor.W + t.surr.grad.dot(d) +
                0.5 * t.surr.lipschitz * d.squaredNorm());
        if (g) {
          (*g)[v] += t.coef_energy * (t.surr.grad.x() + t.surr.lipschitz * d.x());
          (*g)[v + 1] += t.coef_energy * (t.surr.grad.y() + t.surr.lipschitz * d.y());
        }
        if (h) {
          (*h)(v, v) += t.coef_energy * t.surr.lipschitz;
          (*h)(v + 1, v + 1) += t.coef_energy * t.surr.lipschitz;
        }
      }
      if (g) *g /= e0;
      if (h) *h /= e0;
      return val / e0;
    };
    prog.ineqs.push_back(std::move(c));
  }

  // velocity rows: (||q[n+1]-q[n]||^2 - cap^2)/cap^2 <= 0
  for (int n = 0; n < N; ++n) {
    const bool a_free = n >= 1 && n <= N - 1;
    const bool b_free = n + 1 >= 1 && n + 1 <= N - 1;
    if (!a_free && !b_free) continue;
    ConstraintFn c;
    if (a_free) {
      c.vars.push_back(var_of(n));
      c.vars.push_back(var_of(n) + 1);
    }
    if (b_free) {
      c.vars.push_back(var_of(n + 1));
      c.vars.push_back(var_of(n + 1) + 1);
    }
    const Vec2 fixed_pt = !a_free ? scen.uav.start_point
                                  : (!b_free ? scen.uav.end_point : Vec2(0, 0));
    c.eval = [a_free, b_free, fixed_pt, cap2](const VecX& xs, VecX* g, MatX* h) {
      Vec2 a, b;
      if (a_free && b_free) {
        a = Vec2(xs[0], xs[1]);
        b = Vec2(xs[2], xs[3]);
      } else if (a_free) {
        a = Vec2(xs[0], xs[1]);
        b = fixed_pt;
      } else {
        a = fixed_pt;
        b = Vec2(xs[0], xs[1]);
      }
      const Vec2 d = b - a;
      if (g) {
        g->setZero(xs.size());
        if (a_free && b_free) {
          (*g)[0] = -2.0 * d.x() / cap2;
          (*g)[1] = -2.0 * d.y() / cap2;
          (*g)[2] = 2.0 * d.x() / cap2;
          (*g)[3] = 2.0 * d.y() / cap2;
        } else if (a_free) {
          (*g)[0] = -2.0 * d.x() / cap2;
          (*g)[1] = -2.0 * d.y() / cap2;
        } else {
          (*g)[0] = 2.0 * d.x() / cap2;
          (*g)[1] = 2.0 * d.y() / cap2;
        }
      }
      if (h) {
        h->setZero(xs.size(), xs.size());
        const double c2 = 2.0 / cap2;
        if (a_free && b_free) {
          for (int axis = 0; axis < 2; ++axis) {
            (*h)(axis, axis) = c2;
            (*h)(2 + axis, 2 + axis) = c2;
            (*h)(axis, 2 + axis) = -c2;
            (*h)(2 + axis, axis) = -c2;
          }
        } else {
          (*h)(0, 0) = c2;
          (*h)(1, 1) = c2;
        }
      }
      return (d.squaredNorm() - cap2) / cap2;
    };
    prog.ineqs.push_back(std::move(c));
  }

  const double s_before = bits_of(scen, q_r, assoc, power).total;
  SolveOutcome out = solve(prog, solver_opts);
  step.outcome = out;
  if (out.status != SolveStatus::Optimal) {
    if (max_min_slack && out.status == SolveStatus::Infeasible &&
        out.x.size() == prog.dim) {
      // Restoration mode: the phase-I minimizer still reduces the true
      // worst violation (the surrogate rows upper-bound the true ones), so
      // adopt it as the next expansion point.
      Trajectory qn = q_r;
      for (int j = 1; j < N; ++j)
        qn.points[static_cast<size_t>(j)] = Vec2(out.x[var_of(j)], out.x[var_of(j) + 1]);
      step.trajectory = std::move(qn);
      step.moved = true;
      step.note = "adopted least-violation point";
      return step;
    }
    // No strict interior (conservative majorizer) or numeric trouble: keep
    // the expansion point, which is feasible whenever the caller's was.
    step.kept_expansion_point = true;
    if (out.status == SolveStatus::Infeasible) {
      const bool qr_ok = audit(scen, q_r, assoc, power).feasible();
      step.note = qr_ok ? "surrogate has no strict interior; kept q_r"
                        : "expansion point infeasible (precondition breach)";
    }
    return step;
  }

  Trajectory qn = q_r;
  for (int j = 1; j < N; ++j) {
    qn.points[static_cast<size_t>(j)] = Vec2(out.x[var_of(j)], out.x[var_of(j) + 1]);
  }
  if (!max_min_slack) {
    const double s_after = bits_of(scen, qn, assoc, power).total;
    if (s_after < s_before - 1e-9 * (1.0 + s_before)) {
      step.kept_expansion_point = true;
      step.note = "monotone safeguard kept q_r";
      return step;
    }
  }
  step.trajectory = std::move(qn);
  step.moved = true;
  return step;
}

} // namespace uavmec

#endif // UAVMEC_TRAJECTORY_HPP
