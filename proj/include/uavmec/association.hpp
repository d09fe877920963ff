#ifndef UAVMEC_ASSOCIATION_HPP
#define UAVMEC_ASSOCIATION_HPP

#include <algorithm>
#include <cstdint>
#include <limits>
#include <queue>
#include <string>
#include <vector>

#include "uavmec/model.hpp"
#include "uavmec/solver.hpp"

// Exact solver for the per-slot user-association subproblem at fixed
// trajectory and power: maximize the total offloaded bits subject to one
// served UE per slot, the per-UE QoS floors, and the battery-energy budget
// left after flight. Best-first branch and bound; LP relaxations provide the
// bounds, column-wise maxima provide cheap pre-bounds.

namespace uavmec {

struct AssociationIlp {
  int K = 0, N = 0;
  MatX weights;         // w_k[n] = delta_t * B * R_k[n], bits per assignment
  MatX costs;           // c_k[n] = gamma_C * C_k * f_C^2 * w_k[n], joules
  VecX qos;             // D_k
  double energy_budget = 0.0; // E_0 - E_F
  double flight_energy = 0.0; // E_F at the fixed trajectory

  bool budget_exhausted() const { return energy_budget < 0.0; }

  // Canonical slot-major evaluation; every incumbent and every oracle uses
  // this exact accumulation order.
  double objective_of(const std::vector<int>& assign) const {
    double v = 0.0;
    for (int n = 0; n < N; ++n) v += weights(assign[static_cast<size_t>(n)], n);
    return v;
  }
  double cost_of(const std::vector<int>& assign) const {
    double v = 0.0;
    for (int n = 0; n < N; ++n) v += costs(assign[static_cast<size_t>(n)], n);
    return v;
  }
  VecX bits_per_ue(const std::vector<int>& assign) const {
    VecX s = VecX::Zero(K);
    for (int n = 0; n < N; ++n) {
      const int k = assign[static_cast<size_t>(n)];
      s[k] += weights(k, n);
    }
    return s;
  }
  bool feasible(const std::vector<int>& assign) const {
    const VecX s = bits_per_ue(assign);
    for (int k = 0; k < K; ++k)
      if (s[k] < qos[k]) return false;
    return cost_of(assign) <= energy_budget;
  }
};

// Weights evaluated at the serving positions of the fixed trajectory; the
// remaining battery budget accounts for the trajectory's flight energy.
inline AssociationIlp build_ilp(const Scenario& scen, const Trajectory& traj,
                                const PowerSchedule& power) {
  AssociationIlp ilp;
  ilp.K = scen.K();
  ilp.N = scen.N();
  const MatX R = slot_rates(scen, traj, power);
  const double bits_per_rate = scen.time.slot_len() * scen.channel.bandwidth;
  ilp.weights = bits_per_rate * R;
  ilp.costs = MatX(ilp.K, ilp.N);
  const double f2 = scen.uav.cpu_freq * scen.uav.cpu_freq;
  for (int k = 0; k < ilp.K; ++k)
    for (int n = 0; n < ilp.N; ++n)
      ilp.costs(k, n) =
          scen.uav.switch_cap * scen.ues[k].cycles_per_bit * f2 * ilp.weights(k, n);
  ilp.qos = VecX(ilp.K);
  for (int k = 0; k < ilp.K; ++k) ilp.qos[k] = scen.ues[k].min_bits;
  ilp.flight_energy = flight_energy(traj, scen).total;
  ilp.energy_budget = scen.uav.battery - ilp.flight_energy;
  return ilp;
}

// Partial fixing of the binary matrix: -1 free, 0/1 fixed.
struct BnbNode {
  Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic> fix;
  double bound = std::numeric_limits<double>::infinity();
  double cert = 0.0;          // barrier-certificate slack contained in bound
  int depth = 0;
  bool refined = false;       // true once an LP bound has been computed
  std::uint64_t seq = 0;      // FIFO tie-break for equal bounds
  MatX frac;                  // LP point for branching (empty until refined)
};

struct BnbOptions {
  double gap = 0.0;          // absolute optimality gap to prove
  double int_tol = 1e-6;     // integrality tolerance on LP points
  long max_nodes = 2000000;
  std::vector<int> seed_assignment; // optional warm incumbent (per-slot UE)
  SolverOptions lp;
  BnbOptions() {
    lp.tol_gap = 1e-8;
    lp.tol_feas = 1e-9;
  }
};

struct BnbResult {
  SolveStatus status = SolveStatus::Infeasible;
  Association assoc;
  std::vector<int> assign; // per-slot served UE (0-based)
  double objective = -std::numeric_limits<double>::infinity();
  double bound_gap = 0.0;
  long nodes = 0;
  int lp_solves = 0;
  std::string reason;
};

namespace detail_bnb {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double inflate(double v) { return v + 1e-9 * (1.0 + std::abs(v)); }

// Column-wise forcing: a fixed 1 zeroes the rest of its column; a column with
// a single free entry and no fixed 1 forces that entry to 1. Returns false on
// contradiction (a column that can no longer sum to one).
inline bool propagate(BnbNode& node) {
  const int K = static_cast<int>(node.fix.rows());
  const int N = static_cast<int>(node.fix.cols());
  for (int n = 0; n < N; ++n) {
    int ones = 0, free_cnt = 0, last_free = -1;
    for (int k = 0; k < K; ++k) {
      if (node.fix(k, n) == 1) ++ones;
      if (node.fix(k, n) == -1) {
        ++free_cnt;
        last_free = k;
      }
    }
    if (ones > 1) return false;
    if (ones == 1) {
      for (int k = 0; k < K; ++k)
        if (node.fix(k, n) == -1) node.fix(k, n) = 0;
    } else if (free_cnt == 0) {
      return false;
    } else if (free_cnt == 1) {
      node.fix(last_free, n) = 1;
    }
  }
  return true;
}

struct NodeStats {
  double fixed_weight = 0.0;
  double fixed_cost = 0.0;
  VecX fixed_bits;
  std::vector<int> fixed_col; // served k or -1 if column still open
  int free_vars = 0;
};

inline NodeStats stats_of(const BnbNode& node, const AssociationIlp& ilp) {
  NodeStats st;
  st.fixed_bits = VecX::Zero(ilp.K);
  st.fixed_col.assign(static_cast<size_t>(ilp.N), -1);
  for (int n = 0; n < ilp.N; ++n)
    for (int k = 0; k < ilp.K; ++k) {
      if (node.fix(k, n) == 1) {
        st.fixed_col[static_cast<size_t>(n)] = k;
        st.fixed_weight += ilp.weights(k, n);
        st.fixed_cost += ilp.costs(k, n);
        st.fixed_bits[k] += ilp.weights(k, n);
      } else if (node.fix(k, n) == -1) {
        ++st.free_vars;
      }
    }
  return st;
}

// Cheap validity screens: optimistic per-UE bits must reach the QoS floors
// and the cheapest completion must fit the budget.
inline bool quick_feasible(const BnbNode& node, const AssociationIlp& ilp,
                           const NodeStats& st) {
  const double margin = 1e-9;
  for (int k = 0; k < ilp.K; ++k) {
    if (ilp.qos[k] <= 0.0) continue;
    double max_bits = st.fixed_bits[k];
    for (int n = 0; n < ilp.N; ++n)
      if (node.fix(k, n) == -1) max_bits += ilp.weights(k, n);
    if (max_bits < ilp.qos[k] - margin * (1.0 + ilp.qos[k])) return false;
  }
  double min_cost = st.fixed_cost;
  for (int n = 0; n < ilp.N; ++n) {
    if (st.fixed_col[static_cast<size_t>(n)] >= 0) continue;
    double cmin = std::numeric_limits<double>::infinity();
    for (int k = 0; k < ilp.K; ++k)
      if (node.fix(k, n) == -1) cmin = std::min(cmin, ilp.costs(k, n));
    min_cost += cmin;
  }
  return min_cost <= ilp.energy_budget + margin * (1.0 + std::abs(ilp.energy_budget));
}

// Sum of column maxima over the allowed entries; ignores the coupling rows,
// hence a valid upper bound.
inline double quick_bound(const BnbNode& node, const AssociationIlp& ilp,
                          const NodeStats& st) {
  double ub = 0.0;
  for (int n = 0; n < ilp.N; ++n) {
    const int fk = st.fixed_col[static_cast<size_t>(n)];
    if (fk >= 0) {
      ub += ilp.weights(fk, n);
    } else {
      double wmax = kNegInf;
      for (int k = 0; k < ilp.K; ++k)
        if (node.fix(k, n) == -1) wmax = std::max(wmax, ilp.weights(k, n));
      ub += wmax;
    }
  }
  return inflate(ub);
}

} // namespace detail_bnb

// Upper bound for a node from the LP relaxation of the remaining free
// entries (b in [0,1], unit columns, QoS and energy rows). Returns -inf when
// the relaxation is infeasible. When `frac` is non-null it receives the LP
// point mapped back to the full matrix (fixed entries included) for
// branching decisions.
inline double lp_bound(const BnbNode& node_in, const AssociationIlp& ilp,
                       const SolverOptions& lp_opts = BnbOptions().lp,
                       MatX* frac = nullptr, int* lp_solves = nullptr,
                       double* cert_out = nullptr) {
  using detail_bnb::kNegInf;
  BnbNode node = node_in;
  if (!detail_bnb::propagate(node)) return kNegInf;
  const auto st = detail_bnb::stats_of(node, ilp);

  if (st.free_vars == 0) {
    std::vector<int> assign(st.fixed_col.begin(), st.fixed_col.end());
    if (frac) *frac = node.fix.cast<double>();
    return ilp.feasible(assign) ? ilp.objective_of(assign) : kNegInf;
  }
  if (!detail_bnb::quick_feasible(node, ilp, st)) return kNegInf;

  // variable map over free entries, slot-major
  std::vector<std::pair<int, int>> vars; // (k, n)
  MatXi index = MatXi::Constant(ilp.K, ilp.N, -1);
  for (int n = 0; n < ilp.N; ++n)
    for (int k = 0; k < ilp.K; ++k)
      if (node.fix(k, n) == -1) {
        index(k, n) = static_cast<int>(vars.size());
        vars.emplace_back(k, n);
      }
  const int nv = static_cast<int>(vars.size());

  double wscale = 1.0;
  for (const auto& [k, n] : vars) wscale = std::max(wscale, std::abs(ilp.weights(k, n)));

  VecX costs_lp(nv);
  for (int i = 0; i < nv; ++i)
    costs_lp[i] = ilp.weights(vars[static_cast<size_t>(i)].first,
                              vars[static_cast<size_t>(i)].second) / wscale;

  // unit-column equalities for still-open slots
  std::vector<int> open_cols;
  for (int n = 0; n < ilp.N; ++n)
    if (st.fixed_col[static_cast<size_t>(n)] < 0) open_cols.push_back(n);
  MatX A = MatX::Zero(static_cast<int>(open_cols.size()), nv);
  for (size_t r = 0; r < open_cols.size(); ++r)
    for (int k = 0; k < ilp.K; ++k)
      if (index(k, open_cols[r]) >= 0) A(static_cast<int>(r), index(k, open_cols[r])) = 1.0;
  VecX beq = VecX::Ones(static_cast<int>(open_cols.size()));

  // QoS rows (as needed) and the energy row
  std::vector<VecX> rows;
  std::vector<double> rhs;
  for (int k = 0; k < ilp.K; ++k) {
    const double need = ilp.qos[k] - st.fixed_bits[k];
    if (need <= 0.0) continue;
    VecX row = VecX::Zero(nv);
    bool any = false;
    for (int n = 0; n < ilp.N; ++n)
      if (index(k, n) >= 0) {
        row[index(k, n)] = -ilp.weights(k, n) / wscale;
        any = true;
      }
    if (!any) return kNegInf; // positive need, no free entries left
    rows.push_back(row);
    rhs.push_back(-need / wscale);
  }
  {
    double cscale = 1.0;
    for (const auto& [k, n] : vars) cscale = std::max(cscale, std::abs(ilp.costs(k, n)));
    VecX row = VecX::Zero(nv);
    for (int i = 0; i < nv; ++i)
      row[i] = ilp.costs(vars[static_cast<size_t>(i)].first,
                         vars[static_cast<size_t>(i)].second) / cscale;
    rows.push_back(row);
    rhs.push_back((ilp.energy_budget - st.fixed_cost) / cscale);
  }
  MatX G(static_cast<int>(rows.size()), nv);
  VecX h(static_cast<int>(rows.size()));
  for (size_t r = 0; r < rows.size(); ++r) {
    G.row(static_cast<int>(r)) = rows[r];
    h[static_cast<int>(r)] = rhs[r];
  }

  auto out = solve_lp(costs_lp, G, h, A, beq, VecX::Zero(nv), VecX::Ones(nv), lp_opts);
  if (lp_solves) ++*lp_solves;
  if (out.status == SolveStatus::Infeasible) return kNegInf;

  if (frac) {
    *frac = node.fix.cast<double>();
    if (out.x.size() == nv)
      for (int i = 0; i < nv; ++i)
        (*frac)(vars[static_cast<size_t>(i)].first, vars[static_cast<size_t>(i)].second) =
            out.x[i];
  }
  if (out.status != SolveStatus::Optimal)
    return detail_bnb::quick_bound(node, ilp, st); // keep a valid bound
  const double raw = out.objective * wscale + st.fixed_weight +
                     out.certified_gap * wscale;
  if (cert_out) *cert_out = out.certified_gap * wscale;
  return detail_bnb::inflate(raw);
}

// Best-first branch and bound. With gap 0 the returned assignment is proven
// optimal; ties keep the first incumbent found. Branching picks the most
// fractional LP entry, ties to the lowest (k, n).
inline BnbResult solve_bnb(const AssociationIlp& ilp, const BnbOptions& opts = {}) {
  using detail_bnb::kNegInf;
  BnbResult res;
  if (ilp.budget_exhausted()) {
    res.status = SolveStatus::Infeasible;
    res.reason = "BudgetExhausted";
    return res;
  }

  auto set_incumbent = [&](const std::vector<int>& assign) {
    const double v = ilp.objective_of(assign);
    if (v > res.objective) {
      res.objective = v;
      res.assign = assign;
    }
  };

  if (static_cast<int>(opts.seed_assignment.size()) == ilp.N &&
      ilp.feasible(opts.seed_assignment))
    set_incumbent(opts.seed_assignment);

  // greedy warm incumbent: per-slot argmax, ties to lower k; when QoS floors
  // are missed, repair by reassigning the slots with the smallest weight loss
  {
    std::vector<int> greedy(static_cast<size_t>(ilp.N), 0);
    for (int n = 0; n < ilp.N; ++n) {
      int best = 0;
      for (int k = 1; k < ilp.K; ++k)
        if (ilp.weights(k, n) > ilp.weights(best, n)) best = k;
      greedy[static_cast<size_t>(n)] = best;
    }
    if (ilp.feasible(greedy)) {
      set_incumbent(greedy);
    } else {
      VecX bits = ilp.bits_per_ue(greedy);
      bool stuck = false;
      for (int k = 0; k < ilp.K && !stuck; ++k) {
        while (bits[k] < ilp.qos[k]) {
          int pick = -1;
          double best_loss = std::numeric_limits<double>::infinity();
          for (int n = 0; n < ilp.N; ++n) {
            const int cur = greedy[static_cast<size_t>(n)];
            if (cur == k) continue;
            // do not break a donor that is itself pinned to its floor
            if (bits[cur] - ilp.weights(cur, n) < ilp.qos[cur]) continue;
            const double loss = ilp.weights(cur, n) - ilp.weights(k, n);
            if (loss < best_loss - 1e-15) {
              best_loss = loss;
              pick = n;
            }
          }
          if (pick < 0) {
            stuck = true;
            break;
          }
          const int cur = greedy[static_cast<size_t>(pick)];
          bits[cur] -= ilp.weights(cur, pick);
          bits[k] += ilp.weights(k, pick);
          greedy[static_cast<size_t>(pick)] = k;
        }
      }
      if (!stuck && ilp.feasible(greedy)) set_incumbent(greedy);
    }
  }

  auto cmp = [](const BnbNode& a, const BnbNode& b) {
    if (a.bound != b.bound) return a.bound < b.bound;
    return a.seq > b.seq;
  };
  std::priority_queue<BnbNode, std::vector<BnbNode>, decltype(cmp)> queue(cmp);
  std::uint64_t seq = 0;

  BnbNode root;
  root.fix.setConstant(ilp.K, ilp.N, -1);
  if (detail_bnb::propagate(root)) {
    const auto st = detail_bnb::stats_of(root, ilp);
    if (detail_bnb::quick_feasible(root, ilp, st)) {
      root.bound = detail_bnb::quick_bound(root, ilp, st);
      root.seq = seq++;
      queue.push(root);
    }
  }

  const bool has_incumbent_init = res.objective > kNegInf;
  // A node is closed when its bound minus the barrier-certificate slack it
  // carries reaches the incumbent: bounds cannot resolve finer than their
  // certificates, and completions can only exceed the incumbent by at most
  // that slack.
  auto closed = [&](const BnbNode& n) {
    if (res.objective == kNegInf) return false;
    const double slack =
        std::max(opts.gap, n.cert + 1e-9 * (1.0 + std::abs(res.objective)));
    return n.bound <= res.objective + slack;
  };
  double top_bound_at_stop = kNegInf;
  while (!queue.empty()) {
    if (++res.nodes > opts.max_nodes) {
      res.status = res.objective > kNegInf ? SolveStatus::MaxIter : SolveStatus::NumericFailure;
      res.reason = "node limit";
      break;
    }
    BnbNode node = queue.top();
    queue.pop();
    if (closed(node)) {
      top_bound_at_stop = node.bound;
      break; // best-first order: every remaining node is bounded by this one
    }

    if (!node.refined) {
      MatX frac;
      double cert = 0.0;
      const double lb = lp_bound(node, ilp, opts.lp, &frac, &res.lp_solves, &cert);
      if (lb == kNegInf) continue;
      if (lb < node.bound) {
        node.bound = lb;
        node.cert = cert;
      }
      node.refined = true;
      node.frac = frac;
      // incumbent candidate: per-column argmax rounding of the LP point
      std::vector<int> rounded(static_cast<size_t>(ilp.N), 0);
      for (int n = 0; n < ilp.N; ++n) {
        int best = 0;
        for (int k = 1; k < ilp.K; ++k)
          if (frac(k, n) > frac(best, n)) best = k;
        rounded[static_cast<size_t>(n)] = best;
      }
      if (ilp.feasible(rounded)) set_incumbent(rounded);
      node.seq = seq++;
      queue.push(node);
      continue;
    }

    // branch on the most fractional entry, ties to lowest (k, n)
    int bk = -1, bn = -1;
    double best_fr = -1.0;
    for (int k = 0; k < ilp.K; ++k)
      for (int n = 0; n < ilp.N; ++n) {
        if (node.fix(k, n) != -1) continue;
        const double v = node.frac.size() ? node.frac(k, n) : 0.5;
        const double fr = std::min(v, 1.0 - v);
        if (fr > best_fr + 1e-15) {
          best_fr = fr;
          bk = k;
          bn = n;
        }
      }
    if (bk < 0) continue; // fully fixed; already evaluated during refinement

    for (int val : {1, 0}) {
      BnbNode child;
      child.fix = node.fix;
      child.fix(bk, bn) = static_cast<std::int8_t>(val);
      child.depth = node.depth + 1;
      if (!detail_bnb::propagate(child)) continue;
      const auto st = detail_bnb::stats_of(child, ilp);
      if (!detail_bnb::quick_feasible(child, ilp, st)) continue;
      if (st.free_vars == 0) {
        std::vector<int> assign(st.fixed_col.begin(), st.fixed_col.end());
        if (ilp.feasible(assign)) set_incumbent(assign);
        continue;
      }
      const double qb = detail_bnb::quick_bound(child, ilp, st);
      if (qb < node.bound) {
        child.bound = qb;
        child.cert = 0.0;
      } else {
        child.bound = node.bound;
        child.cert = node.cert;
      }
      if (closed(child)) continue;
      child.seq = seq++;
      queue.push(child);
    }
  }

  if (res.objective == kNegInf) {
    res.status = SolveStatus::Infeasible;
    res.reason = has_incumbent_init ? "" : "no feasible assignment";
    return res;
  }
  if (res.status != SolveStatus::MaxIter) res.status = SolveStatus::Optimal;
  res.bound_gap = std::max(0.0, top_bound_at_stop - res.objective);
  res.assoc.b = MatXi::Zero(ilp.K, ilp.N);
  for (int n = 0; n < ilp.N; ++n) res.assoc.b(res.assign[static_cast<size_t>(n)], n) = 1;
  return res;
}

} // namespace uavmec

#endif // UAVMEC_ASSOCIATION_HPP
