#ifndef UAVMEC_SOLVER_HPP
#define UAVMEC_SOLVER_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "uavmec/model.hpp"

// Log-barrier interior-point solver for smooth convex programs:
//
//   maximize   f(x)            (f concave, twice differentiable)
//   subject to g_i(x) <= 0     (g_i convex, twice differentiable)
//              A x = b
//
// The barrier subproblems min t*(-f)(x) - sum_i log(-g_i(x)) are solved with
// an infeasible-start Newton method (primal/dual residual formulation, block
// elimination of the equality multipliers). When the initial point is not
// strictly feasible, a phase-I program minimizing the max constraint slack is
// solved first with the same machinery. LPs go through the identical core.

namespace uavmec {

enum class SolveStatus { Optimal, Infeasible, Unbounded, MaxIter, NumericFailure };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::Unbounded: return "Unbounded";
    case SolveStatus::MaxIter: return "MaxIter";
    case SolveStatus::NumericFailure: return "NumericFailure";
  }
  return "?";
}

struct SolverOptions {
  double tol_gap = 1e-7;  // stop when m/t <= tol_gap * (1 + |objective|)
  double tol_feas = 1e-8;
  double t0 = 1.0;
  double mu = 10.0;
  int max_newton = 200; // per barrier stage
  int max_stages = 60;
  double ls_alpha = 0.25;
  double ls_beta = 0.5;
  double newton_tol = 1e-9;
  bool dump_iterates = false;
  std::string dump_path = "barrier_iterates.csv";
};

// One inequality g(x_S) <= 0 restricted to a support set S of variables.
// eval returns g and, when the pointers are non-null, fills the gradient and
// Hessian with respect to the support variables only. Rows flagged affine
// (constant gradient, zero curvature) let the core take a structured
// factorization path for linear programs.
struct ConstraintFn {
  std::vector<int> vars;
  std::function<double(const VecX&, VecX*, MatX*)> eval;
  bool affine = false;
};

inline ConstraintFn affine_ineq(std::vector<int> vars, VecX coeffs, double offset) {
  ConstraintFn c;
  c.vars = std::move(vars);
  c.affine = true;
  c.eval = [coeffs = std::move(coeffs), offset](const VecX& xs, VecX* g, MatX* h) {
    if (g) *g = coeffs;
    if (h) h->setZero(coeffs.size(), coeffs.size());
    return coeffs.dot(xs) + offset;
  };
  return c;
}

// (lo - x_i)/scale <= 0
inline ConstraintFn lower_bound_ineq(int i, double lo, double scale = 1.0) {
  ConstraintFn c;
  c.vars = {i};
  c.affine = true;
  c.eval = [lo, scale](const VecX& xs, VecX* g, MatX* h) {
    if (g) { g->resize(1); (*g)[0] = -1.0 / scale; }
    if (h) h->setZero(1, 1);
    return (lo - xs[0]) / scale;
  };
  return c;
}

// (x_i - hi)/scale <= 0
inline ConstraintFn upper_bound_ineq(int i, double hi, double scale = 1.0) {
  ConstraintFn c;
  c.vars = {i};
  c.affine = true;
  c.eval = [hi, scale](const VecX& xs, VecX* g, MatX* h) {
    if (g) { g->resize(1); (*g)[0] = 1.0 / scale; }
    if (h) h->setZero(1, 1);
    return (xs[0] - hi) / scale;
  };
  return c;
}

struct SmoothProgram {
  int dim = 0;
  // maximize; fills grad (dim) and hess (dim x dim) when non-null.
  std::function<double(const VecX&, VecX*, MatX*)> objective;
  std::vector<ConstraintFn> ineqs;
  MatX eq_A; // 0 x dim when absent
  VecX eq_b;
  VecX x0;
  bool affine_objective = false; // constant gradient, zero curvature
};

struct KktResiduals {
  double stationarity = 0.0; // ||grad f - sum lambda_i grad g_i - A^T nu||_2
  double ineq = 0.0;         // max(0, max_i g_i)
  double eq = 0.0;           // ||A x - b||_inf
  double gap = 0.0;          // m / t barrier duality-gap surrogate
};

struct SolveOutcome {
  SolveStatus status = SolveStatus::NumericFailure;
  VecX x;
  double objective = 0.0;
  KktResiduals kkt;
  int newton_iters = 0;
  int barrier_stages = 0;
  double certified_gap = 0.0; // |f(x) - p*| <= certified_gap when Optimal
  std::vector<double> stage_objectives;
  std::string message;
};

namespace detail {

inline double eval_constraint(const ConstraintFn& c, const VecX& x, VecX* grad,
                              MatX* hess) {
  VecX xs(static_cast<int>(c.vars.size()));
  for (size_t j = 0; j < c.vars.size(); ++j) xs[static_cast<int>(j)] = x[c.vars[j]];
  return c.eval(xs, grad, hess);
}

struct BarrierCore {
  const SmoothProgram& prog;
  SolverOptions opts;
  std::function<bool(const VecX&)> early_stop; // optional, checked per iterate
  std::ofstream dump;

  // Cached rows of an all-affine program. The barrier Hessian is then
  // diagonal (singleton rows) plus a low-rank term (coupling rows), which
  // the centering solves through the Woodbury identity instead of a dense
  // factorization.
  struct AffineCache {
    bool usable = false;
    VecX obj_coef;
    std::vector<std::vector<int>> vars;
    std::vector<std::vector<double>> coef;
    std::vector<double> offset;
    std::vector<int> multi; // indices of rows with two or more variables
  };
  AffineCache aff;

  explicit BarrierCore(const SmoothProgram& p, const SolverOptions& o)
      : prog(p), opts(o) {
    if (opts.dump_iterates) dump.open(opts.dump_path);
    if (dump.is_open()) dump << "stage,iter,t,objective,r_dual,r_pri\n";
    build_affine_cache();
  }

  void build_affine_cache() {
    if (!prog.affine_objective || prog.dim == 0) return;
    for (const auto& c : prog.ineqs)
      if (!c.affine) return;
    const int n = prog.dim;
    aff.vars.reserve(prog.ineqs.size());
    aff.coef.reserve(prog.ineqs.size());
    aff.offset.reserve(prog.ineqs.size());
    std::vector<bool> covered(static_cast<size_t>(n), false);
    for (size_t i = 0; i < prog.ineqs.size(); ++i) {
      const auto& c = prog.ineqs[i];
      VecX zero = VecX::Zero(static_cast<int>(c.vars.size()));
      VecX grad;
      const double g0 = c.eval(zero, &grad, nullptr);
      aff.vars.push_back(c.vars);
      aff.coef.emplace_back(grad.data(), grad.data() + grad.size());
      aff.offset.push_back(g0);
      if (c.vars.size() >= 2) aff.multi.push_back(static_cast<int>(i));
      else if (c.vars.size() == 1 && grad[0] != 0.0)
        covered[static_cast<size_t>(c.vars[0])] = true;
    }
    // the diagonal block must be structurally positive for Woodbury to be
    // well conditioned; otherwise keep the dense path
    if (aff.multi.size() > 64) return;
    for (bool cv : covered)
      if (!cv) return;
    VecX g(n);
    prog.objective(VecX::Zero(n), &g, nullptr);
    aff.obj_coef = g;
    aff.usable = true;
  }

  // Strictly-feasible row evaluation from the cache; false when any row is
  // at or past its boundary.
  bool affine_rows(const VecX& x, VecX& gvals) const {
    const int m = static_cast<int>(aff.vars.size());
    for (int i = 0; i < m; ++i) {
      double v = aff.offset[static_cast<size_t>(i)];
      const auto& vs = aff.vars[static_cast<size_t>(i)];
      const auto& cf = aff.coef[static_cast<size_t>(i)];
      for (size_t j = 0; j < vs.size(); ++j) v += cf[j] * x[vs[j]];
      if (!(v < 0.0)) return false;
      gvals[i] = v;
    }
    return true;
  }

  void affine_dual_residual(double t, const VecX& gvals, const VecX& nu,
                            VecX& rd) const {
    rd = -t * aff.obj_coef;
    const int m = static_cast<int>(aff.vars.size());
    for (int i = 0; i < m; ++i) {
      const double lam = 1.0 / (-gvals[i]);
      const auto& vs = aff.vars[static_cast<size_t>(i)];
      const auto& cf = aff.coef[static_cast<size_t>(i)];
      for (size_t j = 0; j < vs.size(); ++j) rd[vs[j]] += lam * cf[j];
    }
    if (prog.eq_A.rows() > 0) rd.noalias() += prog.eq_A.transpose() * nu;
  }

  double max_violation(const VecX& x) const {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& c : prog.ineqs)
      m = std::max(m, eval_constraint(c, x, nullptr, nullptr));
    return prog.ineqs.empty() ? -1.0 : m;
  }

  bool in_domain(const VecX& x) const {
    for (const auto& c : prog.ineqs)
      if (!(eval_constraint(c, x, nullptr, nullptr) < 0.0)) return false;
    return true;
  }

  // t*(-f) + phi, with gradient/Hessian accumulation. Returns false when x is
  // outside the barrier domain.
  bool eval_center(double t, const VecX& x, double& val, VecX& grad,
                   MatX& hess) const {
    const int n = prog.dim;
    VecX fg(n);
    MatX fh(n, n);
    const double f = prog.objective(x, &fg, &fh);
    val = -t * f;
    grad = -t * fg;
    hess = -t * fh;
    VecX cg;
    MatX ch;
    for (const auto& c : prog.ineqs) {
      const double g = eval_constraint(c, x, &cg, &ch);
      if (!(g < 0.0)) return false;
      val -= std::log(-g);
      const int s = static_cast<int>(c.vars.size());
      const double inv = 1.0 / (-g);
      for (int a = 0; a < s; ++a) {
        grad[c.vars[a]] += inv * cg[a];
        for (int b2 = 0; b2 < s; ++b2)
          hess(c.vars[a], c.vars[b2]) += inv * inv * cg[a] * cg[b2] + inv * ch(a, b2);
      }
    }
    return true;
  }

  // Centering for all-affine programs: the Newton system is solved through
  // diag + low-rank (Woodbury) instead of a dense factorization.
  SolveStatus center_affine(double t, VecX& x, VecX& nu, int stage, int& iters_used,
                            double grad_scale, bool& unbounded, bool& stopped_early) {
    const int n = prog.dim;
    const int p = static_cast<int>(prog.eq_A.rows());
    const int m = static_cast<int>(aff.vars.size());
    const int r = static_cast<int>(aff.multi.size());
    const double eps_dual = opts.newton_tol * (1.0 + t) * grad_scale;
    const double eps_pri =
        opts.tol_feas * 0.01 * (1.0 + (p > 0 ? prog.eq_b.lpNorm<Eigen::Infinity>() : 0.0));

    VecX gvals(m), gvals_t(m);
    double stage_reg = 0.0;
    int collapses = 0;
    int stalls = 0;

    for (int it = 0; it < opts.max_newton; ++it, ++iters_used) {
      if (!affine_rows(x, gvals)) return SolveStatus::NumericFailure;
      VecX r_dual(n);
      affine_dual_residual(t, gvals, nu, r_dual);
      VecX r_pri = p > 0 ? VecX(prog.eq_A * x - prog.eq_b) : VecX();
      const double rd = r_dual.norm();
      const double rp = p > 0 ? r_pri.lpNorm<Eigen::Infinity>() : 0.0;
      if (dump.is_open())
        dump << stage << ',' << it << ',' << t << ','
             << prog.objective(x, nullptr, nullptr) << ',' << rd << ',' << rp << "\n";
      if (rd <= eps_dual && rp <= eps_pri) return SolveStatus::Optimal;

      // assemble the diagonal and the low-rank block
      VecX d = VecX::Zero(n);
      MatX U = MatX::Zero(n, r);
      VecX wmul(r);
      {
        int uc = 0;
        size_t next_multi = 0;
        for (int i = 0; i < m; ++i) {
          const double w = 1.0 / (gvals[i] * gvals[i]);
          const auto& vs = aff.vars[static_cast<size_t>(i)];
          const auto& cf = aff.coef[static_cast<size_t>(i)];
          if (next_multi < aff.multi.size() &&
              aff.multi[next_multi] == i) {
            for (size_t j = 0; j < vs.size(); ++j) U(vs[j], uc) = cf[j];
            wmul[uc] = w;
            ++uc;
            ++next_multi;
          } else {
            d[vs[0]] += w * cf[0] * cf[0];
          }
        }
      }

      VecX dx(n), dnu;
      double reg = stage_reg;
      bool factored = false;
      const double dmax = d.size() ? d.maxCoeff() : 1.0;
      for (int attempt = 0; attempt < 16 && !factored; ++attempt) {
        VecX dd = d.array() + std::max(reg, 1e-14 * (1.0 + dmax));
        Eigen::LDLT<MatX> mld;
        if (r > 0) {
          MatX M = U.transpose() * dd.cwiseInverse().asDiagonal() * U;
          for (int i = 0; i < r; ++i) M(i, i) += 1.0 / wmul[i];
          mld.compute(M);
          if (mld.info() != Eigen::Success) {
            reg = (reg == 0.0) ? 1e-10 : reg * 10.0;
            continue;
          }
        }
        auto solveH = [&](const VecX& v) -> VecX {
          VecX t1 = v.cwiseQuotient(dd);
          if (r > 0) {
            VecX s = U.transpose() * t1;
            s = mld.solve(s);
            t1 -= (U * s).cwiseQuotient(dd);
          }
          return t1;
        };
        if (p > 0) {
          VecX y1 = solveH(r_dual);
          MatX Y2(n, p);
          for (int i = 0; i < p; ++i)
            Y2.col(i) = solveH(prog.eq_A.row(i).transpose());
          MatX S = prog.eq_A * Y2;
          Eigen::LDLT<MatX> sld(S);
          if (sld.info() != Eigen::Success) {
            reg = (reg == 0.0) ? 1e-10 : reg * 10.0;
            continue;
          }
          dnu = sld.solve(r_pri - prog.eq_A * y1);
          dx = -y1 - Y2 * dnu;
        } else {
          dx = -solveH(r_dual);
        }
        factored = true;
      }
      if (!factored) return SolveStatus::NumericFailure;

      const double res0 = std::sqrt(rd * rd + (p > 0 ? r_pri.squaredNorm() : 0.0));
      double s = 1.0;
      bool accepted = false;
      double rest_accepted = res0;
      VecX xt, nut;
      for (int shrink = 0; shrink < 160; ++shrink) {
        xt = x + s * dx;
        if (affine_rows(xt, gvals_t)) {
          nut = p > 0 ? VecX(nu + s * dnu) : nu;
          VecX rdt(n);
          affine_dual_residual(t, gvals_t, nut, rdt);
          const double rpt = p > 0 ? (prog.eq_A * xt - prog.eq_b).norm() : 0.0;
          const double rest = std::sqrt(rdt.squaredNorm() + rpt * rpt);
          if (rest <= (1.0 - opts.ls_alpha * s) * res0) {
            accepted = true;
            rest_accepted = rest;
            break;
          }
        }
        s *= opts.ls_beta;
        if (s < 1e-13) break;
      }
      if (!accepted) {
        if (rd <= 10.0 * eps_dual && rp <= 10.0 * eps_pri) return SolveStatus::Optimal;
        stage_reg = (stage_reg == 0.0) ? 1e-10 : stage_reg * 100.0;
        if (++collapses >= 6) return SolveStatus::NumericFailure;
        continue;
      }
      if (rest_accepted >= res0 * (1.0 - 1e-12)) {
        if (++stalls >= 3) {
          x = xt;
          if (p > 0) nu = nut;
          return SolveStatus::Optimal;
        }
      } else {
        stalls = 0;
      }
      x = xt;
      if (p > 0) nu = nut;
      if (x.lpNorm<Eigen::Infinity>() > 1e14 ||
          prog.objective(x, nullptr, nullptr) > 1e18) {
        unbounded = true;
        return SolveStatus::Optimal;
      }
      if (early_stop && early_stop(x)) {
        stopped_early = true;
        return SolveStatus::Optimal;
      }
    }
    return SolveStatus::MaxIter;
  }

  // One centering stage: Newton on the KKT system of
  //   min t*(-f)(x) + phi(x)  s.t.  A x = b
  // with infeasible-start residuals. Returns status; x/nu updated in place.
  SolveStatus center(double t, VecX& x, VecX& nu, int stage, int& iters_used,
                     double grad_scale, bool& unbounded, bool& stopped_early) {
    if (aff.usable)
      return center_affine(t, x, nu, stage, iters_used, grad_scale, unbounded,
                           stopped_early);
    const int n = prog.dim;
    const int p = static_cast<int>(prog.eq_A.rows());
    const double eps_dual = opts.newton_tol * (1.0 + t) * grad_scale;
    const double eps_pri =
        opts.tol_feas * 0.01 * (1.0 + (p > 0 ? prog.eq_b.lpNorm<Eigen::Infinity>() : 0.0));

    double val;
    VecX grad(n);
    MatX hess(n, n);
    double stage_reg = 0.0;
    int collapses = 0;
    int stalls = 0;

    for (int it = 0; it < opts.max_newton; ++it, ++iters_used) {
      if (!eval_center(t, x, val, grad, hess)) return SolveStatus::NumericFailure;
      VecX r_dual = grad;
      if (p > 0) r_dual += prog.eq_A.transpose() * nu;
      VecX r_pri = p > 0 ? VecX(prog.eq_A * x - prog.eq_b) : VecX();
      const double rd = r_dual.norm();
      const double rp = p > 0 ? r_pri.lpNorm<Eigen::Infinity>() : 0.0;
      if (dump.is_open())
        dump << stage << ',' << it << ',' << t << ',' << prog.objective(x, nullptr, nullptr)
             << ',' << rd << ',' << rp << "\n";
      if (rd <= eps_dual && rp <= eps_pri) return SolveStatus::Optimal;

      // Factor the (regularized) Hessian and eliminate the multipliers.
      VecX dx(n), dnu;
      double reg = stage_reg;
      bool factored = false;
      for (int attempt = 0; attempt < 16; ++attempt) {
        MatX H = hess;
        if (reg > 0) H.diagonal().array() += reg;
        Eigen::LLT<MatX> llt(H);
        if (llt.info() == Eigen::Success) {
          if (p > 0) {
            VecX y1 = llt.solve(r_dual);
            MatX Y2 = llt.solve(prog.eq_A.transpose());
            MatX S = prog.eq_A * Y2;
            Eigen::LDLT<MatX> sld(S);
            if (sld.info() == Eigen::Success) {
              dnu = sld.solve(r_pri - prog.eq_A * y1);
              dx = -y1 - Y2 * dnu;
              factored = true;
              break;
            }
          } else {
            dx = -llt.solve(r_dual);
            factored = true;
            break;
          }
        }
        reg = (reg == 0.0) ? 1e-10 : reg * 10.0;
      }
      if (!factored) return SolveStatus::NumericFailure;

      // Backtracking: stay in the barrier domain, then Armijo on the residual
      // norm of the infeasible-start system.
      const double res0 = std::sqrt(rd * rd + (p > 0 ? r_pri.squaredNorm() : 0.0));
      double s = 1.0;
      int shrink = 0;
      VecX xt, nut;
      for (; shrink < 80; ++shrink) {
        xt = x + s * dx;
        if (in_domain(xt)) break;
        s *= opts.ls_beta;
      }
      bool accepted = false;
      double rest_accepted = res0;
      for (; shrink < 160; ++shrink) {
        xt = x + s * dx;
        nut = p > 0 ? VecX(nu + s * dnu) : nu;
        VecX fg(n);
        prog.objective(xt, &fg, nullptr);
        VecX rdt = -t * fg;
        bool dom = true;
        VecX cg;
        for (const auto& c : prog.ineqs) {
          const double g = eval_constraint(c, xt, &cg, nullptr);
          if (!(g < 0.0)) { dom = false; break; }
          for (size_t a = 0; a < c.vars.size(); ++a)
            rdt[c.vars[static_cast<int>(a)]] += cg[static_cast<int>(a)] / (-g);
        }
        if (dom) {
          if (p > 0) rdt += prog.eq_A.transpose() * nut;
          const double rpt = p > 0 ? (prog.eq_A * xt - prog.eq_b).norm() : 0.0;
          const double rest = std::sqrt(rdt.squaredNorm() + rpt * rpt);
          if (rest <= (1.0 - opts.ls_alpha * s) * res0) {
            accepted = true;
            rest_accepted = rest;
            break;
          }
        }
        s *= opts.ls_beta;
        if (s < 1e-13) break;
      }
      if (!accepted) {
        // Escalate the persistent regularization once before giving up; a
        // stalled step with tiny residual counts as converged.
        if (rd <= 10.0 * eps_dual && rp <= 10.0 * eps_pri) return SolveStatus::Optimal;
        stage_reg = (stage_reg == 0.0) ? 1e-10 : stage_reg * 100.0;
        if (++collapses >= 6) return SolveStatus::NumericFailure;
        continue;
      }
      // Accepted steps that no longer move the residual mean the centering
      // has reached its floating-point floor; the final KKT gate decides
      // whether the floor is good enough.
      if (rest_accepted >= res0 * (1.0 - 1e-12)) {
        if (++stalls >= 3) {
          x = xt;
          if (p > 0) nu = nut;
          return SolveStatus::Optimal;
        }
      } else {
        stalls = 0;
      }
      x = xt;
      if (p > 0) nu = nut;
      if (x.lpNorm<Eigen::Infinity>() > 1e14 ||
          prog.objective(x, nullptr, nullptr) > 1e18) {
        unbounded = true;
        return SolveStatus::Optimal;
      }
      if (early_stop && early_stop(x)) {
        stopped_early = true;
        return SolveStatus::Optimal;
      }
    }
    return SolveStatus::MaxIter;
  }

  SolveOutcome run() {
    SolveOutcome out;
    const int n = prog.dim;
    const int p = static_cast<int>(prog.eq_A.rows());
    const int m = static_cast<int>(prog.ineqs.size());
    if (n == 0) {
      out.status = SolveStatus::Optimal;
      out.x = VecX();
      out.objective = 0.0;
      return out;
    }
    VecX x = prog.x0;
    if (x.size() != n) {
      out.message = "x0 dimension mismatch";
      return out;
    }

    // Project onto the affine equality manifold if the start misses it.
    if (p > 0) {
      VecX resid = prog.eq_b - prog.eq_A * x;
      if (resid.lpNorm<Eigen::Infinity>() >
          1e-12 * (1.0 + prog.eq_b.lpNorm<Eigen::Infinity>())) {
        MatX AAt = prog.eq_A * prog.eq_A.transpose();
        AAt.diagonal().array() += 1e-12;
        x += prog.eq_A.transpose() * Eigen::LDLT<MatX>(AAt).solve(resid);
      }
    }

    VecX nu = VecX::Zero(p);
    const double grad_scale = [&] {
      VecX g(n);
      prog.objective(x, &g, nullptr);
      return 1.0 + g.lpNorm<Eigen::Infinity>();
    }();

    double t = opts.t0;
    bool unbounded = false, stopped_early = false;
    SolveStatus stage_status = SolveStatus::Optimal;
    for (int stage = 0; stage < opts.max_stages; ++stage) {
      ++out.barrier_stages;
      stage_status = center(t, x, nu, stage, out.newton_iters, grad_scale,
                            unbounded, stopped_early);
      if (stage_status == SolveStatus::NumericFailure) {
        out.status = SolveStatus::NumericFailure;
        out.x = x;
        out.objective = prog.objective(x, nullptr, nullptr);
        out.message = "Newton failure in stage " + std::to_string(stage);
        return out;
      }
      const double f = prog.objective(x, nullptr, nullptr);
      out.stage_objectives.push_back(f);
      if (unbounded) {
        out.status = SolveStatus::Unbounded;
        out.x = x;
        out.objective = f;
        return out;
      }
      if (stopped_early) break;
      if (m == 0) break; // no barrier: a single Newton solve is exact
      const double gap = static_cast<double>(m) / t;
      if (gap <= opts.tol_gap * (1.0 + std::abs(f))) break;
      t *= opts.mu;
    }

    out.x = x;
    out.objective = prog.objective(x, nullptr, nullptr);
    out.certified_gap = m > 0 ? static_cast<double>(m) / t : 0.0;

    // KKT residuals in the original (maximize) scaling: lambda_i = 1/(t(-g_i)),
    // nu_orig = nu / t, stationarity = ||r_dual|| / t.
    VecX fg(n);
    prog.objective(x, &fg, nullptr);
    VecX r_dual = -t * fg;
    double max_g = -std::numeric_limits<double>::infinity();
    VecX cg;
    for (const auto& c : prog.ineqs) {
      const double g = eval_constraint(c, x, &cg, nullptr);
      max_g = std::max(max_g, g);
      for (size_t a = 0; a < c.vars.size(); ++a)
        r_dual[c.vars[static_cast<int>(a)]] += cg[static_cast<int>(a)] / (-g);
    }
    if (p > 0) r_dual += prog.eq_A.transpose() * nu;
    out.kkt.stationarity = r_dual.norm() / t;
    out.kkt.ineq = m > 0 ? std::max(0.0, max_g) : 0.0;
    out.kkt.eq = p > 0 ? (prog.eq_A * x - prog.eq_b).lpNorm<Eigen::Infinity>() : 0.0;
    out.kkt.gap = out.certified_gap;
    // Optimal is a certificate: it requires the measured residuals to pass,
    // regardless of how the stages terminated.
    const bool kkt_ok =
        out.kkt.stationarity <= 1e-6 * grad_scale &&
        out.kkt.ineq <= opts.tol_feas &&
        out.kkt.eq <= opts.tol_feas *
                          (1.0 + (p > 0 ? prog.eq_b.lpNorm<Eigen::Infinity>() : 0.0));
    out.status = kkt_ok ? SolveStatus::Optimal : SolveStatus::MaxIter;
    return out;
  }
};

// Phase I: minimize s subject to g_i(x) <= s, A x = b, s >= -1. Succeeds as
// soon as an iterate with max_i g_i(x) below -margin is seen.
inline bool phase_one(const SmoothProgram& prog, const SolverOptions& opts,
                      VecX& x, std::string& msg) {
  const int n = prog.dim;
  SmoothProgram ph;
  ph.dim = n + 1;
  ph.affine_objective = true;
  ph.objective = [n](const VecX& y, VecX* g, MatX* h) {
    if (g) { g->setZero(n + 1); (*g)[n] = -1.0; }
    if (h) h->setZero(n + 1, n + 1);
    return -y[n];
  };
  for (const auto& c : prog.ineqs) {
    ConstraintFn cc;
    cc.vars = c.vars;
    cc.vars.push_back(n);
    cc.affine = c.affine;
    cc.eval = [inner = c.eval](const VecX& xs, VecX* g, MatX* h) {
      const int s = static_cast<int>(xs.size()) - 1;
      VecX xin = xs.head(s);
      VecX gi;
      MatX hi;
      const double v = inner(xin, g ? &gi : nullptr, h ? &hi : nullptr);
      if (g) {
        g->resize(s + 1);
        g->head(s) = gi;
        (*g)[s] = -1.0;
      }
      if (h) {
        h->setZero(s + 1, s + 1);
        h->topLeftCorner(s, s) = hi;
      }
      return v - xs[s];
    };
    ph.ineqs.push_back(std::move(cc));
  }
  ph.ineqs.push_back(lower_bound_ineq(n, -1.0));
  if (prog.eq_A.rows() > 0) {
    ph.eq_A = MatX::Zero(prog.eq_A.rows(), n + 1);
    ph.eq_A.leftCols(n) = prog.eq_A;
    ph.eq_b = prog.eq_b;
  }

  SolverOptions pre_opts = opts;
  pre_opts.dump_iterates = false;
  BarrierCore pre(prog, pre_opts);
  double s0 = pre.max_violation(x);
  ph.x0 = VecX(n + 1);
  ph.x0.head(n) = x;
  ph.x0[n] = std::max(0.0, s0) + 1.0;

  SolverOptions popts = opts;
  popts.dump_iterates = false;
  BarrierCore core(ph, popts);
  const double margin = 1e-7;
  core.early_stop = [&](const VecX& y) {
    return pre.max_violation(y.head(n)) <= -margin;
  };
  SolveOutcome res = core.run();
  if (res.status == SolveStatus::NumericFailure) {
    msg = "phase-I numeric failure";
    return false;
  }
  VecX cand = res.x.head(n);
  if (pre.max_violation(cand) < -1e-14) {
    x = cand;
    return true;
  }
  // hand back the max-violation minimizer; callers doing feasibility
  // restoration use it as their next expansion point
  x = cand;
  msg = "phase-I optimum leaves slack positive";
  return false;
}

} // namespace detail

// Solve a smooth concave-maximization program. The initial point must either
// strictly satisfy the inequalities or admit a phase-I repair.
inline SolveOutcome solve(const SmoothProgram& prog, const SolverOptions& opts = {}) {
  detail::BarrierCore probe(prog, SolverOptions{});
  SolveOutcome out;
  if (prog.dim == 0) {
    out.status = SolveStatus::Optimal;
    out.objective = 0.0;
    return out;
  }
  VecX x = prog.x0;
  if (x.size() != prog.dim) {
    out.message = "x0 dimension mismatch";
    return out;
  }
  // Equality projection happens inside the core; strict feasibility is judged
  // after it, so pre-project here for the check.
  if (prog.eq_A.rows() > 0) {
    VecX resid = prog.eq_b - prog.eq_A * x;
    if (resid.lpNorm<Eigen::Infinity>() >
        1e-12 * (1.0 + prog.eq_b.lpNorm<Eigen::Infinity>())) {
      MatX AAt = prog.eq_A * prog.eq_A.transpose();
      AAt.diagonal().array() += 1e-12;
      x += prog.eq_A.transpose() * Eigen::LDLT<MatX>(AAt).solve(resid);
    }
  }
  if (!prog.ineqs.empty() && probe.max_violation(x) >= -1e-12) {
    std::string msg;
    if (!detail::phase_one(prog, opts, x, msg)) {
      out.status = msg.find("numeric") != std::string::npos
                       ? SolveStatus::NumericFailure
                       : SolveStatus::Infeasible;
      out.message = msg;
      out.x = x; // phase-I minimizer: least-max-violation point found
      out.objective = prog.objective(x, nullptr, nullptr);
      return out;
    }
  }
  SmoothProgram started = prog;
  started.x0 = x;
  detail::BarrierCore core(started, opts);
  return core.run();
}

// Linear program  maximize c^T x  s.t.  G x <= h,  A x = b,  lo <= x <= hi.
// Rows and bounds may be empty/infinite; the feasible set must be bounded.
inline SolveOutcome solve_lp(const VecX& costs, const MatX& G, const VecX& h,
                             const MatX& A, const VecX& b, const VecX& lo,
                             const VecX& hi, const SolverOptions& opts = {}) {
  const int n = static_cast<int>(costs.size());
  SmoothProgram prog;
  prog.dim = n;
  prog.affine_objective = true;
  prog.objective = [c = costs](const VecX& x, VecX* g, MatX* hs) {
    if (g) *g = c;
    if (hs) hs->setZero(c.size(), c.size());
    return c.dot(x);
  };
  for (int r = 0; r < G.rows(); ++r) {
    std::vector<int> vars;
    for (int j = 0; j < n; ++j)
      if (G(r, j) != 0.0) vars.push_back(j);
    if (vars.empty()) {
      if (h[r] < 0.0) { // 0 <= h[r] violated: trivially infeasible row
        SolveOutcome out;
        out.status = SolveStatus::Infeasible;
        out.message = "constant row infeasible";
        return out;
      }
      continue;
    }
    VecX coef(static_cast<int>(vars.size()));
    for (size_t j = 0; j < vars.size(); ++j)
      coef[static_cast<int>(j)] = G(r, vars[j]);
    prog.ineqs.push_back(affine_ineq(vars, coef, -h[r]));
  }
  const double inf = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double l = lo.size() ? lo[i] : -inf;
    const double u = hi.size() ? hi[i] : inf;
    const double sc = std::max(1.0, std::isfinite(u) && std::isfinite(l) ? u - l : 1.0);
    if (std::isfinite(l)) prog.ineqs.push_back(lower_bound_ineq(i, l, sc));
    if (std::isfinite(u)) prog.ineqs.push_back(upper_bound_ineq(i, u, sc));
  }
  prog.eq_A = A;
  prog.eq_b = b;
  prog.x0 = VecX::Zero(n);
  for (int i = 0; i < n; ++i) {
    const double l = lo.size() ? lo[i] : -inf;
    const double u = hi.size() ? hi[i] : inf;
    if (std::isfinite(l) && std::isfinite(u)) prog.x0[i] = 0.5 * (l + u);
    else if (std::isfinite(l)) prog.x0[i] = l + 1.0;
    else if (std::isfinite(u)) prog.x0[i] = u - 1.0;
  }
  return solve(prog, opts);
}

} // namespace uavmec

#endif // UAVMEC_SOLVER_HPP
