#pragma once

// Generic solver for the convexified subproblems produced by the MM
// iterations: maximize a sum of concave log-det terms plus a linear
// functional over Hermitian PSD matrix variables and nonnegative scalars,
// subject to constraints of the form
//   linear(x) - sum w_i log2 det(base_i + sum_k M X M') <= bound.
//
// Method: log-barrier interior point.  The barrier subproblems are solved
// by L-BFGS over a real parameterization of the Hermitian variables; PSD
// and eigenvalue-cap conditions enter as domain barriers.  Everything is
// deterministic: fixed schedules, no randomized restarts.

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cran/common.hpp"
#include "cran/linalg.hpp"

namespace cran {

struct MatrixVariable {
  int dim = 0;
  double cap = 1e7;  // eigenvalue upper bound; "discard this dimension"
};

struct CongruenceTerm {
  int var = 0;
  CMat map;  // contributes map * X_var * map'
};

struct LogDetExpr {
  CMat base;  // Hermitian PSD
  std::vector<CongruenceTerm> terms;
};

struct ConcaveTerm {
  double weight = 1.0;  // > 0
  LogDetExpr expr;
};

struct LinearExpr {
  std::vector<std::pair<int, CMat>> matrix_coeffs;  // Re tr(P_k X_k), P Hermitian
  std::vector<std::pair<int, double>> scalar_coeffs;
  double constant = 0.0;
};

// linear(x) - sum_i w_i log2det(...) <= bound
struct Inequality {
  LinearExpr linear;
  std::vector<ConcaveTerm> concave;
  double bound = 0.0;
  std::string label;
};

struct LogDetProgram {
  std::vector<MatrixVariable> matrix_vars;
  int num_scalars = 0;
  std::vector<ConcaveTerm> objective_concave;  // maximize sum w log2det + linear
  LinearExpr objective_linear;
  std::vector<Inequality> constraints;
};

struct SolverPoint {
  std::vector<CMat> x;
  RVec s;
};

enum class Termination { kConverged, kMaxIter, kInfeasible };

struct SolverReport {
  SolverPoint point;
  double objective = 0.0;      // bits
  double max_violation = 0.0;  // over all inequality constraints
  int iterations = 0;
  Termination termination = Termination::kConverged;
};

struct SolverOptions {
  double feasibility_tol = 1e-6;
  double barrier_mu = 10.0;
  double barrier_t0 = 1.0;
  double gap_target = 2e-8;  // barrier term count / t, in nats
  int max_inner = 200;
  int lbfgs_memory = 8;
};

namespace detail {

// Real parameterization of the variables: per matrix, diagonal entries
// then (Re, Im) pairs for the upper triangle; scalars appended.
class Packing {
 public:
  explicit Packing(const LogDetProgram& prog) {
    offset_.reserve(prog.matrix_vars.size());
    int off = 0;
    for (const auto& v : prog.matrix_vars) {
      offset_.push_back(off);
      off += v.dim * v.dim;  // n diag + 2 * n(n-1)/2 off-diagonal reals
    }
    scalar_offset_ = off;
    total_ = off + prog.num_scalars;
  }

  int size() const { return total_; }
  int scalar_offset() const { return scalar_offset_; }

  void pack(const SolverPoint& p, RVec& v, const LogDetProgram& prog) const {
    v.resize(total_);
    for (size_t k = 0; k < prog.matrix_vars.size(); ++k) {
      const CMat& x = p.x[k];
      const int n = prog.matrix_vars[k].dim;
      int idx = offset_[k];
      for (int i = 0; i < n; ++i) v(idx++) = x(i, i).real();
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
          v(idx++) = x(i, j).real();
          v(idx++) = x(i, j).imag();
        }
    }
    for (int i = 0; i < prog.num_scalars; ++i) v(scalar_offset_ + i) = p.s(i);
  }

  void unpack(const RVec& v, SolverPoint& p, const LogDetProgram& prog) const {
    p.x.resize(prog.matrix_vars.size());
    for (size_t k = 0; k < prog.matrix_vars.size(); ++k) {
      const int n = prog.matrix_vars[k].dim;
      CMat x(n, n);
      int idx = offset_[k];
      for (int i = 0; i < n; ++i) x(i, i) = v(idx++);
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
          const double re = v(idx++);
          const double im = v(idx++);
          x(i, j) = cxd(re, im);
          x(j, i) = cxd(re, -im);
        }
      p.x[k] = std::move(x);
    }
    p.s.resize(prog.num_scalars);
    for (int i = 0; i < prog.num_scalars; ++i) p.s(i) = v(scalar_offset_ + i);
  }

  // Accumulate a Hermitian matrix gradient into the packed gradient.
  void add_matrix_grad(int k, const CMat& g, double scale, RVec& grad,
                       const LogDetProgram& prog) const {
    const int n = prog.matrix_vars[k].dim;
    int idx = offset_[k];
    for (int i = 0; i < n; ++i) grad(idx++) += scale * g(i, i).real();
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        grad(idx++) += scale * 2.0 * g(i, j).real();
        grad(idx++) += scale * 2.0 * g(i, j).imag();
      }
  }

 private:
  std::vector<int> offset_;
  int scalar_offset_ = 0;
  int total_ = 0;
};

struct LogDetEval {
  double log2det = 0.0;
  CMat inverse;  // of the assembled argument
  bool ok = false;
};

inline CMat assemble(const LogDetExpr& expr, const SolverPoint& p) {
  CMat s = expr.base;
  for (const auto& term : expr.terms) s += term.map * p.x[term.var] * term.map.adjoint();
  return symmetrize(s);
}

inline LogDetEval eval_logdet(const LogDetExpr& expr, const SolverPoint& p) {
  LogDetEval out;
  const CMat s = assemble(expr, p);
  if (s.rows() == 0) {
    out.ok = true;
    out.inverse = s;
    return out;
  }
  Eigen::LLT<CMat> llt(s);
  if (llt.info() != Eigen::Success) return out;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double d = llt.matrixL()(i, i).real();
    if (!(d > 0)) return out;
    acc += std::log2(d);
  }
  out.log2det = 2.0 * acc;
  out.inverse = llt.solve(CMat::Identity(s.rows(), s.rows()));
  out.ok = true;
  return out;
}

inline double eval_linear(const LinearExpr& lin, const SolverPoint& p) {
  double v = lin.constant;
  for (const auto& [k, coeff] : lin.matrix_coeffs) v += (coeff.adjoint() * p.x[k]).trace().real();
  for (const auto& [i, c] : lin.scalar_coeffs) v += c * p.s(i);
  return v;
}

}  // namespace detail

class LogDetSolver {
 public:
  explicit LogDetSolver(const LogDetProgram& prog, SolverOptions opts = {})
      : prog_(prog), opts_(opts), packing_(prog) {}

  // Value of a constraint's left-hand side (bits).
  double constraint_value(const Inequality& c, const SolverPoint& p) const {
    double v = detail::eval_linear(c.linear, p);
    for (const auto& term : c.concave) {
      auto e = detail::eval_logdet(term.expr, p);
      if (!e.ok) return std::numeric_limits<double>::infinity();
      v -= term.weight * e.log2det;
    }
    return v;
  }

  double objective_value(const SolverPoint& p) const {
    double v = detail::eval_linear(prog_.objective_linear, p);
    for (const auto& term : prog_.objective_concave) {
      auto e = detail::eval_logdet(term.expr, p);
      if (!e.ok) return -std::numeric_limits<double>::infinity();
      v += term.weight * e.log2det;
    }
    return v;
  }

  double max_violation(const SolverPoint& p) const {
    double v = 0.0;
    for (const auto& c : prog_.constraints)
      v = std::max(v, constraint_value(c, p) - c.bound);
    for (size_t k = 0; k < prog_.matrix_vars.size(); ++k) {
      Eigen::SelfAdjointEigenSolver<CMat> es(symmetrize(p.x[k]), Eigen::EigenvaluesOnly);
      if (p.x[k].rows() > 0) v = std::max(v, -es.eigenvalues()(0));
    }
    for (int i = 0; i < prog_.num_scalars; ++i) v = std::max(v, -p.s(i));
    return v;
  }

  // Interior-point solve.  If the warm start is absent or not strictly
  // feasible it is first repaired by a phase-1 pass.
  SolverReport solve(std::optional<SolverPoint> warm = std::nullopt) {
    SolverReport report;
    SolverPoint start = default_point();
    if (warm) start = clip_to_domain(*warm);

    if (!strictly_feasible(start)) {
      auto phase1 = run_phase1(start);
      if (!phase1) {
        report.termination = Termination::kInfeasible;
        report.point = start;
        report.objective = objective_value(start);
        report.max_violation = max_violation(start);
        return report;
      }
      start = *phase1;
    }

    return run_barrier(start);
  }

  SolverPoint default_point() const {
    SolverPoint p;
    for (const auto& v : prog_.matrix_vars)
      p.x.push_back(std::min(1.0, v.cap / 2) * CMat::Identity(v.dim, v.dim));
    p.s = RVec::Ones(prog_.num_scalars);
    return p;
  }

 private:
  static constexpr double kDomainMargin = 1e-10;

  SolverPoint clip_to_domain(const SolverPoint& p) const {
    SolverPoint out = p;
    out.x.resize(prog_.matrix_vars.size());
    for (size_t k = 0; k < prog_.matrix_vars.size(); ++k) {
      const auto& v = prog_.matrix_vars[k];
      CMat x = (k < p.x.size() && p.x[k].rows() == v.dim)
                   ? symmetrize(p.x[k])
                   : CMat(std::min(1.0, v.cap / 2) * CMat::Identity(v.dim, v.dim));
      EigDecomposition ed = eig_hermitian_desc(x);
      RVec lam = ed.eigenvalues;
      const double lo = kDomainMargin * std::max(1.0, lam.size() ? lam(0) : 1.0);
      const double hi = v.cap * (1.0 - 1e-9);
      for (Eigen::Index i = 0; i < lam.size(); ++i) lam(i) = std::clamp(lam(i), lo, hi);
      out.x[k] = ed.eigenvectors * lam.asDiagonal() * ed.eigenvectors.adjoint();
    }
    if (out.s.size() != prog_.num_scalars) out.s = RVec::Ones(prog_.num_scalars);
    for (int i = 0; i < prog_.num_scalars; ++i) out.s(i) = std::max(out.s(i), 1e-12);
    return out;
  }

  bool strictly_feasible(const SolverPoint& p) const {
    for (const auto& c : prog_.constraints) {
      const double slack = c.bound - constraint_value(c, p);
      if (!(slack > 1e-9 * std::max(1.0, std::abs(c.bound)))) return false;
    }
    return true;
  }

  // ---- barrier machinery -------------------------------------------------

  struct BarrierEval {
    double value = std::numeric_limits<double>::infinity();  // minimized
    RVec grad;
    bool ok = false;
  };

  // f(v) = -( t * objective_bits + barrier ), barrier in nats.
  BarrierEval eval_barrier(const RVec& v, double t) const {
    BarrierEval out;
    SolverPoint p;
    packing_.unpack(v, p, prog_);
    RVec grad = RVec::Zero(packing_.size());

    double phi = 0.0;  // maximized quantity

    // Objective.
    phi += t * detail::eval_linear(prog_.objective_linear, p);
    for (const auto& [k, coeff] : prog_.objective_linear.matrix_coeffs)
      packing_.add_matrix_grad(k, coeff, -t, grad, prog_);
    for (const auto& [i, c] : prog_.objective_linear.scalar_coeffs)
      grad(packing_.scalar_offset() + i) -= t * c;
    for (const auto& term : prog_.objective_concave) {
      auto e = detail::eval_logdet(term.expr, p);
      if (!e.ok) return out;
      phi += t * term.weight * e.log2det;
      for (const auto& ct : term.expr.terms) {
        const CMat g = (ct.map.adjoint() * e.inverse * ct.map) / kLn2;
        packing_.add_matrix_grad(ct.var, g, -t * term.weight, grad, prog_);
      }
    }

    // Inequality barriers.
    for (const auto& c : prog_.constraints) {
      double val = detail::eval_linear(c.linear, p);
      std::vector<std::pair<const ConcaveTerm*, detail::LogDetEval>> evals;
      for (const auto& term : c.concave) {
        auto e = detail::eval_logdet(term.expr, p);
        if (!e.ok) return out;
        val -= term.weight * e.log2det;
        evals.emplace_back(&term, std::move(e));
      }
      const double slack = c.bound - val;
      if (!(slack > 0)) return out;
      phi += std::log(slack);
      const double w = 1.0 / slack;  // d/dx of log(slack) = -(1/slack) dval/dx
      for (const auto& [k, coeff] : c.linear.matrix_coeffs)
        packing_.add_matrix_grad(k, coeff, w, grad, prog_);
      for (const auto& [i, cc] : c.linear.scalar_coeffs)
        grad(packing_.scalar_offset() + i) += w * cc;
      for (auto& [term, e] : evals) {
        for (const auto& ct : term->expr.terms) {
          const CMat g = (ct.map.adjoint() * e.inverse * ct.map) / kLn2;
          packing_.add_matrix_grad(ct.var, g, -w * term->weight, grad, prog_);
        }
      }
    }

    // Domain barriers: 0 < X < cap I, s > 0.
    for (size_t k = 0; k < prog_.matrix_vars.size(); ++k) {
      const auto& var = prog_.matrix_vars[k];
      if (var.dim == 0) continue;
      Eigen::LLT<CMat> llt_lo(p.x[k]);
      if (llt_lo.info() != Eigen::Success) return out;
      CMat cap_slack = var.cap * CMat::Identity(var.dim, var.dim) - p.x[k];
      Eigen::LLT<CMat> llt_hi(cap_slack);
      if (llt_hi.info() != Eigen::Success) return out;
      double ld_lo = 0.0, ld_hi = 0.0;
      for (int i = 0; i < var.dim; ++i) {
        const double a = llt_lo.matrixL()(i, i).real();
        const double b = llt_hi.matrixL()(i, i).real();
        if (!(a > 0) || !(b > 0)) return out;
        ld_lo += std::log(a);
        ld_hi += std::log(b);
      }
      phi += 2.0 * (ld_lo + ld_hi);
      const CMat inv_lo = llt_lo.solve(CMat::Identity(var.dim, var.dim));
      const CMat inv_hi = llt_hi.solve(CMat::Identity(var.dim, var.dim));
      packing_.add_matrix_grad(static_cast<int>(k), inv_lo, -1.0, grad, prog_);
      packing_.add_matrix_grad(static_cast<int>(k), inv_hi, 1.0, grad, prog_);
    }
    for (int i = 0; i < prog_.num_scalars; ++i) {
      if (!(p.s(i) > 0)) return out;
      phi += std::log(p.s(i));
      grad(packing_.scalar_offset() + i) -= 1.0 / p.s(i);
    }

    out.value = -phi;
    out.grad = std::move(grad);
    out.ok = true;
    return out;
  }

  // L-BFGS on the barrier subproblem at fixed t.  Returns iterations used.
  int minimize_barrier(RVec& v, double t) {
    const int m = opts_.lbfgs_memory;
    std::vector<RVec> s_hist, y_hist;
    std::vector<double> rho_hist;
    BarrierEval cur = eval_barrier(v, t);
    if (!cur.ok) return 0;
    int iter = 0;
    for (; iter < opts_.max_inner; ++iter) {
      const double gnorm = cur.grad.norm();
      if (gnorm <= 1e-8 * std::max(1.0, t)) break;

      // Two-loop recursion.
      RVec q = cur.grad;
      const int hlen = static_cast<int>(s_hist.size());
      std::vector<double> alpha(hlen);
      for (int i = hlen - 1; i >= 0; --i) {
        alpha[i] = rho_hist[i] * s_hist[i].dot(q);
        q -= alpha[i] * y_hist[i];
      }
      if (hlen > 0) {
        const double gamma =
            s_hist.back().dot(y_hist.back()) / std::max(y_hist.back().squaredNorm(), 1e-300);
        q *= gamma;
      }
      for (int i = 0; i < hlen; ++i) {
        const double beta = rho_hist[i] * y_hist[i].dot(q);
        q += (alpha[i] - beta) * s_hist[i];
      }
      RVec dir = -q;
      double slope = cur.grad.dot(dir);
      if (!(slope < 0)) {
        dir = -cur.grad;
        slope = -cur.grad.squaredNorm();
        s_hist.clear();
        y_hist.clear();
        rho_hist.clear();
      }

      // Backtracking Armijo line search; domain violations shrink the step.
      double step = 1.0;
      BarrierEval next;
      bool accepted = false;
      for (int ls = 0; ls < 60; ++ls) {
        RVec cand = v + step * dir;
        next = eval_barrier(cand, t);
        if (next.ok && next.value <= cur.value + 1e-4 * step * slope) {
          const RVec sv = step * dir;
          const RVec yv = next.grad - cur.grad;
          const double sy = sv.dot(yv);
          if (sy > 1e-12 * sv.norm() * yv.norm()) {
            s_hist.push_back(sv);
            y_hist.push_back(yv);
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > m) {
              s_hist.erase(s_hist.begin());
              y_hist.erase(y_hist.begin());
              rho_hist.erase(rho_hist.begin());
            }
          }
          v = std::move(cand);
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;
      const double improvement = cur.value - next.value;
      cur = std::move(next);
      if (improvement <= 1e-13 * (1.0 + std::abs(cur.value))) break;
    }
    return iter;
  }

  int barrier_term_count() const {
    int m = static_cast<int>(prog_.constraints.size()) + prog_.num_scalars;
    for (const auto& v : prog_.matrix_vars) m += 2 * v.dim;
    return m;
  }

  SolverReport run_barrier(const SolverPoint& start) {
    SolverReport report;
    RVec v;
    packing_.pack(start, v, prog_);
    const int m = std::max(1, barrier_term_count());
    double t = opts_.barrier_t0;
    int total_iters = 0;
    bool hit_max = false;
    while (true) {
      int used = minimize_barrier(v, t);
      total_iters += used;
      hit_max = hit_max || used >= opts_.max_inner;
      if (static_cast<double>(m) / t <= opts_.gap_target) break;
      t *= opts_.barrier_mu;
    }
    packing_.unpack(v, report.point, prog_);
    for (auto& x : report.point.x) x = symmetrize(x);
    report.objective = objective_value(report.point);
    report.max_violation = max_violation(report.point);
    report.iterations = total_iters;
    report.termination = hit_max ? Termination::kMaxIter : Termination::kConverged;
    if (report.max_violation > opts_.feasibility_tol) report.termination = Termination::kMaxIter;
    return report;
  }

  // Phase 1: minimize an auxiliary slack tau so every constraint holds
  // strictly; h_j(x) - tau' <= b_j - shift with tau' >= 0.
  std::optional<SolverPoint> run_phase1(const SolverPoint& start) {
    LogDetProgram aux = prog_;
    const int tau = aux.num_scalars;
    aux.num_scalars += 1;

    double worst = 0.0;
    for (const auto& c : prog_.constraints)
      worst = std::max(worst, constraint_value(c, start) - c.bound);
    if (!std::isfinite(worst)) worst = 1.0;
    const double shift = worst + 1.0;

    for (auto& c : aux.constraints) {
      c.linear.scalar_coeffs.emplace_back(tau, -1.0);
      c.bound -= shift;
    }
    aux.objective_concave.clear();
    aux.objective_linear = LinearExpr{};
    aux.objective_linear.scalar_coeffs.emplace_back(tau, -1.0);

    LogDetSolver aux_solver(aux, opts_);
    SolverPoint p = start;
    p.s.conservativeResize(prog_.num_scalars + 1);
    p.s(tau) = shift + 1.0;

    RVec v;
    aux_solver.packing_.pack(p, v, aux);
    double t = 1.0;
    for (int stage = 0; stage < 14; ++stage) {
      aux_solver.minimize_barrier(v, t);
      SolverPoint cand;
      aux_solver.packing_.unpack(v, cand, aux);
      SolverPoint trial;
      trial.x = cand.x;
      trial.s = cand.s.head(prog_.num_scalars);
      if (strictly_feasible(trial)) return trial;
      t *= opts_.barrier_mu;
    }
    return std::nullopt;
  }

  const LogDetProgram& prog_;
  SolverOptions opts_;
  detail::Packing packing_;
};

inline SolverReport solve(const LogDetProgram& prog, std::optional<SolverPoint> warm = std::nullopt,
                          SolverOptions opts = {}) {
  LogDetSolver solver(prog, opts);
  return solver.solve(std::move(warm));
}

}  // namespace cran
