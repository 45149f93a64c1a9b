#pragma once

// Multiplex-and-forward scheme: each RU compresses its own received signal
// once; the compressed bit streams are routed to the CU as commodity flows
// over the capacitated backhaul.  The quantization covariances, per-RU
// rates, and flows are optimized jointly by alternating between the true
// difference-of-log-det objective and its concave minorant.

#include <algorithm>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "cran/channel.hpp"
#include "cran/common.hpp"
#include "cran/linalg.hpp"
#include "cran/mm.hpp"
#include "cran/solver.hpp"
#include "cran/topology.hpp"

namespace cran {

// I(y_i; y_i + q_i) = log2 det(Omega_i + Sigma_y_i) - log2 det(Omega_i).
inline double mf_compression_rate(const CMat& omega_i, const CMat& sigma_y_i) {
  if (omega_i.rows() != sigma_y_i.rows()) throw ShapeError("mf_compression_rate: size mismatch");
  return log2det(symmetrize(omega_i + sigma_y_i)) - log2det(omega_i);
}

// Sum-rate with quantization noise Omega = blkdiag over the RU order:
// log2 det(H Sigma_x H' + I + Omega) - log2 det(I + Omega).
inline double mf_sum_rate(const std::vector<CMat>& omega_blocks, const ChannelRealization& ch) {
  const CMat omega = block_diag(omega_blocks);
  const CMat sigma_y = received_covariance(ch);
  if (omega.rows() != sigma_y.rows()) throw ShapeError("mf_sum_rate: block sizes do not match H");
  const CMat eye = CMat::Identity(omega.rows(), omega.rows());
  return log2det(symmetrize(sigma_y + omega)) - log2det(symmetrize(eye + omega));
}

inline double mf_sum_rate(const std::map<int, CMat>& omega, const ChannelRealization& ch) {
  std::vector<CMat> blocks;
  for (int id : ch.ru_order) blocks.push_back(omega.at(id));
  return mf_sum_rate(blocks, ch);
}

using FlowMap = std::map<std::pair<int, int>, double>;  // (stream RU id, active edge index)

struct FlowResiduals {
  double outgoing = 0.0;      // f_e^i >= R_i on the stream's outgoing edges
  double cu_inflow = 0.0;     // CU inflow >= R_i
  double capacity = 0.0;      // sum_i f_e^i <= C~_e
  double conservation = 0.0;  // relay inflow >= outflow per stream

  double max_violation() const {
    return std::max(std::max(outgoing, cu_inflow), std::max(capacity, conservation));
  }
};

namespace detail {

inline double flow_at(const FlowMap& flows, int stream, int edge) {
  auto it = flows.find({stream, edge});
  return it == flows.end() ? 0.0 : it->second;
}

inline int single_cu(const Topology& topo) {
  const auto cus = topo.cu_ids();
  if (cus.size() != 1)
    throw UnsupportedInputError("multiplex-and-forward requires exactly one CU");
  return cus.front();
}

// Nodes with a positive-capacity active path to the CU (including the CU).
inline std::set<int> cu_reaching(const ActiveEdgeSet& active, const std::vector<double>& ctilde) {
  const Topology& topo = active.topology();
  std::set<int> reach;
  for (int cu : topo.cu_ids()) reach.insert(cu);
  auto order = topo.topological_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    for (int k : active.gamma_out(*it))
      if (ctilde[k] > 0 && reach.count(active.edge(k).head)) reach.insert(*it);
  }
  return reach;
}

inline std::set<int> forward_reachable(const ActiveEdgeSet& active,
                                       const std::vector<double>& ctilde, int start) {
  std::set<int> out;
  std::vector<int> stack{start};
  while (!stack.empty()) {
    int cur = stack.back();
    stack.pop_back();
    for (int k : active.gamma_out(cur)) {
      if (ctilde[k] <= 0) continue;
      if (out.insert(active.edge(k).head).second) stack.push_back(active.edge(k).head);
    }
  }
  return out;
}

}  // namespace detail

// Evaluates the four flow-constraint families; zero-capacity edges are
// treated as absent from the network.
inline FlowResiduals check_flow_constraints(const FlowMap& flows, const std::map<int, double>& rates,
                                            const ActiveEdgeSet& active,
                                            const std::vector<double>& ctilde) {
  const Topology& topo = active.topology();
  const int cu = detail::single_cu(topo);
  FlowResiduals res;

  for (const auto& [i, r] : rates) {
    for (int k : active.gamma_out(i))
      if (ctilde[k] > 0)
        res.outgoing = std::max(res.outgoing, r - detail::flow_at(flows, i, k));
    double inflow = 0.0;
    for (int k : active.gamma_in(cu))
      if (ctilde[k] > 0) inflow += detail::flow_at(flows, i, k);
    res.cu_inflow = std::max(res.cu_inflow, r - inflow);
  }

  for (int k = 0; k < active.size(); ++k) {
    if (ctilde[k] <= 0) continue;
    double load = 0.0;
    for (const auto& [key, f] : flows)
      if (key.second == k) load += f;
    res.capacity = std::max(res.capacity, load - ctilde[k]);
  }

  for (const Node& n : topo.nodes()) {
    if (n.kind != NodeKind::RU) continue;
    for (const auto& [i, r] : rates) {
      if (i == n.id) continue;
      double in = 0.0, out = 0.0;
      for (int k : active.gamma_in(n.id))
        if (ctilde[k] > 0) in += detail::flow_at(flows, i, k);
      for (int k : active.gamma_out(n.id))
        if (ctilde[k] > 0) out += detail::flow_at(flows, i, k);
      res.conservation = std::max(res.conservation, out - in);
    }
  }
  return res;
}

struct MfSolution {
  std::map<int, CMat> omega;     // per RU
  std::map<int, double> rates;   // R_i
  FlowMap flows;                 // (stream, active edge) -> bits
  double sum_rate = 0.0;
  bool feasible = false;
  MmTrace trace;
};

namespace detail {

// Internal layout of the convex subproblem built at each anchor.
struct MfLayout {
  std::vector<int> active_rus;           // RUs with a positive path to the CU
  std::vector<int> frozen_rus;           // streams forced to zero rate
  std::map<int, int> var_of_ru;          // matrix variable index
  std::map<int, int> rate_scalar;        // scalar index of R_i
  std::vector<std::pair<int, int>> flow_vars;  // (stream, edge)
  std::map<std::pair<int, int>, int> flow_scalar;
  double cap = 0.0;
  int cu = 0;
};

inline MfLayout mf_layout(const ChannelRealization& ch, const ActiveEdgeSet& active,
                          const std::vector<double>& ctilde) {
  MfLayout ly;
  ly.cu = single_cu(active.topology());
  ly.cap = kOmegaCapFactor * std::max(1.0, spectral_norm_bound(received_covariance(ch)));
  const std::set<int> reach = cu_reaching(active, ctilde);
  for (int id : ch.ru_order)
    (reach.count(id) ? ly.active_rus : ly.frozen_rus).push_back(id);
  for (size_t i = 0; i < ly.active_rus.size(); ++i)
    ly.var_of_ru[ly.active_rus[i]] = static_cast<int>(i);
  int s = 0;
  for (int id : ly.active_rus) ly.rate_scalar[id] = s++;
  for (int i : ly.active_rus) {
    const std::set<int> fwd = forward_reachable(active, ctilde, i);
    for (int k = 0; k < active.size(); ++k) {
      if (ctilde[k] <= 0) continue;
      const int tail = active.edge(k).tail;
      if (tail == i || fwd.count(tail)) {
        ly.flow_scalar[{i, k}] = s++;
        ly.flow_vars.emplace_back(i, k);
      }
    }
  }
  return ly;
}

// Feasible flows at given rates: every outgoing edge of the source carries
// the boosted stream; relays forward their inflow (slightly damped) along
// CU-reaching edges and trickle elsewhere so every variable stays positive.
inline FlowMap mf_feasible_flows(const MfLayout& ly, const ActiveEdgeSet& active,
                                 const std::vector<double>& ctilde,
                                 const std::map<int, double>& rates) {
  constexpr double kBoost = 1.05;
  constexpr double kDecay = 1e-4;
  const Topology& topo = active.topology();
  const std::set<int> reach = cu_reaching(active, ctilde);
  FlowMap flows;
  for (int i : ly.active_rus) {
    const double r = rates.at(i);
    std::map<int, double> inflow;
    for (int id : topo.topological_order()) {
      if (topo.node(id).kind == NodeKind::CU) continue;
      double avail = 0.0;
      if (id == i) {
        avail = kBoost * r;
      } else {
        auto it = inflow.find(id);
        if (it == inflow.end() || it->second <= 0) continue;
        avail = it->second;
      }
      std::vector<int> vars, onward;
      for (int k : active.gamma_out(id)) {
        if (!ly.flow_scalar.count({i, k})) continue;
        vars.push_back(k);
        if (reach.count(active.edge(k).head)) onward.push_back(k);
      }
      for (int k : vars) {
        const bool fwd = std::find(onward.begin(), onward.end(), k) != onward.end();
        double f;
        if (id == i) {
          f = avail;  // the source broadcasts the full (boosted) stream
        } else if (fwd) {
          f = avail * (1.0 - kDecay) / onward.size();
        } else {
          f = avail * kDecay / (2.0 * vars.size());
        }
        flows[{i, k}] = f;
        inflow[active.edge(k).head] += f;
      }
    }
  }
  return flows;
}

// Scaled-identity covariance c*I whose compression rate equals the target.
inline double identity_omega_for_rate(double rate, const CMat& sigma_y, double cap) {
  if (rate <= 0) return cap;
  double lo = 1e-12, hi = cap;
  for (int it = 0; it < 200; ++it) {
    const double mid = std::sqrt(lo * hi);
    const int n = static_cast<int>(sigma_y.rows());
    const double r = mf_compression_rate(mid * CMat::Identity(n, n), sigma_y);
    (r > rate ? lo : hi) = mid;
  }
  return std::sqrt(lo * hi);
}

// Greedy per-stream rate allocation: RUs ordered by hop count to the CU
// (closest first, stronger received signal breaking ties) each take as much
// rate as the residual capacity along their flow support allows.
inline std::map<int, double> mf_greedy_rates(const MfLayout& ly, const ActiveEdgeSet& active,
                                             const std::vector<double>& ctilde,
                                             const Topology& topo,
                                             const std::map<int, CMat>& sigma_y) {
  // Hop count to the CU over positive-capacity active edges.
  std::map<int, int> hops;
  hops[ly.cu] = 0;
  const auto order = topo.topological_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int id = *it;
    for (int k : active.gamma_out(id)) {
      if (ctilde[k] <= 0) continue;
      const auto h = hops.find(active.edge(k).head);
      if (h == hops.end()) continue;
      const auto mine = hops.find(id);
      if (mine == hops.end() || mine->second > h->second + 1) hops[id] = h->second + 1;
    }
  }
  std::vector<int> ordered = ly.active_rus;
  std::sort(ordered.begin(), ordered.end(), [&](int a, int b) {
    const int ha = hops.count(a) ? hops.at(a) : 1 << 20;
    const int hb = hops.count(b) ? hops.at(b) : 1 << 20;
    if (ha != hb) return ha < hb;
    const double pa = sigma_y.at(a).trace().real();
    const double pb = sigma_y.at(b).trace().real();
    if (pa != pb) return pa > pb;
    return a < b;
  });

  std::vector<double> remaining(ctilde.size());
  for (size_t k = 0; k < ctilde.size(); ++k) remaining[k] = 0.98 * ctilde[k];
  std::map<int, double> rates;
  for (int id : ly.active_rus) rates[id] = 0.0;
  for (int id : ordered) {
    // Per-edge load of this stream at unit rate; the flow builder is linear
    // in the rate, so one evaluation fixes the whole profile.
    std::map<int, double> probe = rates;
    for (auto& [i, r] : probe) r = (i == id) ? 1.0 : 0.0;
    const FlowMap unit = mf_feasible_flows(ly, active, ctilde, probe);
    double r_max = std::numeric_limits<double>::infinity();
    for (int k = 0; k < active.size(); ++k) {
      const double load = flow_at(unit, id, k);
      if (load <= 0) continue;
      r_max = std::min(r_max, remaining[k] / load);
    }
    if (!std::isfinite(r_max) || r_max <= 0) continue;
    const double r = 0.95 * r_max;
    rates[id] = r;
    for (int k = 0; k < active.size(); ++k) remaining[k] -= r * flow_at(unit, id, k);
  }
  return rates;
}

}  // namespace detail

inline MfSolution optimize_mf(const ChannelRealization& ch, const ActiveEdgeSet& active,
                              const std::vector<double>& ctilde, const MmOptions& opts_in = {}) {
  const Topology& topo = active.topology();
  if (static_cast<int>(ctilde.size()) != active.size())
    throw ShapeError("optimize_mf: capacity list does not match the active edges");
  // The flow polytope makes these subproblems far more ill-conditioned than
  // the matrix-only programs; give the inner solver more headroom.
  MmOptions opts = opts_in;
  opts.solver.max_inner = std::max(opts.solver.max_inner, 1500);
  const detail::MfLayout ly = detail::mf_layout(ch, active, ctilde);

  std::map<int, CMat> sigma_y;
  for (int id : ch.ru_order) sigma_y[id] = received_covariance(ch, id);

  MfSolution sol;
  for (int id : ly.frozen_rus) {
    const int n = topo.node(id).antennas;
    sol.omega[id] = ly.cap * CMat::Identity(n, n);
  }

  if (ly.active_rus.empty()) {
    sol.sum_rate = mf_sum_rate(sol.omega, ch);
    sol.feasible = true;
    sol.trace.objective.push_back(sol.sum_rate);
    return sol;
  }

  // ---- scaled-identity feasible initialization ----------------------------
  auto rates_at = [&](double c) {
    std::map<int, double> rates;
    for (int id : ly.active_rus) {
      const int n = topo.node(id).antennas;
      rates[id] = mf_compression_rate(c * CMat::Identity(n, n), sigma_y.at(id)) * (1.0 + 1e-3) +
                  1e-9;
    }
    return rates;
  };
  auto feasible_at = [&](double c) {
    const auto rates = rates_at(c);
    const FlowMap flows = detail::mf_feasible_flows(ly, active, ctilde, rates);
    for (int k = 0; k < active.size(); ++k) {
      if (ctilde[k] <= 0) continue;
      double load = 0.0;
      for (int i : ly.active_rus) load += detail::flow_at(flows, i, k);
      if (load > 0.99 * ctilde[k]) return false;
    }
    return true;
  };
  double c_hi = 1.0;
  bool found = feasible_at(c_hi);
  for (int it = 0; !found && it < 60; ++it) {
    c_hi *= 2.0;
    found = feasible_at(c_hi);
  }
  if (!found || c_hi >= ly.cap) {
    sol.trace.termination = Termination::kInfeasible;
    sol.sum_rate = 0.0;
    return sol;
  }
  double c_lo = c_hi / 2.0;
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (c_lo + c_hi);
    (feasible_at(mid) ? c_hi : c_lo) = mid;
  }
  const double c0 = c_hi;

  auto full_omega = [&](const std::map<int, CMat>& act) {
    std::map<int, CMat> all = sol.omega;
    for (const auto& [id, m] : act) all[id] = m;
    return all;
  };

  const CMat sigma_y_full = received_covariance(ch);
  const int n_total = static_cast<int>(sigma_y_full.rows());

  // Row offset of each RU block inside the stacked observation.
  std::map<int, int> row_of;
  {
    int r = 0;
    for (int id : ch.ru_order) {
      row_of[id] = r;
      r += topo.node(id).antennas;
    }
  }

  struct MfRun {
    double best = -std::numeric_limits<double>::infinity();
    std::map<int, CMat> omega;
    std::map<int, double> rates;
    FlowMap flows;
    MmTrace trace;
  };

  auto run_mm = [&](std::map<int, CMat> anchor, std::map<int, double> rates,
                    FlowMap flows) -> MfRun {
    MfRun run;
    run.best = mf_sum_rate(full_omega(anchor), ch);
    run.trace.objective.push_back(run.best);
    run.omega = anchor;
    run.rates = rates;
    run.flows = flows;

  for (int outer = 0; outer < opts.max_outer; ++outer) {
    LogDetProgram prog;
    for (int id : ly.active_rus)
      prog.matrix_vars.push_back({topo.node(id).antennas, ly.cap});
    prog.num_scalars = static_cast<int>(ly.active_rus.size() + ly.flow_vars.size());

    // Objective: log2det(Sigma_y + Omega) minus the tangent of
    // log2det(I + Omega) at the anchor.
    ConcaveTerm obj;
    obj.weight = 1.0;
    obj.expr.base = sigma_y_full;
    for (int id : ly.frozen_rus) {
      const int n = topo.node(id).antennas;
      obj.expr.base.block(row_of[id], row_of[id], n, n) += ly.cap * CMat::Identity(n, n);
    }
    CMat eye_omega0 = CMat::Identity(n_total, n_total);
    for (int id : ly.active_rus) {
      const int n = topo.node(id).antennas;
      CMat sel = CMat::Zero(n_total, n);
      sel.block(row_of[id], 0, n, n) = CMat::Identity(n, n);
      obj.expr.terms.push_back({ly.var_of_ru.at(id), sel});
      eye_omega0.block(row_of[id], row_of[id], n, n) += anchor[id];
    }
    for (int id : ly.frozen_rus) {
      const int n = topo.node(id).antennas;
      eye_omega0.block(row_of[id], row_of[id], n, n) += ly.cap * CMat::Identity(n, n);
    }
    prog.objective_concave.push_back(std::move(obj));
    prog.objective_linear.constant = -log2det(eye_omega0);
    for (int id : ly.active_rus) {
      const int n = topo.node(id).antennas;
      const CMat blk = eye_omega0.block(row_of[id], row_of[id], n, n);
      Eigen::LDLT<CMat> ldlt(blk);
      const CMat inv = ldlt.solve(CMat::Identity(n, n));
      prog.objective_linear.matrix_coeffs.emplace_back(ly.var_of_ru.at(id), CMat(-inv / kLn2));
      prog.objective_linear.constant += (inv * anchor[id]).trace().real() / kLn2;
    }

    // Compression-rate constraints: tangent of log2det(Omega_i + Sigma_y_i)
    // at the anchor, minus log2det(Omega_i), at most R_i.
    for (int id : ly.active_rus) {
      Inequality c;
      c.label = "rate " + std::to_string(id);
      const int n = topo.node(id).antennas;
      const CMat y0 = symmetrize(anchor[id] + sigma_y.at(id));
      Eigen::LDLT<CMat> ldlt(y0);
      const CMat inv = ldlt.solve(CMat::Identity(n, n));
      c.linear.matrix_coeffs.emplace_back(ly.var_of_ru.at(id), CMat(inv / kLn2));
      c.linear.constant = log2det(y0) + ((inv * (sigma_y.at(id) - y0)).trace().real()) / kLn2;
      c.linear.scalar_coeffs.emplace_back(ly.rate_scalar.at(id), -1.0);
      ConcaveTerm t;
      t.expr.base = CMat::Zero(n, n);
      t.expr.terms.push_back({ly.var_of_ru.at(id), CMat::Identity(n, n)});
      c.concave.push_back(std::move(t));
      c.bound = 0.0;
      prog.constraints.push_back(std::move(c));
    }

    // Flow constraints.
    for (int i : ly.active_rus) {
      for (int k : active.gamma_out(i)) {
        auto it = ly.flow_scalar.find({i, k});
        if (it == ly.flow_scalar.end()) continue;
        Inequality c;
        c.label = "outgoing";
        c.linear.scalar_coeffs.emplace_back(ly.rate_scalar.at(i), 1.0);
        c.linear.scalar_coeffs.emplace_back(it->second, -1.0);
        prog.constraints.push_back(std::move(c));
      }
      Inequality c4;
      c4.label = "cu-inflow";
      c4.linear.scalar_coeffs.emplace_back(ly.rate_scalar.at(i), 1.0);
      for (int k : active.gamma_in(ly.cu)) {
        auto it = ly.flow_scalar.find({i, k});
        if (it != ly.flow_scalar.end()) c4.linear.scalar_coeffs.emplace_back(it->second, -1.0);
      }
      prog.constraints.push_back(std::move(c4));
    }
    for (int k = 0; k < active.size(); ++k) {
      if (ctilde[k] <= 0) continue;
      Inequality c;
      c.label = "capacity";
      for (int i : ly.active_rus) {
        auto it = ly.flow_scalar.find({i, k});
        if (it != ly.flow_scalar.end()) c.linear.scalar_coeffs.emplace_back(it->second, 1.0);
      }
      if (c.linear.scalar_coeffs.empty()) continue;
      c.bound = ctilde[k];
      prog.constraints.push_back(std::move(c));
    }
    for (const Node& n : topo.nodes()) {
      if (n.kind != NodeKind::RU) continue;
      for (int i : ly.active_rus) {
        if (i == n.id) continue;
        Inequality c;
        c.label = "conservation";
        for (int k : active.gamma_out(n.id)) {
          auto it = ly.flow_scalar.find({i, k});
          if (it != ly.flow_scalar.end()) c.linear.scalar_coeffs.emplace_back(it->second, 1.0);
        }
        if (c.linear.scalar_coeffs.empty()) continue;
        for (int k : active.gamma_in(n.id)) {
          auto it = ly.flow_scalar.find({i, k});
          if (it != ly.flow_scalar.end()) c.linear.scalar_coeffs.emplace_back(it->second, -1.0);
        }
        prog.constraints.push_back(std::move(c));
      }
    }

    // Warm start from the current anchor state.
    SolverPoint warm;
    for (int id : ly.active_rus) warm.x.push_back(anchor[id]);
    warm.s = RVec::Zero(prog.num_scalars);
    for (int id : ly.active_rus) warm.s(ly.rate_scalar.at(id)) = rates.at(id);
    for (const auto& [key, idx] : ly.flow_scalar) warm.s(idx) = std::max(flows[key], 1e-12);

    SolverReport rep = solve(prog, warm, opts.solver);
    run.trace.outer_iters = outer + 1;
    if (rep.termination == Termination::kInfeasible) {
      // A failed re-solve after the first outer iteration leaves the best
      // feasible iterate in place; only an unsolvable first subproblem
      // renders the whole run infeasible.
      if (outer == 0) run.trace.termination = Termination::kInfeasible;
      break;
    }
    // The minorizer touches the true objective at the anchor, so a solve
    // that fails to improve its own subproblem cannot have improved the
    // true objective either; stop instead of chasing solver noise.
#ifdef CRAN_MF_DEBUG
    std::fprintf(stderr, "[mf]   outer=%d rep.term=%d rep.obj=%.6f warm.obj=%.6f\n", outer,
                 (int)rep.termination, rep.objective,
                 LogDetSolver(prog, opts.solver).objective_value(warm));
#endif
    if (rep.objective <= LogDetSolver(prog, opts.solver).objective_value(warm) + 1e-9) break;

    std::map<int, CMat> next;
    for (int id : ly.active_rus) next[id] = rep.point.x[ly.var_of_ru.at(id)];
    const double value = mf_sum_rate(full_omega(next), ch);
    run.trace.objective.push_back(value);
    if (value < run.best - 1e-7) {
      run.trace.monotone = false;
      break;  // keep the previous anchor
    }
    const double gain = value - run.best;
    run.best = std::max(run.best, value);
    run.omega = next;
    for (int id : ly.active_rus) run.rates[id] = rep.point.s(ly.rate_scalar.at(id));
    for (const auto& [key, idx] : ly.flow_scalar) run.flows[key] = rep.point.s(idx);
    anchor = next;
    rates = run.rates;
    flows = run.flows;
    if (gain < opts.rate_tol) break;
  }
    return run;
  };

  // Start 1: uniform scaled identity at the feasibility bisection point.
  std::vector<std::pair<std::map<int, CMat>, std::map<int, double>>> starts;
  {
    std::map<int, CMat> anchor;
    for (int id : ly.active_rus) {
      const int n = topo.node(id).antennas;
      anchor[id] = c0 * CMat::Identity(n, n);
    }
    starts.emplace_back(std::move(anchor), rates_at(c0));
  }
  // Start 2: greedy allocation in ascending path-length order, so that RUs
  // close to the CU take the shared budget first.  Helps in the
  // capacity-starved regime where spreading the budget is wasteful.
  {
    const auto greedy = detail::mf_greedy_rates(ly, active, ctilde, topo, sigma_y);
    if (!greedy.empty()) {
      std::map<int, CMat> anchor;
      std::map<int, double> rates;
      for (int id : ly.active_rus) {
        const int n = topo.node(id).antennas;
        const double r = greedy.at(id);
        anchor[id] = detail::identity_omega_for_rate(r / (1.0 + 2e-3), sigma_y.at(id), ly.cap) *
                     CMat::Identity(n, n);
        rates[id] = std::max(r, mf_compression_rate(anchor[id], sigma_y.at(id)) * (1.0 + 1e-3) +
                                    1e-9);
      }
      starts.emplace_back(std::move(anchor), std::move(rates));
    }
  }

  MfRun best_run;
  bool have = false;
  for (auto& [anchor, rates] : starts) {
    FlowMap flows = detail::mf_feasible_flows(ly, active, ctilde, rates);
    // Skip a start whose initial flows overload an edge.
    bool fits = true;
    for (int k = 0; fits && k < active.size(); ++k) {
      if (ctilde[k] <= 0) continue;
      double load = 0.0;
      for (int i : ly.active_rus) load += detail::flow_at(flows, i, k);
      fits = load <= 0.999 * ctilde[k];
    }
    if (!fits && have) continue;
    MfRun run = run_mm(anchor, rates, flows);
#ifdef CRAN_MF_DEBUG
    std::fprintf(stderr, "[mf] start fits=%d init=%.4f final=%.4f outers=%d term=%d mono=%d\n",
                 (int)fits, run.trace.objective.front(), run.best, run.trace.outer_iters,
                 (int)run.trace.termination, (int)run.trace.monotone);
#endif
    if (run.trace.termination == Termination::kInfeasible && have) continue;
    if (!have || run.best > best_run.best) {
      best_run = std::move(run);
      have = true;
    }
  }
  sol.trace = best_run.trace;

  for (const auto& [id, m] : best_run.omega) sol.omega[id] = m;
  sol.rates = best_run.rates;
  for (int id : ly.frozen_rus) sol.rates[id] = 0.0;
  sol.flows = best_run.flows;
  sol.sum_rate = best_run.best;

  const FlowResiduals res = check_flow_constraints(sol.flows, best_run.rates, active, ctilde);
  bool rates_ok = true;
  for (int id : ly.active_rus)
    rates_ok = rates_ok &&
               mf_compression_rate(sol.omega[id], sigma_y.at(id)) <= sol.rates[id] + 1e-6;
  sol.feasible = rates_ok && res.max_violation() <= 1e-6 &&
                 sol.trace.termination != Termination::kInfeasible;
  return sol;
}

}  // namespace cran
