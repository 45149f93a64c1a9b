#pragma once

// Centralized decompress-process-and-recompress scheme: every relay
// decompresses its incoming streams, linearly combines them with its own
// observation, and recompresses per outgoing edge.  Provides the sum-rate
// and backhaul-rate evaluators, the identity-processor reduction, the
// covariance optimization (full-rank and rank-limited), the scaled-identity
// baseline, and the two-CU extension with compressed CU exchange.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "cran/channel.hpp"
#include "cran/common.hpp"
#include "cran/linalg.hpp"
#include "cran/mm.hpp"
#include "cran/signal_flow.hpp"
#include "cran/solver.hpp"
#include "cran/topology.hpp"

namespace cran {

constexpr double kDprRegularization = 1e-12;  // added inside both log-dets

// Edge dimensions implied by the processors themselves (d_e = rows of L_e).
inline SignalDimensions processor_dimensions(const ActiveEdgeSet& active,
                                             const std::vector<CMat>& processors) {
  if (static_cast<int>(processors.size()) != active.size())
    throw ShapeError("processor_dimensions: processor count mismatch");
  const Topology& topo = active.topology();
  SignalDimensions out;
  out.edge_dim.assign(active.size(), 0);
  for (int id : topo.topological_order()) {
    int d = topo.node(id).antennas;
    for (int k : active.gamma_in(id)) d += out.edge_dim[k];
    out.node_dim[id] = d;
    for (int k : active.gamma_out(id)) {
      if (processors[k].cols() != d)
        throw ShapeError("processor_dimensions: L columns mismatch on edge " + std::to_string(k));
      out.edge_dim[k] = static_cast<int>(processors[k].rows());
    }
  }
  return out;
}

namespace detail {

inline int single_cu_dpr(const Topology& topo) {
  const auto cus = topo.cu_ids();
  if (cus.size() != 1) throw UnsupportedInputError("evaluation requires exactly one CU");
  return cus.front();
}

inline CMat regularized(const CMat& m) {
  return m + kDprRegularization * CMat::Identity(m.rows(), m.rows());
}

}  // namespace detail

// Sum-rate at the CU: log2det(signal + noise) - log2det(noise) over the
// CU's aggregated observation.
inline double dpr_sum_rate(const DprConfig& config, const ChannelRealization& ch,
                           const ActiveEdgeSet& active) {
  const int cu = detail::single_cu_dpr(active.topology());
  const SignalDimensions dims = processor_dimensions(active, config.processors);
  SignalFlow sf(active, dims, ch, config.processors);
  const SignalFlow::Maps& m = sf.node_maps(cu);
  const CMat noise = detail::regularized(sf.noise_covariance(m, config.omega));
  const CMat signal = symmetrize(m.x * ch.sigma_x * m.x.adjoint());
  return log2det(symmetrize(signal + noise)) - log2det(noise);
}

// Backhaul rate of one edge: log2det(Omega_e + L_e Sigma_r L_e') -
// log2det(Omega_e) with Sigma_r the tail's aggregated covariance.
inline double dpr_backhaul_rate(int edge, const DprConfig& config, const ChannelRealization& ch,
                                const ActiveEdgeSet& active) {
  const SignalDimensions dims = processor_dimensions(active, config.processors);
  SignalFlow sf(active, dims, ch, config.processors);
  const int tail = active.edge(edge).tail;
  const CMat sigma_r = sf.covariance(sf.node_maps(tail), ch.sigma_x, config.omega);
  const CMat& l = config.processors[edge];
  return log2det(symmetrize(config.omega[edge] + l * sigma_r * l.adjoint())) -
         log2det(config.omega[edge]);
}

// Reduce full-rank square processors to the identity without changing any
// rate: Omega''_e = G_e Omega'_e G_e' where G_e is assembled recursively
// from the inverse processors along the incoming edges of tail(e).
inline DprConfig identity_transform(const DprConfig& config, const ActiveEdgeSet& active) {
  const Topology& topo = active.topology();
  const SignalDimensions dims = processor_dimensions(active, config.processors);
  DprConfig out;
  out.processors.resize(active.size());
  out.omega.resize(active.size());
  std::vector<CMat> g(active.size());
  for (int k : active.topological_edge_order()) {
    const CMat& l = config.processors[k];
    if (l.rows() != l.cols())
      throw UnsupportedInputError("identity_transform: processor on edge " + std::to_string(k) +
                                  " is not square");
    Eigen::JacobiSVD<CMat> svd(l, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    CMat l_use = l;
    if (!(smin > smax / 1e8))
      l_use += (1e-8 * std::max(smax, 1.0)) * CMat::Identity(l.rows(), l.cols());
    const CMat l_inv = l_use.partialPivLu().solve(CMat::Identity(l.rows(), l.cols()));

    const int tail = active.edge(k).tail;
    std::vector<CMat> blocks;
    const int na = topo.node(tail).antennas;
    if (na > 0) blocks.push_back(CMat::Identity(na, na));
    for (int kk : active.gamma_in(tail)) blocks.push_back(g[kk]);
    const CMat ge = block_diag(blocks) * l_inv;
    g[k] = ge;
    out.processors[k] = CMat::Identity(dims.edge_dim[k], dims.node_dim.at(tail));
    out.omega[k] = symmetrize(ge * config.omega[k] * ge.adjoint());
  }
  return out;
}

struct DprResult {
  DprConfig config;
  double sum_rate = 0.0;
  bool feasible = false;
  MmTrace trace;
};

namespace detail {

// Per-edge affine structure of Sigma_r(tail(e)) in the variable covariances.
struct EdgeConstraintData {
  CMat fixed;                               // L (A Sx A' + ZZ' + fixed-q part) L'
  std::vector<std::pair<int, CMat>> maps;   // variable edge -> L * Q block
};

struct DprAssembly {
  std::vector<int> var_edges;       // topological order
  std::map<int, int> var_index;     // edge -> matrix variable index
  std::vector<CMat> fixed_omega;    // per edge; empty for variables
  double cap = 0.0;
  CMat cu_signal;                   // x-part of the CU covariance
  CMat cu_noise_fixed;              // z + regularizer + fixed-q part
  std::vector<std::pair<int, CMat>> cu_q;  // variable edge -> CU q block
  std::vector<EdgeConstraintData> edge_data;  // per variable edge
};

inline DprAssembly assemble_dpr(const ChannelRealization& ch, const ActiveEdgeSet& active,
                                const std::vector<double>& ctilde, const SignalFlow& sf,
                                const std::vector<CMat>& processors,
                                const SignalDimensions& dims, int sink) {
  DprAssembly a;
  a.cap = kOmegaCapFactor * std::max(1.0, spectral_norm_bound(received_covariance(ch)));
  a.fixed_omega.assign(active.size(), CMat());
  for (int k : active.topological_edge_order()) {
    if (ctilde[k] > 0) {
      a.var_index[k] = static_cast<int>(a.var_edges.size());
      a.var_edges.push_back(k);
    } else {
      a.fixed_omega[k] = a.cap * CMat::Identity(dims.edge_dim[k], dims.edge_dim[k]);
    }
  }

  auto fixed_noise = [&](const SignalFlow::Maps& m) {
    CMat out = m.z * m.z.adjoint();
    for (int k = 0; k < active.size(); ++k) {
      if (a.fixed_omega[k].rows() == 0 || dims.edge_dim[k] == 0) continue;
      const CMat qk = m.q.middleCols(sf.q_offset(k), dims.edge_dim[k]);
      out += qk * a.fixed_omega[k] * qk.adjoint();
    }
    return symmetrize(out);
  };

  const SignalFlow::Maps& cu = sf.node_maps(sink);
  a.cu_signal = symmetrize(cu.x * ch.sigma_x * cu.x.adjoint());
  a.cu_noise_fixed = fixed_noise(cu) + kDprRegularization * CMat::Identity(cu.x.rows(), cu.x.rows());
  for (int k : a.var_edges) {
    const CMat qk = cu.q.middleCols(sf.q_offset(k), dims.edge_dim[k]);
    if (qk.norm() > 0) a.cu_q.emplace_back(a.var_index.at(k), qk);
  }

  for (int k : a.var_edges) {
    const int tail = active.edge(k).tail;
    const SignalFlow::Maps& m = sf.node_maps(tail);
    const CMat& l = processors[k];
    EdgeConstraintData d;
    d.fixed = symmetrize(l * (m.x * ch.sigma_x * m.x.adjoint() + fixed_noise(m)) * l.adjoint());
    for (int kk : a.var_edges) {
      if (kk == k) continue;
      const CMat qb = m.q.middleCols(sf.q_offset(kk), dims.edge_dim[kk]);
      if (qb.norm() > 0) d.maps.emplace_back(a.var_index.at(kk), CMat(l * qb));
    }
    a.edge_data.push_back(std::move(d));
  }
  return a;
}

// Backhaul rate of a variable edge at scaled-identity-or-given covariances.
inline double edge_rate(const DprAssembly& a, int pos, const std::vector<CMat>& omega_var) {
  const EdgeConstraintData& d = a.edge_data[pos];
  CMat sr = d.fixed;
  for (const auto& [vk, map] : d.maps) sr += map * omega_var[vk] * map.adjoint();
  const CMat& om = omega_var[pos];
  return log2det(symmetrize(om + sr)) - log2det(om);
}

// Scaled-identity covariances meeting each constraint with the requested
// slack factor, found edge-by-edge in topological order.
inline std::optional<std::vector<CMat>> dpr_feasible_init(const DprAssembly& a,
                                                          const ActiveEdgeSet& active,
                                                          const std::vector<double>& ctilde,
                                                          const SignalDimensions& dims,
                                                          double target_factor) {
  std::vector<CMat> omega(a.var_edges.size());
  for (size_t pos = 0; pos < a.var_edges.size(); ++pos) {
    const int k = a.var_edges[pos];
    const int d = dims.edge_dim[k];
    const double target = target_factor * ctilde[k];
    auto rate_at = [&](double c) {
      omega[pos] = c * CMat::Identity(d, d);
      return edge_rate(a, static_cast<int>(pos), omega);
    };
    double hi = 1.0;
    bool ok = rate_at(hi) <= target;
    for (int it = 0; !ok && it < 80 && hi < a.cap; ++it) {
      hi = std::min(hi * 4.0, a.cap);
      ok = rate_at(hi) <= target;
    }
    if (!ok) return std::nullopt;
    double lo = hi / 4.0;
    if (rate_at(lo) <= target) lo = 1e-8;
    for (int it = 0; it < 50; ++it) {
      const double mid = 0.5 * (lo + hi);
      (rate_at(mid) <= target ? hi : lo) = mid;
    }
    rate_at(hi);
  }
  return omega;
}

// Water-filling covariances saturating each constraint, found edge-by-edge
// in topological order: quantization noise goes to the directions carrying
// the least signal, which is a far stronger starting point than a scaled
// identity.
inline std::vector<CMat> dpr_waterfill_init(const DprAssembly& a, const ActiveEdgeSet& active,
                                            const std::vector<double>& ctilde,
                                            const ChannelRealization& ch, const SignalFlow& sf,
                                            const std::vector<CMat>& processors) {
  std::vector<CMat> omega(a.var_edges.size());
  for (size_t pos = 0; pos < a.var_edges.size(); ++pos) {
    const int k = a.var_edges[pos];
    const EdgeConstraintData& d = a.edge_data[pos];
    CMat sr = d.fixed;
    for (const auto& [vk, map] : d.maps) sr += map * omega[vk] * map.adjoint();
    const int tail = active.edge(k).tail;
    const CMat lx = processors[k] * sf.node_maps(tail).x;
    const CMat sig = symmetrize(CMat(lx * ch.sigma_x * lx.adjoint()));
    const CMat noise = symmetrize(CMat(sr - sig));
    const double target = std::min(0.995 * ctilde[k], ctilde[k] - 1e-9);
    omega[pos] = waterfill_core(sig, noise, target, a.cap);
    // Keep the covariance comfortably above the positive-definiteness floor;
    // extra noise only loosens the constraint.
    omega[pos] += 1e-8 * std::max(1.0, spectral_norm_bound(sr)) *
                  CMat::Identity(omega[pos].rows(), omega[pos].rows());
  }
  return omega;
}

}  // namespace detail

// Covariance optimization for fixed processors (identity by default).  The
// true sum-rate is re-evaluated after every outer iteration; a decrease
// beyond round-off keeps the previous iterate.
inline DprResult optimize_dpr(const ChannelRealization& ch, const ActiveEdgeSet& active,
                              const std::vector<double>& ctilde,
                              const std::vector<CMat>& processors, const MmOptions& opts = {},
                              const std::vector<CMat>* warm_omega = nullptr) {
  if (static_cast<int>(ctilde.size()) != active.size())
    throw ShapeError("optimize_dpr: capacity list does not match the active edges");
  const Topology& topo = active.topology();
  const int cu = detail::single_cu_dpr(topo);
  const SignalDimensions dims = processor_dimensions(active, processors);
  SignalFlow sf(active, dims, ch, processors);
  detail::DprAssembly a = detail::assemble_dpr(ch, active, ctilde, sf, processors, dims, cu);

  DprResult res;
  res.config.processors = processors;
  res.config.omega.assign(active.size(), CMat());
  for (int k = 0; k < active.size(); ++k)
    if (a.fixed_omega[k].rows() > 0) res.config.omega[k] = a.fixed_omega[k];

  auto full_config = [&](const std::vector<CMat>& omega_var) {
    DprConfig cfg = res.config;
    for (size_t p = 0; p < a.var_edges.size(); ++p) cfg.omega[a.var_edges[p]] = omega_var[p];
    return cfg;
  };
  auto true_rate = [&](const std::vector<CMat>& omega_var) {
    const DprConfig cfg = full_config(omega_var);
    const SignalFlow::Maps& m = sf.node_maps(cu);
    const CMat noise = detail::regularized(sf.noise_covariance(m, cfg.omega));
    return log2det(symmetrize(a.cu_signal + noise)) - log2det(noise);
  };

  if (a.var_edges.empty()) {
    res.sum_rate = true_rate({});
    res.feasible = true;
    res.trace.objective.push_back(res.sum_rate);
    return res;
  }

  std::vector<CMat> anchor;
  bool warm_ok = false;
  if (warm_omega) {
    // Accept a warm start only if it is feasible for every constraint.
    anchor.resize(a.var_edges.size());
    warm_ok = static_cast<int>(warm_omega->size()) == active.size();
    for (size_t p = 0; warm_ok && p < a.var_edges.size(); ++p) {
      const CMat& w = (*warm_omega)[a.var_edges[p]];
      warm_ok = w.rows() == dims.edge_dim[a.var_edges[p]] && is_positive_definite(w);
      if (warm_ok) anchor[p] = w;
    }
    for (size_t p = 0; warm_ok && p < a.var_edges.size(); ++p)
      warm_ok = detail::edge_rate(a, static_cast<int>(p), anchor) <=
                ctilde[a.var_edges[p]] + 1e-9;
  }
  if (!warm_ok) {
    auto init = detail::dpr_feasible_init(a, active, ctilde, dims, 0.995);
    if (!init) {
      res.trace.termination = Termination::kInfeasible;
      return res;
    }
    anchor = *init;
  }
  {
    // Water-filling start candidate; adopted when feasible and better.
    std::vector<CMat> wf = detail::dpr_waterfill_init(a, active, ctilde, ch, sf, processors);
    bool wf_ok = true;
    for (size_t p = 0; wf_ok && p < a.var_edges.size(); ++p)
      wf_ok = detail::edge_rate(a, static_cast<int>(p), wf) <= ctilde[a.var_edges[p]] + 1e-9;
    if (wf_ok && true_rate(wf) > true_rate(anchor)) anchor = std::move(wf);
  }

  double best = true_rate(anchor);
  res.trace.objective.push_back(best);
  std::vector<CMat> best_omega = anchor;

  for (int outer = 0; outer < opts.max_outer; ++outer) {
    LogDetProgram prog;
    for (int k : a.var_edges) prog.matrix_vars.push_back({dims.edge_dim[k], a.cap});

    // Objective: log2det(signal + noise) minus the tangent of
    // log2det(noise) at the anchor.
    CMat n0 = a.cu_noise_fixed;
    for (const auto& [vk, q] : a.cu_q) n0 += q * anchor[vk] * q.adjoint();
    n0 = symmetrize(n0);
    ConcaveTerm obj;
    obj.expr.base = symmetrize(a.cu_signal + a.cu_noise_fixed);
    for (const auto& [vk, q] : a.cu_q) obj.expr.terms.push_back({vk, q});
    prog.objective_concave.push_back(std::move(obj));
    Eigen::LDLT<CMat> ldlt(n0);
    const CMat n0_inv = ldlt.solve(CMat::Identity(n0.rows(), n0.rows()));
    prog.objective_linear.constant =
        -log2det(n0) - ((n0_inv * (a.cu_noise_fixed - n0)).trace().real()) / kLn2;
    for (const auto& [vk, q] : a.cu_q)
      prog.objective_linear.matrix_coeffs.emplace_back(vk, CMat(-(q.adjoint() * n0_inv * q) / kLn2));

    for (size_t pos = 0; pos < a.var_edges.size(); ++pos) {
      const int k = a.var_edges[pos];
      const detail::EdgeConstraintData& d = a.edge_data[pos];
      CMat x0 = d.fixed + anchor[pos];
      for (const auto& [vk, map] : d.maps) x0 += map * anchor[vk] * map.adjoint();
      x0 = symmetrize(x0);
      Eigen::LDLT<CMat> lx(x0);
      const CMat x0_inv = lx.solve(CMat::Identity(x0.rows(), x0.rows()));
      Inequality c;
      c.label = "backhaul " + std::to_string(k);
      c.linear.constant = log2det(x0) + ((x0_inv * (d.fixed - x0)).trace().real()) / kLn2;
      c.linear.matrix_coeffs.emplace_back(static_cast<int>(pos), CMat(x0_inv / kLn2));
      for (const auto& [vk, map] : d.maps)
        c.linear.matrix_coeffs.emplace_back(vk, CMat((map.adjoint() * x0_inv * map) / kLn2));
      ConcaveTerm t;
      const int dd = dims.edge_dim[k];
      t.expr.base = CMat::Zero(dd, dd);
      t.expr.terms.push_back({static_cast<int>(pos), CMat::Identity(dd, dd)});
      c.concave.push_back(std::move(t));
      c.bound = ctilde[k];
      prog.constraints.push_back(std::move(c));
    }

    SolverPoint warm;
    warm.x = anchor;
    warm.s = RVec::Zero(0);
    SolverReport rep = solve(prog, warm, opts.solver);
    res.trace.outer_iters = outer + 1;
    if (rep.termination == Termination::kInfeasible) {
      // Keep the best feasible iterate when a later re-solve fails; only an
      // unsolvable first subproblem makes the run infeasible.
      if (outer == 0) res.trace.termination = Termination::kInfeasible;
      break;
    }
    // The minorizer touches the true objective at the anchor, so a returned
    // point that does not improve the subproblem cannot improve the true
    // rate either: the iteration has converged to solver accuracy.
    if (rep.objective <= LogDetSolver(prog, opts.solver).objective_value(warm) + 1e-9) break;

    const double value = true_rate(rep.point.x);
    res.trace.objective.push_back(value);
    if (value < best - 1e-7) {
      res.trace.monotone = false;
      break;
    }
    const double gain = value - best;
    best = std::max(best, value);
    best_omega = rep.point.x;
    anchor = rep.point.x;
    if (gain < opts.rate_tol) break;
  }

  res.config = full_config(best_omega);
  res.sum_rate = best;
  bool ok = res.trace.termination != Termination::kInfeasible;
  for (size_t p = 0; ok && p < a.var_edges.size(); ++p)
    ok = detail::edge_rate(a, static_cast<int>(p), best_omega) <= ctilde[a.var_edges[p]] + 1e-6;
  res.feasible = ok;
  return res;
}

inline DprResult optimize_dpr_opt(const ChannelRealization& ch, const ActiveEdgeSet& active,
                                  const std::vector<double>& ctilde, const MmOptions& opts = {},
                                  const std::vector<CMat>* warm_omega = nullptr) {
  const SignalDimensions dims = signal_dimensions(active);
  return optimize_dpr(ch, active, ctilde, identity_processors(active, dims), opts, warm_omega);
}

// Three-step rank-limited variant: unconstrained optimization, processor
// selection from the least-noisy eigendirections, then re-optimization of
// the covariances for the fixed processors.
inline DprResult optimize_dpr_rank(const ChannelRealization& ch, const ActiveEdgeSet& active,
                                   const std::vector<double>& ctilde,
                                   const std::map<int, int>& rank_limits,
                                   const MmOptions& opts = {}) {
  const Topology& topo = active.topology();
  DprResult step1 = optimize_dpr_opt(ch, active, ctilde, opts);
  if (step1.trace.termination == Termination::kInfeasible) return step1;

  const SignalDimensions dims_full = signal_dimensions(active);
  const SignalDimensions dims_rank = signal_dimensions(active, &rank_limits);

  // m[id] maps the node's full-dimension aggregate onto the reduced one.
  std::map<int, CMat> m;
  std::vector<CMat> processors(active.size());
  std::vector<CMat> warm(active.size());
  for (int id : topo.topological_order()) {
    std::vector<CMat> blocks;
    const int na = topo.node(id).antennas;
    if (na > 0) blocks.push_back(CMat::Identity(na, na));
    for (int k : active.gamma_in(id)) blocks.push_back(processors[k] * m.at(active.edge(k).tail));
    m[id] = block_diag(blocks);
    if (m[id].cols() != dims_full.node_dim.at(id) || m[id].rows() != dims_rank.node_dim.at(id))
      throw ShapeError("optimize_dpr_rank: reduction map dimension mismatch");
    for (int k : active.gamma_out(id)) {
      const CMat omega_hat = symmetrize(m[id] * step1.config.omega[k] * m[id].adjoint());
      const EigDecomposition ed = eig_hermitian_desc(omega_hat);
      const int de = dims_rank.edge_dim[k];
      const int dn = dims_rank.node_dim.at(id);
      CMat v(dn, de);  // eigenvectors of the smallest de eigenvalues
      for (int j = 0; j < de; ++j) v.col(j) = ed.eigenvectors.col(dn - 1 - j);
      processors[k] = v.adjoint();
      CMat w = symmetrize(v.adjoint() * omega_hat * v);
      warm[k] = w + 1e-9 * std::max(1.0, spectral_norm_bound(w)) * CMat::Identity(de, de);
    }
  }

  return optimize_dpr(ch, active, ctilde, processors, opts, &warm);
}

// Scaled-identity baseline: process edges in topological order and choose
// c_e so the edge rate meets its capacity exactly.
inline DprResult dpr_not_opt(const ChannelRealization& ch, const ActiveEdgeSet& active,
                             const std::vector<double>& ctilde) {
  if (static_cast<int>(ctilde.size()) != active.size())
    throw ShapeError("dpr_not_opt: capacity list does not match the active edges");
  const int cu = detail::single_cu_dpr(active.topology());
  const SignalDimensions dims = signal_dimensions(active);
  const std::vector<CMat> processors = identity_processors(active, dims);
  SignalFlow sf(active, dims, ch, processors);
  const double cap = kOmegaCapFactor * std::max(1.0, spectral_norm_bound(received_covariance(ch)));

  DprResult res;
  res.config.processors = processors;
  res.config.omega.resize(active.size());
  for (int k = 0; k < active.size(); ++k)
    res.config.omega[k] = CMat::Zero(dims.edge_dim[k], dims.edge_dim[k]);
  for (int k : active.topological_edge_order()) {
    const int d = dims.edge_dim[k];
    const int tail = active.edge(k).tail;
    auto rate_at = [&](double c) {
      res.config.omega[k] = c * CMat::Identity(d, d);
      const CMat sr = sf.covariance(sf.node_maps(tail), ch.sigma_x, res.config.omega);
      return log2det(symmetrize(res.config.omega[k] + sr)) - log2det(res.config.omega[k]);
    };
    if (ctilde[k] <= 0) {
      res.config.omega[k] = cap * CMat::Identity(d, d);
      continue;
    }
    double hi = 1.0;
    while (rate_at(hi) > ctilde[k] && hi < cap) hi *= 4.0;
    if (rate_at(hi) > ctilde[k]) {
      res.config.omega[k] = cap * CMat::Identity(d, d);
      continue;
    }
    double lo = hi;
    while (rate_at(lo) < ctilde[k] && lo > 1e-14) lo /= 4.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (rate_at(mid) > ctilde[k] ? lo : hi) = mid;
      if (std::abs(rate_at(mid) - ctilde[k]) < 1e-9) break;
    }
  }
  res.sum_rate = dpr_sum_rate(res.config, ch, active);
  res.feasible = true;
  res.trace.objective.push_back(res.sum_rate);
  return res;
}

}  // namespace cran
