#pragma once

// Decentralized layer-by-layer optimization of the recompression
// covariances.  Each RU optimizes its outgoing edges locally using the
// effective channel of its ascendant subnetwork: water-filling from
// forwarded CSI only (FF), a per-edge MM refinement that additionally uses
// covariances fed back from the receiving node (FF-FB), and a variant that
// accounts for side information at the decompressor (SI).  The reported
// sum-rate is always the centrally evaluated one.

#include <algorithm>
#include <map>
#include <set>
#include <vector>

#include "cran/dpr.hpp"

namespace cran {

struct EffectiveChannel {
  CMat h;        // d_i x (total MS antennas)
  CMat sigma_n;  // d_i x d_i effective-noise covariance
};

struct OptimizationOrder {
  std::vector<std::vector<int>> node_order;       // per layer, RU layers only
  std::map<int, std::vector<int>> decompression;  // node -> incoming edge order
};

inline OptimizationOrder default_order(const ActiveEdgeSet& active) {
  OptimizationOrder order;
  const auto& layers = active.partition().layers;
  for (size_t l = 0; l + 1 < layers.size(); ++l) {
    std::vector<int> ids = layers[l];
    std::sort(ids.begin(), ids.end());
    order.node_order.push_back(std::move(ids));
  }
  for (const Node& n : active.topology().nodes()) {
    std::vector<int> in = active.gamma_in(n.id);
    std::sort(in.begin(), in.end());
    order.decompression[n.id] = std::move(in);
  }
  return order;
}

namespace detail {

// Noise covariance of a signal map using only the covariances that are
// already fixed; an edge whose quantization noise actually reaches the
// signal must have one.
inline CMat partial_noise(const SignalFlow& sf, const SignalFlow::Maps& m,
                          const std::vector<CMat>& omega, const SignalDimensions& dims,
                          int active_size) {
  CMat out = m.z * m.z.adjoint();
  for (int k = 0; k < active_size; ++k) {
    const int de = dims.edge_dim[k];
    if (de == 0) continue;
    const CMat qk = m.q.middleCols(sf.q_offset(k), de);
    if (qk.norm() == 0) continue;
    if (static_cast<int>(omega.size()) <= k || omega[k].rows() != de)
      throw SequencingError("covariance of edge " + std::to_string(k) + " not yet fixed");
    out += qk * omega[k] * qk.adjoint();
  }
  return symmetrize(out);
}

inline CMat partial_cross_noise(const SignalFlow& sf, const SignalFlow::Maps& a,
                                const SignalFlow::Maps& b, const std::vector<CMat>& omega,
                                const SignalDimensions& dims, int active_size) {
  CMat out = a.z * b.z.adjoint();
  for (int k = 0; k < active_size; ++k) {
    const int de = dims.edge_dim[k];
    if (de == 0) continue;
    const CMat qa = a.q.middleCols(sf.q_offset(k), de);
    const CMat qb = b.q.middleCols(sf.q_offset(k), de);
    if (qa.norm() == 0 || qb.norm() == 0) continue;
    if (static_cast<int>(omega.size()) <= k || omega[k].rows() != de)
      throw SequencingError("covariance of edge " + std::to_string(k) + " not yet fixed");
    out += qa * omega[k] * qb.adjoint();
  }
  return out;
}

}  // namespace detail

// Effective channel of a node's aggregate observation r_i = H x + n, with
// the upstream quantization noises folded into the noise covariance.
inline EffectiveChannel effective_channel(int node, const ActiveEdgeSet& active,
                                          const std::vector<CMat>& omega,
                                          const ChannelRealization& ch) {
  const SignalDimensions dims = signal_dimensions(active);
  SignalFlow sf(active, dims, ch, identity_processors(active, dims));
  const SignalFlow::Maps& m = sf.node_maps(node);
  EffectiveChannel eff;
  eff.h = m.x;
  eff.sigma_n = detail::partial_noise(sf, m, omega, dims, active.size());
  return eff;
}

// Water-filling covariance for one edge from forwarded CSI only.
inline CMat waterfill_ff(const EffectiveChannel& eff, const CMat& sigma_x, double ctilde,
                         double cap) {
  const CMat signal = symmetrize(CMat(eff.h * sigma_x * eff.h.adjoint()));
  return detail::waterfill_core(signal, eff.sigma_n, ctilde, cap);
}

struct SideInfo {
  CMat sigma_xv;  // cross-covariance of x with the side-information stack
  CMat sigma_nv;  // cross-covariance of the node's effective noise with it
  CMat sigma_v;   // covariance of the side-information stack
};

// Joint second-order statistics of the streams already available at the
// receiving node, assembled from the global signal maps.
inline SideInfo sideinfo_covariances(int node, const std::vector<int>& s_edges,
                                     const std::vector<CMat>& omega, const ActiveEdgeSet& active,
                                     const ChannelRealization& ch) {
  const SignalDimensions dims = signal_dimensions(active);
  SignalFlow sf(active, dims, ch, identity_processors(active, dims));
  SideInfo out;
  const SignalFlow::Maps& m = sf.node_maps(node);
  if (s_edges.empty()) {
    out.sigma_xv = CMat(ch.sigma_x.rows(), 0);
    out.sigma_nv = CMat(m.x.rows(), 0);
    out.sigma_v = CMat(0, 0);
    return out;
  }
  std::vector<SignalFlow::Maps> parts;
  for (int k : s_edges) {
    if (static_cast<int>(omega.size()) <= k || omega[k].rows() != dims.edge_dim[k])
      throw SequencingError("side-information edge " + std::to_string(k) + " has no covariance");
    parts.push_back(sf.edge_maps(k));
  }
  const SignalFlow::Maps v = SignalFlow::vstack_maps(parts);
  out.sigma_xv = ch.sigma_x * v.x.adjoint();
  out.sigma_nv = detail::partial_cross_noise(sf, m, v, omega, dims, active.size());
  out.sigma_v = symmetrize(v.x * ch.sigma_x * v.x.adjoint() +
                           detail::partial_noise(sf, v, omega, dims, active.size()));
  return out;
}

struct DecResult {
  DprConfig config;
  double sum_rate = 0.0;
  bool feasible = false;
};

namespace detail {

inline CMat conditional_part(const CMat& joint, const CMat& cross, const CMat& sigma_v) {
  if (sigma_v.rows() == 0) return joint;
  return conditional_covariance(joint, cross, sigma_v);
}

// Shared per-edge MM solve for the FF-FB and SI variants.  Maximizes
// log2det(A + X) - log2det(B + X) subject to
// log2det(C + X) - log2det(X) <= ctilde, with X capped at cap * I.
inline CMat dec_edge_mm(const CMat& a, const CMat& b, const CMat& c, double ctilde, double cap,
                        const MmOptions& opts, const std::vector<CMat>& extra_starts = {}) {
  const Eigen::Index d = a.rows();
  auto g_at = [&](const CMat& x) { return log2det(symmetrize(c + x)) - log2det(x); };
  auto f_at = [&](const CMat& x) {
    return log2det(symmetrize(a + x)) - log2det(symmetrize(b + x));
  };
  if (ctilde <= 0) return cap * CMat::Identity(d, d);

  // Scaled-identity feasible start.
  double hi = 1.0;
  auto g_scal = [&](double v) { return g_at(v * CMat::Identity(d, d)); };
  const double target = std::min(0.995 * ctilde, ctilde - 1e-9);
  while (g_scal(hi) > target && hi < cap) hi *= 4.0;
  if (g_scal(hi) > target) return cap * CMat::Identity(d, d);
  double lo = hi > 1.0 ? hi / 4.0 : 1e-8;
  if (g_scal(lo) <= target) lo = 1e-10;
  for (int it = 0; it < 50; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g_scal(mid) <= target ? hi : lo) = mid;
  }
  CMat anchor = hi * CMat::Identity(d, d);
  CMat best_x = anchor;
  double best = f_at(anchor);

  // Water-filling on the objective's own (signal, noise) split solves the
  // problem exactly when the rate constraint uses the same statistics, and
  // gives a strong start otherwise.  Candidates that violate the actual
  // constraint are discarded.
  std::vector<CMat> candidates = extra_starts;
  candidates.push_back(waterfill_core(symmetrize(CMat(a - b)), b, target, cap));
  for (const CMat& x : candidates) {
    if (x.rows() != d || g_at(x) > ctilde + 1e-9) continue;
    const double v = f_at(x);
    if (v > best) {
      best = v;
      best_x = x;
      anchor = x;
    }
  }

  for (int outer = 0; outer < 30; ++outer) {
    LogDetProgram prog;
    prog.matrix_vars.push_back({static_cast<int>(d), cap});

    ConcaveTerm obj;
    obj.expr.base = symmetrize(a);
    obj.expr.terms.push_back({0, CMat::Identity(d, d)});
    prog.objective_concave.push_back(std::move(obj));
    const CMat b0 = symmetrize(b + anchor);
    const CMat b0_inv = Eigen::LDLT<CMat>(b0).solve(CMat::Identity(d, d));
    prog.objective_linear.constant =
        -log2det(b0) + ((b0_inv * anchor).trace().real()) / kLn2;
    prog.objective_linear.matrix_coeffs.emplace_back(0, CMat(-b0_inv / kLn2));

    const CMat c0 = symmetrize(c + anchor);
    const CMat c0_inv = Eigen::LDLT<CMat>(c0).solve(CMat::Identity(d, d));
    Inequality con;
    con.label = "backhaul";
    con.linear.constant = log2det(c0) - ((c0_inv * anchor).trace().real()) / kLn2;
    con.linear.matrix_coeffs.emplace_back(0, CMat(c0_inv / kLn2));
    ConcaveTerm t;
    t.expr.base = CMat::Zero(d, d);
    t.expr.terms.push_back({0, CMat::Identity(d, d)});
    con.concave.push_back(std::move(t));
    con.bound = ctilde;
    prog.constraints.push_back(std::move(con));

    SolverPoint warm;
    warm.x = {anchor};
    warm.s = RVec::Zero(0);
    SolverReport rep = solve(prog, warm, opts.solver);
    if (rep.termination == Termination::kInfeasible) break;
    const double prev = f_at(anchor);
    anchor = rep.point.x[0];
    const double value = f_at(anchor);
    // Early iterates can dip below the start while the refinement settles;
    // keep iterating and report the best feasible point seen.
    if (value > best && g_at(anchor) <= ctilde + 1e-9) {
      best = value;
      best_x = anchor;
    }
    if (std::abs(value - prev) < 1e-5) break;
  }
  return best_x;
}

enum class DecVariant { kFf, kFfFb, kSi };

inline DecResult run_decentralized(const ChannelRealization& ch, const ActiveEdgeSet& active,
                                   const std::vector<double>& ctilde,
                                   const OptimizationOrder& order, DecVariant variant,
                                   const MmOptions& opts) {
  if (static_cast<int>(ctilde.size()) != active.size())
    throw ShapeError("decentralized: capacity list does not match the active edges");
  const SignalDimensions dims = signal_dimensions(active);
  const std::vector<CMat> processors = identity_processors(active, dims);
  SignalFlow sf(active, dims, ch, processors);
  const double cap = kOmegaCapFactor * std::max(1.0, spectral_norm_bound(received_covariance(ch)));

  std::vector<CMat> omega(active.size());
  std::set<int> done;
  for (const std::vector<int>& layer : order.node_order) {
    for (int id : layer) {
      std::vector<int> out_edges = active.gamma_out(id);
      std::sort(out_edges.begin(), out_edges.end());
      const SignalFlow::Maps& m = sf.node_maps(id);
      EffectiveChannel eff;
      eff.h = m.x;
      eff.sigma_n = partial_noise(sf, m, omega, dims, active.size());
      const CMat reg =
          1e-12 * std::max(1.0, spectral_norm_bound(eff.sigma_n)) *
          CMat::Identity(eff.sigma_n.rows(), eff.sigma_n.rows());
      const CMat signal = symmetrize(CMat(eff.h * ch.sigma_x * eff.h.adjoint()));

      for (int e : out_edges) {
        if (variant == DecVariant::kFf) {
          omega[e] = waterfill_ff(eff, ch.sigma_x, ctilde[e], cap);
          done.insert(e);
          continue;
        }
        // Side information available at head(e) while handling this edge.
        const int head = active.edge(e).head;
        std::vector<int> s_edges;
        const std::vector<int>& pi_t = order.decompression.at(head);
        for (int k : pi_t) {
          if (variant == DecVariant::kSi && k == e) break;
          if (done.count(k)) s_edges.push_back(k);
        }
        std::vector<SignalFlow::Maps> parts;
        for (int k : s_edges) parts.push_back(sf.edge_maps(k));
        CMat sigma_v, sigma_xv, sigma_nv;
        if (!parts.empty()) {
          const SignalFlow::Maps v = SignalFlow::vstack_maps(parts);
          sigma_v = symmetrize(v.x * ch.sigma_x * v.x.adjoint() +
                               partial_noise(sf, v, omega, dims, active.size()));
          sigma_xv = ch.sigma_x * v.x.adjoint();
          sigma_nv = partial_cross_noise(sf, m, v, omega, dims, active.size());
        }
        CMat sx_cond = ch.sigma_x;
        CMat sn_cond = eff.sigma_n;
        if (sigma_v.rows() > 0) {
          sx_cond = conditional_covariance(ch.sigma_x, sigma_xv, sigma_v);
          sn_cond = conditional_covariance(eff.sigma_n, sigma_nv, sigma_v);
        }
        const CMat a = symmetrize(CMat(eff.h * sx_cond * eff.h.adjoint() + sn_cond)) + reg;
        const CMat b = symmetrize(sn_cond) + reg;
        const CMat c = variant == DecVariant::kSi ? a : symmetrize(CMat(signal + eff.sigma_n)) + reg;
        // The forward-only water-filling solution is always feasible here and
        // anchors the refinement at least as well as the FF variant; the
        // slightly backed-off copy gives the refinement interior headroom.
        const std::vector<CMat> starts = {
            waterfill_ff(eff, ch.sigma_x, ctilde[e], cap),
            waterfill_ff(eff, ch.sigma_x, std::min(0.995 * ctilde[e], ctilde[e] - 1e-9), cap)};
        omega[e] = dec_edge_mm(a, b, c, ctilde[e], cap, opts, starts);
        done.insert(e);
      }
    }
  }

  DecResult res;
  res.config.processors = processors;
  res.config.omega = std::move(omega);
  for (int k = 0; k < active.size(); ++k) {
    if (res.config.omega[k].rows() != dims.edge_dim[k])
      res.config.omega[k] = cap * CMat::Identity(dims.edge_dim[k], dims.edge_dim[k]);
  }
  res.sum_rate = dpr_sum_rate(res.config, ch, active);
  res.feasible = true;
  return res;
}

}  // namespace detail

inline DecResult optimize_dec_ff(const ChannelRealization& ch, const ActiveEdgeSet& active,
                                 const std::vector<double>& ctilde,
                                 const OptimizationOrder& order, const MmOptions& opts = {}) {
  return detail::run_decentralized(ch, active, ctilde, order, detail::DecVariant::kFf, opts);
}

inline DecResult optimize_ff_fb(const ChannelRealization& ch, const ActiveEdgeSet& active,
                                const std::vector<double>& ctilde, const OptimizationOrder& order,
                                const MmOptions& opts = {}) {
  return detail::run_decentralized(ch, active, ctilde, order, detail::DecVariant::kFfFb, opts);
}

inline DecResult optimize_dec_si(const ChannelRealization& ch, const ActiveEdgeSet& active,
                                 const std::vector<double>& ctilde, const OptimizationOrder& order,
                                 const MmOptions& opts = {}) {
  return detail::run_decentralized(ch, active, ctilde, order, detail::DecVariant::kSi, opts);
}

}  // namespace cran
