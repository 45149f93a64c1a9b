#pragma once

// Two-CU extension of the centralized scheme.  Each CU decodes its own
// subset of mobile stations, treating the remaining stations as noise, and
// the CUs exchange compressed versions of their aggregate received vectors
// over a pair of finite-capacity duplex links (one exchange round).

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "cran/dpr.hpp"

namespace cran {

struct MultiCuSetup {
  std::array<int, 2> cu_ids{};
  std::map<int, std::vector<int>> decoded_ms;  // CU id -> 0-based MS indices
  std::array<double, 2> exchange_capacity{};   // [0]: cu0 -> cu1, [1]: cu1 -> cu0
};

struct MultiCuResult {
  DprConfig config;                 // RU-edge processors and covariances
  std::array<CMat, 2> inter_omega;  // quantization noise on each exchange link
  std::array<double, 2> per_cu_rate{};
  double sum_rate = 0.0;
  bool feasible = false;
  MmTrace trace;
};

namespace detail {

inline void validate_multi_cu(const ChannelRealization& ch, const Topology& topo,
                              const MultiCuSetup& setup) {
  const auto cus = topo.cu_ids();
  if (cus.size() != 2) throw UnsupportedInputError("two-CU optimization requires exactly two CUs");
  for (int cu : setup.cu_ids)
    if (std::find(cus.begin(), cus.end(), cu) == cus.end())
      throw ValidationError("setup names a node that is not a CU");
  const int num_ms = static_cast<int>(ch.ms_antennas.size());
  std::set<int> seen;
  for (int cu : setup.cu_ids) {
    const auto it = setup.decoded_ms.find(cu);
    if (it == setup.decoded_ms.end())
      throw ValidationError("no decoded subset for CU " + std::to_string(cu));
    for (int ms : it->second) {
      if (ms < 0 || ms >= num_ms) throw ValidationError("decoded MS index out of range");
      if (!seen.insert(ms).second) throw ValidationError("decoded subsets overlap");
    }
  }
  if (static_cast<int>(seen.size()) != num_ms)
    throw ValidationError("decoded subsets do not cover all MSs");
}

// Sigma_x with the antenna blocks of the given MSs zeroed out (signals of
// the decoded stations removed; the rest acts as noise).
inline CMat mask_sigma_x(const ChannelRealization& ch, const std::vector<int>& remove_ms) {
  CMat sx = ch.sigma_x;
  std::vector<int> offsets(ch.ms_antennas.size() + 1, 0);
  for (size_t m = 0; m < ch.ms_antennas.size(); ++m)
    offsets[m + 1] = offsets[m] + ch.ms_antennas[m];
  for (int m : remove_ms) {
    sx.middleRows(offsets[m], ch.ms_antennas[m]).setZero();
    sx.middleCols(offsets[m], ch.ms_antennas[m]).setZero();
  }
  return sx;
}

}  // namespace detail

// Per-CU rates at given covariances: CU j observes its own decompressed
// streams plus the partner's quantized aggregate, and decodes its subset
// with the other stations treated as noise.
inline std::array<double, 2> multi_cu_rates(const DprConfig& config,
                                            const std::array<CMat, 2>& inter_omega,
                                            const ChannelRealization& ch,
                                            const ActiveEdgeSet& active,
                                            const MultiCuSetup& setup) {
  detail::validate_multi_cu(ch, active.topology(), setup);
  const SignalDimensions dims = processor_dimensions(active, config.processors);
  SignalFlow sf(active, dims, ch, config.processors);
  std::array<double, 2> rates{};
  for (int j = 0; j < 2; ++j) {
    const SignalFlow::Maps& own = sf.node_maps(setup.cu_ids[j]);
    const SignalFlow::Maps& partner = sf.node_maps(setup.cu_ids[1 - j]);
    const CMat x = vstack({own.x, partner.x});
    const CMat z = vstack({own.z, partner.z});
    SignalFlow::Maps stacked{x, z, vstack({own.q, partner.q})};
    CMat noise = sf.noise_covariance(stacked, config.omega);
    const Eigen::Index n_own = own.x.rows();
    const Eigen::Index n_p = partner.x.rows();
    const CMat& of = inter_omega[1 - j];  // noise on the partner -> own link
    if (of.rows() != n_p) throw ShapeError("multi_cu_rates: exchange covariance dimension");
    noise.bottomRightCorner(n_p, n_p) += of;
    noise += kDprRegularization * CMat::Identity(noise.rows(), noise.rows());
    const CMat sx_noise = detail::mask_sigma_x(ch, setup.decoded_ms.at(setup.cu_ids[j]));
    const CMat cond = symmetrize(x * sx_noise * x.adjoint() + noise);
    const CMat full = symmetrize(x * ch.sigma_x * x.adjoint() + noise);
    rates[j] = log2det(full) - log2det(cond);
  }
  return rates;
}

// Joint optimization of all RU-edge covariances and the two exchange
// covariances, maximizing the sum of the per-CU rates.
inline MultiCuResult optimize_multi_cu(const ChannelRealization& ch, const ActiveEdgeSet& active,
                                       const std::vector<double>& ctilde,
                                       const MultiCuSetup& setup, const MmOptions& opts = {}) {
  const Topology& topo = active.topology();
  detail::validate_multi_cu(ch, topo, setup);
  if (static_cast<int>(ctilde.size()) != active.size())
    throw ShapeError("optimize_multi_cu: capacity list does not match the active edges");
  const SignalDimensions dims = signal_dimensions(active);
  const std::vector<CMat> processors = identity_processors(active, dims);
  SignalFlow sf(active, dims, ch, processors);
  detail::DprAssembly a =
      detail::assemble_dpr(ch, active, ctilde, sf, processors, dims, setup.cu_ids[0]);
  const int num_ru_vars = static_cast<int>(a.var_edges.size());

  // Per-CU stacked maps and fixed covariance pieces.
  struct CuData {
    CMat x, z, q;                // stacked [own; partner] global maps
    Eigen::Index n_own = 0, n_p = 0;
    CMat signal_full, signal_noise_only;  // x-part with full / masked Sigma_x
    CMat noise_fixed;            // z + regularizer + capacity-zero edges
    std::vector<std::pair<int, CMat>> q_terms;  // RU-variable congruence maps
    int inter_var = -1;          // variable index of the incoming exchange link
    CMat src_fixed;              // fixed part of the outgoing aggregate covariance
    std::vector<std::pair<int, CMat>> src_terms;
    int src_var = -1;            // variable index of the outgoing exchange link
  };
  std::array<CuData, 2> cu;
  int num_vars = num_ru_vars;
  std::array<int, 2> out_var = {-1, -1};  // variable index of the link leaving CU j
  std::array<Eigen::Index, 2> agg_dim{};
  for (int j = 0; j < 2; ++j)
    agg_dim[j] = sf.node_maps(setup.cu_ids[j]).x.rows();
  for (int j = 0; j < 2; ++j)
    if (setup.exchange_capacity[j] > 0 && agg_dim[j] > 0) out_var[j] = num_vars++;

  for (int j = 0; j < 2; ++j) {
    const SignalFlow::Maps& own = sf.node_maps(setup.cu_ids[j]);
    const SignalFlow::Maps& partner = sf.node_maps(setup.cu_ids[1 - j]);
    CuData& d = cu[j];
    d.n_own = own.x.rows();
    d.n_p = partner.x.rows();
    d.x = vstack({own.x, partner.x});
    d.z = vstack({own.z, partner.z});
    d.q = vstack({own.q, partner.q});
    d.signal_full = symmetrize(d.x * ch.sigma_x * d.x.adjoint());
    const CMat sx_noise = detail::mask_sigma_x(ch, setup.decoded_ms.at(setup.cu_ids[j]));
    d.signal_noise_only = symmetrize(d.x * sx_noise * d.x.adjoint());
    CMat nf = d.z * d.z.adjoint();
    for (int k = 0; k < active.size(); ++k) {
      if (a.fixed_omega[k].rows() == 0 || dims.edge_dim[k] == 0) continue;
      const CMat qk = d.q.middleCols(sf.q_offset(k), dims.edge_dim[k]);
      nf += qk * a.fixed_omega[k] * qk.adjoint();
    }
    d.noise_fixed =
        symmetrize(nf) + kDprRegularization * CMat::Identity(d.x.rows(), d.x.rows());
    for (int k : a.var_edges) {
      const CMat qk = d.q.middleCols(sf.q_offset(k), dims.edge_dim[k]);
      if (qk.norm() > 0) d.q_terms.emplace_back(a.var_index.at(k), qk);
    }
    // Incoming exchange link: partner block rows of the stacked observation.
    const int iv = out_var[1 - j];
    if (iv >= 0) {
      d.inter_var = iv;
    } else if (d.n_p > 0) {
      d.noise_fixed.bottomRightCorner(d.n_p, d.n_p) +=
          a.cap * CMat::Identity(d.n_p, d.n_p);
    }
    // Outgoing aggregate r_j, compressed for the partner.
    d.src_var = out_var[j];
    CMat sfix = own.x * ch.sigma_x * own.x.adjoint() + own.z * own.z.adjoint();
    for (int k = 0; k < active.size(); ++k) {
      if (a.fixed_omega[k].rows() == 0 || dims.edge_dim[k] == 0) continue;
      const CMat qk = own.q.middleCols(sf.q_offset(k), dims.edge_dim[k]);
      sfix += qk * a.fixed_omega[k] * qk.adjoint();
    }
    d.src_fixed = symmetrize(sfix);
    for (int k : a.var_edges) {
      const CMat qk = own.q.middleCols(sf.q_offset(k), dims.edge_dim[k]);
      if (qk.norm() > 0) d.src_terms.emplace_back(a.var_index.at(k), qk);
    }
  }

  MultiCuResult res;
  res.config.processors = processors;
  res.config.omega.assign(active.size(), CMat());
  for (int k = 0; k < active.size(); ++k)
    if (a.fixed_omega[k].rows() > 0) res.config.omega[k] = a.fixed_omega[k];
  for (int j = 0; j < 2; ++j)
    res.inter_omega[j] = a.cap * CMat::Identity(agg_dim[j], agg_dim[j]);

  auto selector = [](Eigen::Index rows, Eigen::Index block, Eigen::Index offset) {
    CMat s = CMat::Zero(rows, block);
    s.block(offset, 0, block, block) = CMat::Identity(block, block);
    return s;
  };

  // Point = all variable matrices (RU edges, then exchange links).
  auto sigma_v = [&](const CuData& d, const std::vector<CMat>& v, bool full_signal) {
    CMat out = (full_signal ? d.signal_full : d.signal_noise_only) + d.noise_fixed;
    for (const auto& [vk, q] : d.q_terms) out += q * v[vk] * q.adjoint();
    if (d.inter_var >= 0)
      out.bottomRightCorner(d.n_p, d.n_p) += v[d.inter_var];
    return symmetrize(out);
  };
  auto sigma_src = [&](const CuData& d, const std::vector<CMat>& v) {
    CMat out = d.src_fixed;
    for (const auto& [vk, q] : d.src_terms) out += q * v[vk] * q.adjoint();
    return symmetrize(out);
  };
  auto exchange_rate = [&](int j, const std::vector<CMat>& v) {
    if (out_var[j] < 0) return 0.0;
    return log2det(symmetrize(v[out_var[j]] + sigma_src(cu[j], v))) - log2det(v[out_var[j]]);
  };
  auto rates_at = [&](const std::vector<CMat>& v) {
    std::array<double, 2> r{};
    for (int j = 0; j < 2; ++j)
      r[j] = log2det(sigma_v(cu[j], v, true)) - log2det(sigma_v(cu[j], v, false));
    return r;
  };

  // Feasible start: RU edges first (they do not depend on the exchange
  // covariances), then each exchange link by scalar bisection.
  auto init_ru = detail::dpr_feasible_init(a, active, ctilde, dims, 0.995);
  if (!init_ru) {
    res.trace.termination = Termination::kInfeasible;
    return res;
  }
  std::vector<CMat> anchor(num_vars);
  for (int p = 0; p < num_ru_vars; ++p) anchor[p] = (*init_ru)[p];
  for (int j = 0; j < 2; ++j) {
    if (out_var[j] < 0) continue;
    const Eigen::Index n = agg_dim[j];
    const double target = 0.995 * setup.exchange_capacity[j];
    auto g_at = [&](double c) {
      anchor[out_var[j]] = c * CMat::Identity(n, n);
      return exchange_rate(j, anchor);
    };
    double hi = 1.0;
    while (g_at(hi) > target && hi < a.cap) hi *= 4.0;
    if (g_at(hi) > target) {
      res.trace.termination = Termination::kInfeasible;
      return res;
    }
    double lo = hi > 1.0 ? hi / 4.0 : 1e-8;
    for (int it = 0; it < 50; ++it) {
      const double mid = 0.5 * (lo + hi);
      (g_at(mid) <= target ? hi : lo) = mid;
    }
    g_at(hi);
  }

  auto sum_at = [&](const std::vector<CMat>& v) {
    const auto r = rates_at(v);
    return r[0] + r[1];
  };
  double best = sum_at(anchor);
  std::vector<CMat> best_point = anchor;
  res.trace.objective.push_back(best);

  for (int outer = 0; outer < opts.max_outer; ++outer) {
    LogDetProgram prog;
    for (int k : a.var_edges) prog.matrix_vars.push_back({dims.edge_dim[k], a.cap});
    for (int j = 0; j < 2; ++j)
      if (out_var[j] >= 0)
        prog.matrix_vars.push_back({static_cast<int>(agg_dim[j]), a.cap});

    // Objective: sum over CUs of log2det(Sigma_v) minus the tangent of
    // log2det(Sigma_v | decoded signals) at the anchor.
    for (int j = 0; j < 2; ++j) {
      const CuData& d = cu[j];
      ConcaveTerm obj;
      obj.expr.base = symmetrize(d.signal_full + d.noise_fixed);
      for (const auto& [vk, q] : d.q_terms) obj.expr.terms.push_back({vk, q});
      if (d.inter_var >= 0)
        obj.expr.terms.push_back(
            {d.inter_var, selector(d.x.rows(), d.n_p, d.n_own)});
      prog.objective_concave.push_back(std::move(obj));

      const CMat n0 = sigma_v(d, anchor, false);
      Eigen::LDLT<CMat> ldlt(n0);
      const CMat n0_inv = ldlt.solve(CMat::Identity(n0.rows(), n0.rows()));
      const CMat fixed_part = symmetrize(d.signal_noise_only + d.noise_fixed);
      prog.objective_linear.constant +=
          -log2det(n0) - ((n0_inv * (fixed_part - n0)).trace().real()) / kLn2;
      for (const auto& [vk, q] : d.q_terms)
        prog.objective_linear.matrix_coeffs.emplace_back(
            vk, CMat(-(q.adjoint() * n0_inv * q) / kLn2));
      if (d.inter_var >= 0)
        prog.objective_linear.matrix_coeffs.emplace_back(
            d.inter_var, CMat(-n0_inv.block(d.n_own, d.n_own, d.n_p, d.n_p) / kLn2));
    }

    // RU backhaul constraints, exactly as in the single-CU optimization.
    for (int pos = 0; pos < num_ru_vars; ++pos) {
      const int k = a.var_edges[pos];
      const detail::EdgeConstraintData& d = a.edge_data[pos];
      CMat x0 = d.fixed + anchor[pos];
      for (const auto& [vk, map] : d.maps) x0 += map * anchor[vk] * map.adjoint();
      x0 = symmetrize(x0);
      const CMat x0_inv =
          Eigen::LDLT<CMat>(x0).solve(CMat::Identity(x0.rows(), x0.rows()));
      Inequality c;
      c.label = "backhaul " + std::to_string(k);
      c.linear.constant = log2det(x0) + ((x0_inv * (d.fixed - x0)).trace().real()) / kLn2;
      c.linear.matrix_coeffs.emplace_back(pos, CMat(x0_inv / kLn2));
      for (const auto& [vk, map] : d.maps)
        c.linear.matrix_coeffs.emplace_back(vk, CMat((map.adjoint() * x0_inv * map) / kLn2));
      ConcaveTerm t;
      const int dd = dims.edge_dim[k];
      t.expr.base = CMat::Zero(dd, dd);
      t.expr.terms.push_back({pos, CMat::Identity(dd, dd)});
      c.concave.push_back(std::move(t));
      c.bound = ctilde[k];
      prog.constraints.push_back(std::move(c));
    }

    // Exchange-link constraints.
    for (int j = 0; j < 2; ++j) {
      if (out_var[j] < 0) continue;
      const CuData& d = cu[j];
      const CMat x0 = symmetrize(CMat(anchor[out_var[j]] + sigma_src(d, anchor)));
      const CMat x0_inv =
          Eigen::LDLT<CMat>(x0).solve(CMat::Identity(x0.rows(), x0.rows()));
      Inequality c;
      c.label = "exchange " + std::to_string(j);
      c.linear.constant = log2det(x0) + ((x0_inv * (d.src_fixed - x0)).trace().real()) / kLn2;
      c.linear.matrix_coeffs.emplace_back(out_var[j], CMat(x0_inv / kLn2));
      for (const auto& [vk, q] : d.src_terms)
        c.linear.matrix_coeffs.emplace_back(vk, CMat((q.adjoint() * x0_inv * q) / kLn2));
      ConcaveTerm t;
      t.expr.base = CMat::Zero(agg_dim[j], agg_dim[j]);
      t.expr.terms.push_back({out_var[j], CMat::Identity(agg_dim[j], agg_dim[j])});
      c.concave.push_back(std::move(t));
      c.bound = setup.exchange_capacity[j];
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
    const double value = sum_at(rep.point.x);
    res.trace.objective.push_back(value);
    if (value < best - 1e-7) {
      res.trace.monotone = false;
      break;
    }
    const double gain = value - best;
    best = std::max(best, value);
    best_point = rep.point.x;
    anchor = rep.point.x;
    if (gain < opts.rate_tol) break;
  }

  for (int p = 0; p < num_ru_vars; ++p) res.config.omega[a.var_edges[p]] = best_point[p];
  for (int j = 0; j < 2; ++j)
    if (out_var[j] >= 0) res.inter_omega[j] = best_point[out_var[j]];
  res.per_cu_rate = rates_at(best_point);
  res.sum_rate = res.per_cu_rate[0] + res.per_cu_rate[1];
  bool ok = res.trace.termination != Termination::kInfeasible;
  for (int p = 0; ok && p < num_ru_vars; ++p)
    ok = detail::edge_rate(a, p, best_point) <= ctilde[a.var_edges[p]] + 1e-6;
  for (int j = 0; ok && j < 2; ++j)
    if (out_var[j] >= 0) ok = exchange_rate(j, best_point) <= setup.exchange_capacity[j] + 1e-6;
  res.feasible = ok;
  return res;
}

}  // namespace cran
