#pragma once

// Experiment scenarios: the hierarchical three-layer network, the two-CU
// variant with a shared layer-2 RU set, and the cut-set upper bound.

#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cran/channel.hpp"
#include "cran/common.hpp"
#include "cran/dpr.hpp"
#include "cran/multi_cu.hpp"
#include "cran/topology.hpp"

namespace cran {

enum class SchemeKind { kMf, kDprOpt, kDprRank, kDprNotOpt, kDecFf, kDecFfFb, kDecSi };

struct SchemeSpec {
  SchemeKind kind = SchemeKind::kDprOpt;
  int rank = 1;  // only for the rank-limited scheme
};

inline SchemeSpec parse_scheme(const std::string& name) {
  if (name == "MF") return {SchemeKind::kMf, 1};
  if (name == "DPR-opt") return {SchemeKind::kDprOpt, 1};
  if (name == "DPR-not-opt") return {SchemeKind::kDprNotOpt, 1};
  if (name == "DPR-dec-FF") return {SchemeKind::kDecFf, 1};
  if (name == "DPR-dec-FF-FB") return {SchemeKind::kDecFfFb, 1};
  if (name == "DPR-dec-SI") return {SchemeKind::kDecSi, 1};
  const std::string prefix = "DPR-rank-";
  if (name.rfind(prefix, 0) == 0) {
    const int d = std::stoi(name.substr(prefix.size()));
    if (d < 1) throw ValidationError("invalid rank in scheme name " + name);
    return {SchemeKind::kDprRank, d};
  }
  throw ValidationError("unknown scheme " + name);
}

inline std::string scheme_name(const SchemeSpec& s) {
  switch (s.kind) {
    case SchemeKind::kMf: return "MF";
    case SchemeKind::kDprOpt: return "DPR-opt";
    case SchemeKind::kDprRank: return "DPR-rank-" + std::to_string(s.rank);
    case SchemeKind::kDprNotOpt: return "DPR-not-opt";
    case SchemeKind::kDecFf: return "DPR-dec-FF";
    case SchemeKind::kDecFfFb: return "DPR-dec-FF-FB";
    case SchemeKind::kDecSi: return "DPR-dec-SI";
  }
  throw ValidationError("unknown scheme kind");
}

struct Scenario {
  Topology topology;
  RoutingPartition partition;
  int num_ms = 0;
  double p_tx = 1.0;                   // linear scale
  std::vector<double> edge_capacity;   // per topology edge, bits/s/Hz
  double delay_t = 0.0;                // 0 means T = D
  std::vector<SchemeSpec> schemes;
  int trials = 1;
  std::uint64_t seed = 0;
  std::optional<MultiCuSetup> multi_cu;

  void validate() const {
    if (num_ms < 1) throw ValidationError("scenario needs at least one MS");
    if (trials < 1) throw ValidationError("scenario needs at least one trial");
    if (p_tx <= 0) throw ValidationError("transmit power must be positive");
    if (edge_capacity.size() != topology.edges().size())
      throw ValidationError("per-edge capacity list does not match the topology");
    for (double c : edge_capacity)
      if (c < 0) throw ValidationError("capacities must be nonnegative");
  }
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

// Build the topology with the scenario's capacities applied and the
// corresponding active edge set and effective capacities.
struct PreparedScenario {
  std::shared_ptr<Topology> topology;  // owns the storage the view points at
  ActiveEdgeSet active;
  std::vector<double> ctilde;
};

inline PreparedScenario prepare(const Scenario& sc) {
  sc.validate();
  std::vector<Edge> edges = sc.topology.edges();
  for (size_t k = 0; k < edges.size(); ++k) edges[k].capacity = sc.edge_capacity[k];
  auto topo = std::make_shared<Topology>(sc.topology.nodes(), edges);
  ActiveEdgeSet active(*topo, sc.partition);
  const double t = sc.delay_t > 0 ? sc.delay_t : static_cast<double>(depth(active).depth);
  std::vector<double> ctilde = effective_capacity(active, t);
  return PreparedScenario{std::move(topo), std::move(active), std::move(ctilde)};
}

// Hierarchical three-layer network: N single-antenna layer-1 RUs assigned
// round-robin to three layer-2 RUs, which connect to one CU.  Deactivating
// a layer-2 RU zeroes the capacity of its link to the CU.
inline Scenario hierarchical_scenario(int n, double c, int n_m, double p_tx_db,
                                      const std::vector<int>& deactivated = {}) {
  if (n < 3) throw ValidationError("hierarchical scenario needs at least 3 layer-1 RUs");
  Scenario sc;
  std::vector<Node> nodes;
  for (int i = 1; i <= n + 3; ++i) nodes.push_back({i, NodeKind::RU, 1, false});
  nodes.push_back({n + 4, NodeKind::CU, 0, false});
  std::vector<Edge> edges;
  for (int i = 1; i <= n; ++i) edges.push_back({i, n + 1 + (i - 1) % 3, c});
  std::set<int> off(deactivated.begin(), deactivated.end());
  for (int j = n + 1; j <= n + 3; ++j) edges.push_back({j, n + 4, off.count(j) ? 0.0 : c});
  sc.topology = Topology(nodes, edges);
  RoutingPartition part;
  part.layers.resize(3);
  for (int i = 1; i <= n; ++i) part.layers[0].push_back(i);
  for (int j = n + 1; j <= n + 3; ++j) part.layers[1].push_back(j);
  part.layers[2].push_back(n + 4);
  sc.partition = part;
  sc.num_ms = n_m;
  sc.p_tx = db_to_linear(p_tx_db);
  for (const Edge& e : sc.topology.edges()) sc.edge_capacity.push_back(e.capacity);
  return sc;
}

// Two-CU network: N layer-1 RUs chained to N layer-2 RUs, each layer-2 RU
// connected to both CUs; the CUs exchange over duplex links of capacity
// c_cu each way.  MS subsets are decoded by CU 1 and CU 2 respectively.
inline Scenario multi_cu_scenario(int n, double c_ru, double c_cu, int n_m1, int n_m2,
                                  double p_tx_db) {
  if (n < 1) throw ValidationError("two-CU scenario needs at least one layer-1 RU");
  if (n_m1 < 1 || n_m2 < 1) throw ValidationError("each CU needs a nonempty MS subset");
  Scenario sc;
  const int n_r = 2 * n;
  std::vector<Node> nodes;
  for (int i = 1; i <= n_r; ++i) nodes.push_back({i, NodeKind::RU, 1, false});
  nodes.push_back({n_r + 1, NodeKind::CU, 0, false});
  nodes.push_back({n_r + 2, NodeKind::CU, 0, false});
  std::vector<Edge> edges;
  for (int i = 1; i <= n; ++i) edges.push_back({i, n + i, c_ru});
  for (int j = n + 1; j <= n_r; ++j) {
    edges.push_back({j, n_r + 1, c_ru});
    edges.push_back({j, n_r + 2, c_ru});
  }
  sc.topology = Topology(nodes, edges);
  RoutingPartition part;
  part.layers.resize(3);
  for (int i = 1; i <= n; ++i) part.layers[0].push_back(i);
  for (int j = n + 1; j <= n_r; ++j) part.layers[1].push_back(j);
  part.layers[2] = {n_r + 1, n_r + 2};
  sc.partition = part;
  sc.num_ms = n_m1 + n_m2;
  sc.p_tx = db_to_linear(p_tx_db);
  for (const Edge& e : sc.topology.edges()) sc.edge_capacity.push_back(e.capacity);
  MultiCuSetup setup;
  setup.cu_ids = {n_r + 1, n_r + 2};
  for (int m = 0; m < n_m1; ++m) setup.decoded_ms[n_r + 1].push_back(m);
  for (int m = 0; m < n_m2; ++m) setup.decoded_ms[n_r + 2].push_back(n_m1 + m);
  setup.exchange_capacity = {c_cu, c_cu};
  sc.multi_cu = setup;
  return sc;
}

// Cut-set upper bound: the minimum of the capacity of the cut between the
// CU's neighbors and the CU, and the rate achievable if every RU had a
// direct CU link carrying its total outgoing capacity.
inline double cutset_upper_bound(const Scenario& sc, const ChannelRealization& ch,
                                 const MmOptions& opts = {}) {
  if (sc.multi_cu) throw UnsupportedInputError("cut-set bound defined for single-CU scenarios");
  PreparedScenario p = prepare(sc);
  const auto cus = p.topology->cu_ids();
  if (cus.size() != 1) throw UnsupportedInputError("cut-set bound requires exactly one CU");
  const int cu = cus.front();

  double cut = 0.0;
  for (int k : p.active.gamma_in(cu)) cut += p.ctilde[k];
  if (cut <= 0) return 0.0;

  // Star network: same RUs, direct links to the CU with each RU's total
  // outgoing effective capacity.
  std::vector<Node> nodes = p.topology->nodes();
  std::vector<Edge> edges;
  std::vector<double> caps;
  for (const Node& nd : nodes) {
    if (nd.kind != NodeKind::RU) continue;
    double total = 0.0;
    for (int k : p.active.gamma_out(nd.id)) total += p.ctilde[k];
    edges.push_back({nd.id, cu, total});
    caps.push_back(total);
  }
  const auto star = std::make_shared<Topology>(nodes, edges);
  RoutingPartition part;
  part.layers.resize(2);
  for (const Node& nd : nodes)
    part.layers[nd.kind == NodeKind::RU ? 0 : 1].push_back(nd.id);
  ActiveEdgeSet star_active(*star, part);
  const DprResult direct = optimize_dpr_opt(ch, star_active, caps, opts);
  return std::min(cut, direct.sum_rate);
}

}  // namespace cran
