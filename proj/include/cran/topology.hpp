#pragma once

// Capacitated DAG model of radio units and control units, layered routing
// partitions, active edges, ascendant sets, depth and effective capacities.

#include <algorithm>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "cran/common.hpp"

namespace cran {

enum class NodeKind { RU, CU };

struct Node {
  int id = 0;
  NodeKind kind = NodeKind::RU;
  int antennas = 0;        // n_R,i; 0 for CUs
  bool relay_only = false; // relay nodes keep antennas but have all-zero channel rows
};

struct Edge {
  int tail = 0;
  int head = 0;
  double capacity = 0.0;  // C_e in bits/s/Hz
};

class Topology {
 public:
  Topology() = default;
  Topology(std::vector<Node> nodes, std::vector<Edge> edges)
      : nodes_(std::move(nodes)), edges_(std::move(edges)) {
    validate();
  }

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }

  const Node& node(int id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw LookupError("unknown node id " + std::to_string(id));
    return nodes_[it->second];
  }
  bool has_node(int id) const { return index_.count(id) > 0; }

  std::vector<int> cu_ids() const {
    std::vector<int> out;
    for (const Node& n : nodes_)
      if (n.kind == NodeKind::CU) out.push_back(n.id);
    return out;
  }

  std::vector<int> ru_ids() const {
    std::vector<int> out;
    for (const Node& n : nodes_)
      if (n.kind == NodeKind::RU) out.push_back(n.id);
    return out;
  }

  // Node ids in a topological order of the full edge set.
  std::vector<int> topological_order() const { return topo_order_; }

 private:
  void validate() {
    index_.clear();
    for (size_t i = 0; i < nodes_.size(); ++i) {
      if (index_.count(nodes_[i].id))
        throw ValidationError("duplicate node id " + std::to_string(nodes_[i].id));
      index_[nodes_[i].id] = i;
    }
    bool any_cu = false;
    for (const Node& n : nodes_) any_cu = any_cu || n.kind == NodeKind::CU;
    if (!any_cu) throw ValidationError("topology has no CU");
    for (const Edge& e : edges_) {
      if (!index_.count(e.tail) || !index_.count(e.head))
        throw ValidationError("edge references unknown node");
      if (e.tail == e.head) throw ValidationError("self-loop not allowed");
      if (e.capacity < 0) throw ValidationError("negative edge capacity");
    }
    // Kahn's algorithm; failure to consume every node means a cycle.
    std::map<int, int> indeg;
    std::map<int, std::vector<int>> adj;
    for (const Node& n : nodes_) indeg[n.id] = 0;
    for (const Edge& e : edges_) {
      indeg[e.head]++;
      adj[e.tail].push_back(e.head);
    }
    std::priority_queue<int, std::vector<int>, std::greater<int>> ready;
    for (auto& [id, d] : indeg)
      if (d == 0) ready.push(id);
    topo_order_.clear();
    while (!ready.empty()) {
      int id = ready.top();
      ready.pop();
      topo_order_.push_back(id);
      for (int h : adj[id])
        if (--indeg[h] == 0) ready.push(h);
    }
    if (topo_order_.size() != nodes_.size()) throw ValidationError("graph is not a DAG");
  }

  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::map<int, size_t> index_;
  std::vector<int> topo_order_;
};

struct RoutingPartition {
  std::vector<std::vector<int>> layers;  // V_1 .. V_L; CU(s) in V_L

  void validate(const Topology& topo) const {
    std::set<int> seen;
    for (const auto& layer : layers)
      for (int id : layer) {
        if (!topo.has_node(id)) throw ValidationError("partition references unknown node");
        if (!seen.insert(id).second) throw ValidationError("node appears in two layers");
      }
    if (seen.size() != topo.nodes().size()) throw ValidationError("partition does not cover all nodes");
    if (layers.empty()) throw ValidationError("empty partition");
    std::set<int> last(layers.back().begin(), layers.back().end());
    for (int cu : topo.cu_ids())
      if (!last.count(cu)) throw ValidationError("CU not in the last layer");
  }

  int layer_of(int id) const {
    for (size_t l = 0; l < layers.size(); ++l)
      for (int n : layers[l])
        if (n == id) return static_cast<int>(l);
    throw LookupError("node not in partition");
  }
};

// Active edges of a routing partition, in the topology's edge declaration
// order.  That ordering defines every block layout downstream, so it is
// kept here once and never recomputed.
class ActiveEdgeSet {
 public:
  ActiveEdgeSet(const Topology& topo, const RoutingPartition& partition)
      : topo_(&topo), partition_(partition) {
    partition.validate(topo);
    for (const Node& n : topo.nodes()) {
      layer_[n.id] = partition.layer_of(n.id);
      gamma_in_[n.id];
      gamma_out_[n.id];
    }
    for (size_t k = 0; k < topo.edges().size(); ++k) {
      const Edge& e = topo.edges()[k];
      if (layer_[e.tail] < layer_[e.head]) {
        int local = static_cast<int>(edges_.size());
        edges_.push_back(e);
        topo_edge_index_.push_back(static_cast<int>(k));
        gamma_out_[e.tail].push_back(local);
        gamma_in_[e.head].push_back(local);
      }
    }
    for (const Node& n : topo.nodes())
      if (gamma_in_[n.id].empty()) sources_.push_back(n.id);
  }

  const Topology& topology() const { return *topo_; }
  const RoutingPartition& partition() const { return partition_; }
  const std::vector<Edge>& edges() const { return edges_; }
  int size() const { return static_cast<int>(edges_.size()); }
  const Edge& edge(int k) const { return edges_.at(k); }

  const std::vector<int>& gamma_in(int node) const { return lookup(gamma_in_, node); }
  const std::vector<int>& gamma_out(int node) const { return lookup(gamma_out_, node); }
  const std::vector<int>& sources() const { return sources_; }
  int layer_of(int node) const { return lookup_layer(node); }

  // Active edge indices in a topological order (tail layer ascending,
  // declaration order within a layer).  Declaration order already is
  // topological here because every active edge crosses layers upward.
  std::vector<int> topological_edge_order() const {
    std::vector<int> idx(edges_.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
      return lookup_layer(edges_[a].tail) < lookup_layer(edges_[b].tail);
    });
    return idx;
  }

 private:
  static const std::vector<int>& lookup(const std::map<int, std::vector<int>>& m, int node) {
    auto it = m.find(node);
    if (it == m.end()) throw LookupError("unknown node id " + std::to_string(node));
    return it->second;
  }
  int lookup_layer(int node) const {
    auto it = layer_.find(node);
    if (it == layer_.end()) throw LookupError("unknown node id " + std::to_string(node));
    return it->second;
  }

  const Topology* topo_;
  RoutingPartition partition_;
  std::vector<Edge> edges_;
  std::vector<int> topo_edge_index_;
  std::map<int, std::vector<int>> gamma_in_;
  std::map<int, std::vector<int>> gamma_out_;
  std::map<int, int> layer_;
  std::vector<int> sources_;
};

inline ActiveEdgeSet active_edges(const Topology& topo, const RoutingPartition& partition) {
  return ActiveEdgeSet(topo, partition);
}

// All nodes with a directed active path into `node`, excluding the node
// itself.
inline std::set<int> ascendants(const ActiveEdgeSet& active, int node) {
  active.topology().node(node);  // lookup error on unknown id
  std::set<int> out;
  std::vector<int> stack{node};
  while (!stack.empty()) {
    int cur = stack.back();
    stack.pop_back();
    for (int k : active.gamma_in(cur)) {
      int tail = active.edge(k).tail;
      if (out.insert(tail).second) stack.push_back(tail);
    }
  }
  return out;
}

struct DepthResult {
  int depth = 0;                 // D = max over source nodes
  std::map<int, int> per_node;   // D_i for every node with a path to a CU
};

// Longest-path edge counts from each node to any CU, by DP over the
// reverse topological order.  Every source must reach a CU.
inline DepthResult depth(const ActiveEdgeSet& active) {
  const Topology& topo = active.topology();
  std::map<int, int> dist;  // -1 = cannot reach a CU
  std::vector<int> order = topo.topological_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    int id = *it;
    if (topo.node(id).kind == NodeKind::CU) {
      dist[id] = 0;
      continue;
    }
    int best = -1;
    for (int k : active.gamma_out(id)) {
      int h = active.edge(k).head;
      if (dist.count(h) && dist[h] >= 0) best = std::max(best, dist[h] + 1);
    }
    dist[id] = best;
  }
  DepthResult out;
  for (const Node& n : topo.nodes()) {
    if (dist[n.id] >= 0) out.per_node[n.id] = dist[n.id];
  }
  for (int s : active.sources()) {
    if (topo.node(s).kind == NodeKind::CU) continue;
    // A node with no active edges at all does not participate in the
    // routing strategy and is excluded rather than flagged.
    if (active.gamma_out(s).empty() && active.gamma_in(s).empty()) continue;
    if (!out.per_node.count(s))
      throw ValidationError("source node " + std::to_string(s) + " cannot reach a CU");
    out.depth = std::max(out.depth, out.per_node[s]);
  }
  return out;
}

// Effective per-edge capacity C~_e = C_e * T / D, indexed like the active
// edge list.
inline std::vector<double> effective_capacity(const ActiveEdgeSet& active, double delay_t) {
  if (delay_t <= 0) throw ValidationError("delay T must be positive");
  const int d = depth(active).depth;
  std::vector<double> out(active.size());
  for (int k = 0; k < active.size(); ++k)
    out[k] = active.edge(k).capacity * delay_t / std::max(d, 1);
  return out;
}

struct SignalDimensions {
  std::map<int, int> node_dim;          // d_i
  std::vector<int> edge_dim;            // d_e, indexed like the active edge list
};

// d_i = n_R,i + sum over incoming edges of d_e, computed in topological
// order.  Without rank limits d_e = d_tail(e).
inline SignalDimensions signal_dimensions(const ActiveEdgeSet& active,
                                          const std::map<int, int>* rank_limits = nullptr) {
  const Topology& topo = active.topology();
  SignalDimensions out;
  out.edge_dim.assign(active.size(), 0);
  for (int id : topo.topological_order()) {
    int d = topo.node(id).antennas;
    for (int k : active.gamma_in(id)) d += out.edge_dim[k];
    out.node_dim[id] = d;
    for (int k : active.gamma_out(id)) {
      int de = d;
      if (rank_limits) {
        auto it = rank_limits->find(k);
        if (it != rank_limits->end()) {
          if (it->second < 1 || it->second > d)
            throw ValidationError("rank limit out of range for edge " + std::to_string(k));
          de = it->second;
        }
      }
      out.edge_dim[k] = de;
    }
  }
  return out;
}

// Layering by longest distance from the sources; activates every edge of
// the DAG.
inline RoutingPartition all_edges_active_partition(const Topology& topo) {
  std::map<int, int> level;
  for (int id : topo.topological_order()) {
    int lv = 0;
    for (const Edge& e : topo.edges())
      if (e.head == id && level.count(e.tail)) lv = std::max(lv, level[e.tail] + 1);
    level[id] = lv;
  }
  int max_ru_level = 0;
  for (const Node& n : topo.nodes())
    if (n.kind == NodeKind::RU) max_ru_level = std::max(max_ru_level, level[n.id]);
  RoutingPartition p;
  p.layers.assign(max_ru_level + 2, {});
  for (const Node& n : topo.nodes()) {
    if (n.kind == NodeKind::CU)
      p.layers.back().push_back(n.id);
    else
      p.layers[level[n.id]].push_back(n.id);
  }
  // Drop empty layers (possible when the CU level collides).
  std::vector<std::vector<int>> layers;
  for (auto& l : p.layers)
    if (!l.empty()) layers.push_back(std::move(l));
  p.layers = std::move(layers);
  return p;
}

}  // namespace cran
