#pragma once

// Linear signal propagation through the DPR backhaul.  Two equivalent
// views are provided:
//   * SignalFlow: per-node recursion r_i = [y_i; u_e'...] expressed as
//     linear maps over the stacked (x, z, q) vectors; used for covariance
//     assembly, effective channels and side-information bookkeeping.
//   * transfer_matrices: the block C (I - F)^-1 E construction, which
//     expresses the sink observation as T y + T~ q.

#include <map>
#include <set>
#include <vector>

#include "cran/channel.hpp"
#include "cran/common.hpp"
#include "cran/linalg.hpp"
#include "cran/topology.hpp"

namespace cran {

// Per-active-edge linear processor L_e (d_e x d_tail) and quantization
// covariance Omega_e (d_e x d_e), indexed like the active edge list.
struct DprConfig {
  std::vector<CMat> processors;  // L_e
  std::vector<CMat> omega;       // Omega_e
};

inline std::vector<CMat> identity_processors(const ActiveEdgeSet& active,
                                             const SignalDimensions& dims) {
  std::vector<CMat> out;
  out.reserve(active.size());
  for (int k = 0; k < active.size(); ++k) {
    int dt = dims.node_dim.at(active.edge(k).tail);
    out.push_back(CMat::Identity(dims.edge_dim[k], dt));
  }
  return out;
}

class SignalFlow {
 public:
  struct Maps {
    CMat x;  // rows x n_M
    CMat z;  // rows x total RU antennas
    CMat q;  // rows x total edge dimensions
  };

  SignalFlow(const ActiveEdgeSet& active, const SignalDimensions& dims,
             const ChannelRealization& ch, const std::vector<CMat>& processors)
      : active_(&active), dims_(dims) {
    const Topology& topo = active.topology();
    n_x_ = ch.total_ms_antennas();
    n_z_ = 0;
    for (const Node& n : topo.nodes()) {
      z_offset_[n.id] = n_z_;
      n_z_ += n.antennas;
    }
    n_q_ = 0;
    q_offset_.resize(active.size());
    for (int k = 0; k < active.size(); ++k) {
      q_offset_[k] = n_q_;
      n_q_ += dims.edge_dim[k];
    }

    edge_maps_.resize(active.size());
    for (int id : topo.topological_order()) {
      const Node& node = topo.node(id);
      Maps r;
      const int d_i = dims.node_dim.at(id);
      r.x = CMat::Zero(d_i, n_x_);
      r.z = CMat::Zero(d_i, n_z_);
      r.q = CMat::Zero(d_i, n_q_);
      int row = 0;
      if (node.antennas > 0) {
        r.x.middleRows(row, node.antennas) = ch.h_per_ru.at(id);
        r.z.block(row, z_offset_[id], node.antennas, node.antennas) =
            CMat::Identity(node.antennas, node.antennas);
        row += node.antennas;
      }
      for (int k : active.gamma_in(id)) {
        const int de = dims.edge_dim[k];
        r.x.middleRows(row, de) = edge_maps_[k].x;
        r.z.middleRows(row, de) = edge_maps_[k].z;
        r.q.middleRows(row, de) = edge_maps_[k].q;
        row += de;
      }
      node_maps_[id] = r;
      for (int k : active.gamma_out(id)) {
        const CMat& L = processors[k];
        if (L.rows() != dims.edge_dim[k] || L.cols() != d_i)
          throw ShapeError("SignalFlow: processor dimension mismatch on edge " + std::to_string(k));
        Maps u;
        u.x = L * r.x;
        u.z = L * r.z;
        u.q = L * r.q;
        u.q.block(0, q_offset_[k], dims.edge_dim[k], dims.edge_dim[k]) +=
            CMat::Identity(dims.edge_dim[k], dims.edge_dim[k]);
        edge_maps_[k] = u;
      }
    }
  }

  const Maps& node_maps(int id) const { return node_maps_.at(id); }
  const Maps& edge_maps(int k) const { return edge_maps_.at(k); }
  int x_dim() const { return n_x_; }
  int z_dim() const { return n_z_; }
  int q_dim() const { return n_q_; }
  int q_offset(int k) const { return q_offset_.at(k); }
  int edge_dim(int k) const { return dims_.edge_dim.at(k); }

  CMat stack_q(const std::vector<CMat>& omega) const {
    std::vector<CMat> blocks;
    for (int k = 0; k < static_cast<int>(omega.size()); ++k) blocks.push_back(omega[k]);
    return block_diag(blocks);
  }

  // Covariance of a signal with the given maps: A Sigma_x A' + Z Z' +
  // Q diag(Omega) Q'.
  CMat covariance(const Maps& m, const CMat& sigma_x, const std::vector<CMat>& omega) const {
    CMat out = m.x * sigma_x * m.x.adjoint() + m.z * m.z.adjoint();
    for (size_t k = 0; k < omega.size(); ++k) {
      const int de = dims_.edge_dim[k];
      if (de == 0) continue;
      const CMat qk = m.q.middleCols(q_offset_[k], de);
      out += qk * omega[k] * qk.adjoint();
    }
    return symmetrize(out);
  }

  CMat cross_covariance(const Maps& a, const Maps& b, const CMat& sigma_x,
                        const std::vector<CMat>& omega) const {
    CMat out = a.x * sigma_x * b.x.adjoint() + a.z * b.z.adjoint();
    for (size_t k = 0; k < omega.size(); ++k) {
      const int de = dims_.edge_dim[k];
      if (de == 0) continue;
      out += a.q.middleCols(q_offset_[k], de) * omega[k] *
             b.q.middleCols(q_offset_[k], de).adjoint();
    }
    return out;
  }

  // Noise-only covariance (z and q contributions), i.e. the covariance of
  // the signal with x excluded.
  CMat noise_covariance(const Maps& m, const std::vector<CMat>& omega) const {
    CMat out = m.z * m.z.adjoint();
    for (size_t k = 0; k < omega.size(); ++k) {
      const int de = dims_.edge_dim[k];
      if (de == 0) continue;
      const CMat qk = m.q.middleCols(q_offset_[k], de);
      out += qk * omega[k] * qk.adjoint();
    }
    return symmetrize(out);
  }

  static Maps vstack_maps(const std::vector<Maps>& parts) {
    Maps out;
    std::vector<CMat> xs, zs, qs;
    for (const Maps& p : parts) {
      xs.push_back(p.x);
      zs.push_back(p.z);
      qs.push_back(p.q);
    }
    out.x = vstack(xs);
    out.z = vstack(zs);
    out.q = vstack(qs);
    return out;
  }

 private:
  const ActiveEdgeSet* active_;
  SignalDimensions dims_;
  int n_x_ = 0, n_z_ = 0, n_q_ = 0;
  std::map<int, int> z_offset_;
  std::vector<int> q_offset_;
  std::map<int, Maps> node_maps_;
  std::vector<Maps> edge_maps_;
};

// Block transfer matrices of the sink observation over the subnetwork of
// the sink's ascendants: r_sink = T y_sub + T~ q_sub.
struct TransferMatrices {
  CMat t;       // rows x (stacked antennas of sub_nodes)
  CMat ttilde;  // rows x (stacked d_e of sub_edges)
  CMat c, f, e;
  std::vector<int> sub_nodes;  // topology declaration order
  std::vector<int> sub_edges;  // active edge indices, declaration order
};

inline TransferMatrices transfer_matrices(const ActiveEdgeSet& active, const SignalDimensions& dims,
                                          const std::vector<CMat>& processors, int sink) {
  const Topology& topo = active.topology();
  std::set<int> asc = ascendants(active, sink);
  std::set<int> sub = asc;
  sub.insert(sink);

  TransferMatrices out;
  for (const Node& n : topo.nodes())
    if (sub.count(n.id)) out.sub_nodes.push_back(n.id);
  for (int k = 0; k < active.size(); ++k) {
    const Edge& e = active.edge(k);
    if (asc.count(e.tail) && sub.count(e.head)) out.sub_edges.push_back(k);
  }

  // Offsets inside the stacked sub-vectors.
  std::map<int, int> y_off;
  int n_y = 0;
  for (int id : out.sub_nodes) {
    y_off[id] = n_y;
    n_y += topo.node(id).antennas;
  }
  std::map<int, int> q_off;  // active edge index -> offset
  int n_q = 0;
  for (int k : out.sub_edges) {
    q_off[k] = n_q;
    n_q += dims.edge_dim[k];
  }

  // Column partition of L_e over r_tail(e): [rx | one block per incoming
  // edge of tail, in Gamma_I order].
  auto l_rx = [&](int k) {
    const Edge& e = active.edge(k);
    return processors[k].leftCols(topo.node(e.tail).antennas);
  };
  auto l_in = [&](int k, int k_in) -> CMat {
    const Edge& e = active.edge(k);
    int col = topo.node(e.tail).antennas;
    for (int kk : active.gamma_in(e.tail)) {
      const int d = dims.edge_dim[kk];
      if (kk == k_in) return processors[k].middleCols(col, d);
      col += d;
    }
    throw ShapeError("transfer_matrices: edge not incoming to tail");
  };

  out.f = CMat::Zero(n_q, n_q);
  out.e = CMat::Zero(n_q, n_y);
  for (int ke : out.sub_edges) {
    const Edge& e = active.edge(ke);
    const int r = q_off[ke];
    const int dr = dims.edge_dim[ke];
    if (topo.node(e.tail).antennas > 0)
      out.e.block(r, y_off[e.tail], dr, topo.node(e.tail).antennas) = l_rx(ke);
    for (int kp : out.sub_edges) {
      if (active.edge(kp).head != e.tail) continue;
      out.f.block(r, q_off[kp], dr, dims.edge_dim[kp]) = l_in(ke, kp);
    }
  }

  // C selects the sink's incoming edges among the sub edges.
  int rows_c = 0;
  for (int k : active.gamma_in(sink)) rows_c += dims.edge_dim[k];
  out.c = CMat::Zero(rows_c, n_q);
  int rc = 0;
  for (int k : active.gamma_in(sink)) {
    const int d = dims.edge_dim[k];
    out.c.block(rc, q_off.at(k), d, d) = CMat::Identity(d, d);
    rc += d;
  }

  // F is nilpotent (strictly block-triangular under the topological edge
  // order), so I - F is invertible.
  CMat inv = (CMat::Identity(n_q, n_q) - out.f).partialPivLu().solve(CMat::Identity(n_q, n_q));
  CMat t_cu = out.c * inv * out.e;
  CMat tt_cu = out.c * inv;

  // A sink with its own antennas observes r_sink = [y_sink; u_e...].
  const int na = topo.node(sink).antennas;
  if (na > 0) {
    CMat sel = CMat::Zero(na, n_y);
    sel.block(0, y_off[sink], na, na) = CMat::Identity(na, na);
    out.t = vstack({sel, t_cu});
    out.ttilde = vstack({CMat::Zero(na, n_q), tt_cu});
  } else {
    out.t = t_cu;
    out.ttilde = tt_cu;
  }
  return out;
}

}  // namespace cran
