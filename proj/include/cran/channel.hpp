#pragma once

// Uplink MIMO channel model: seeded Rayleigh sampling, transmit covariance
// and received-signal covariances.

#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include "cran/common.hpp"
#include "cran/linalg.hpp"
#include "cran/topology.hpp"

namespace cran {

// SplitMix64 step; used to derive independent per-trial sub-streams from a
// master seed so trial t is reproducible regardless of execution order.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t sub_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t s = master;
  std::uint64_t a = splitmix64(s);
  s = master ^ (0xD1B54A32D192ED03ull * (index + 1));
  return a ^ splitmix64(s);
}

struct ChannelRealization {
  std::map<int, CMat> h_per_ru;  // H_i, n_R,i x n_M, node id -> matrix
  CMat h;                        // stacked in RU declaration order
  CMat sigma_x;                  // block diagonal n_M x n_M
  std::vector<int> ru_order;     // row-block order of the stack
  std::vector<int> ms_antennas;

  int total_ms_antennas() const { return static_cast<int>(sigma_x.rows()); }
};

// Each entry of H_i i.i.d. CN(0,1): real and imaginary parts N(0, 1/2).
// Relay-only nodes get all-zero matrices.
inline ChannelRealization sample_channel(const Topology& topo, const std::vector<int>& ms_antennas,
                                         const CMat& sigma_x, std::uint64_t seed) {
  int n_m = 0;
  for (int a : ms_antennas) {
    if (a <= 0) throw ValidationError("MS antenna count must be positive");
    n_m += a;
  }
  if (sigma_x.rows() != n_m || sigma_x.cols() != n_m)
    throw ShapeError("sample_channel: sigma_x dimension mismatch");

  std::mt19937_64 rng(sub_seed(seed, 0));
  std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));

  ChannelRealization ch;
  ch.sigma_x = sigma_x;
  ch.ms_antennas = ms_antennas;
  std::vector<CMat> blocks;
  for (const Node& n : topo.nodes()) {
    if (n.kind != NodeKind::RU) continue;
    CMat hi = CMat::Zero(n.antennas, n_m);
    if (!n.relay_only) {
      for (int r = 0; r < hi.rows(); ++r)
        for (int c = 0; c < hi.cols(); ++c) {
          const double re = gauss(rng);
          const double im = gauss(rng);
          hi(r, c) = cxd(re, im);
        }
    }
    ch.h_per_ru[n.id] = hi;
    ch.ru_order.push_back(n.id);
    blocks.push_back(hi);
  }
  ch.h = vstack(blocks);
  return ch;
}

inline ChannelRealization sample_channel(const Topology& topo, int num_ms, double p_tx,
                                         std::uint64_t seed) {
  std::vector<int> antennas(num_ms, 1);
  CMat sigma_x = p_tx * CMat::Identity(num_ms, num_ms);
  return sample_channel(topo, antennas, sigma_x, seed);
}

// Sigma_y = H Sigma_x H' + I over the stacked RU observation.
inline CMat received_covariance(const ChannelRealization& ch) {
  return symmetrize(ch.h * ch.sigma_x * ch.h.adjoint()) +
         CMat::Identity(ch.h.rows(), ch.h.rows());
}

// Per-RU marginal Sigma_y_i = H_i Sigma_x H_i' + I.
inline CMat received_covariance(const ChannelRealization& ch, int ru_id) {
  auto it = ch.h_per_ru.find(ru_id);
  if (it == ch.h_per_ru.end()) throw LookupError("no channel for node " + std::to_string(ru_id));
  const CMat& hi = it->second;
  return symmetrize(hi * ch.sigma_x * hi.adjoint()) + CMat::Identity(hi.rows(), hi.rows());
}

}  // namespace cran
