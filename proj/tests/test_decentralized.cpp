#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "cran/decentralized.hpp"
#include "cran/dpr.hpp"
#include "cran/scenario.hpp"

using namespace cran;

namespace {

std::shared_ptr<Topology> chain_topology() {
  std::vector<Node> nodes = {{1, NodeKind::RU, 1, false},
                             {2, NodeKind::RU, 1, false},
                             {3, NodeKind::CU, 0, false}};
  std::vector<Edge> edges = {{1, 2, 1.0}, {2, 3, 1.0}};
  return std::make_shared<Topology>(nodes, edges);
}

ActiveEdgeSet chain_active(const Topology& topo) {
  RoutingPartition part;
  part.layers = {{1}, {2}, {3}};
  return ActiveEdgeSet(topo, part);
}

CMat random_cvec(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, std::sqrt(0.5));
  CMat v(n, 1);
  for (int i = 0; i < n; ++i) v(i, 0) = cxd(g(rng), g(rng));
  return v;
}

}  // namespace

TEST_CASE("effective channel of a leaf is the physical channel") {
  Scenario sc = hierarchical_scenario(3, 2.0, 2, 0.0);
  PreparedScenario prep = prepare(sc);
  const ChannelRealization ch = sample_channel(*prep.topology, 2, sc.p_tx, 3);
  const int leaf = 1;
  const EffectiveChannel eff = effective_channel(leaf, prep.active, {}, ch);
  CHECK((eff.h - ch.h_per_ru.at(leaf)).norm() < 1e-12);
  CHECK((eff.sigma_n - CMat::Identity(1, 1)).norm() < 1e-12);
}

TEST_CASE("effective channel along a scalar chain") {
  auto topo = chain_topology();
  ActiveEdgeSet active = chain_active(*topo);
  const ChannelRealization ch = sample_channel(*topo, 1, 1.0, 8);
  const double w = 0.7;
  std::vector<CMat> omega = {w * CMat::Identity(1, 1)};
  const EffectiveChannel eff = effective_channel(2, active, omega, ch);
  REQUIRE(eff.h.rows() == 2);
  // Node 2 stacks its own antenna above the decompressed stream of node 1.
  CHECK((eff.h.row(0) - ch.h_per_ru.at(2)).norm() < 1e-12);
  CHECK((eff.h.row(1) - ch.h_per_ru.at(1)).norm() < 1e-12);
  CMat want = CMat::Zero(2, 2);
  want(0, 0) = 1.0;
  want(1, 1) = 1.0 + w;
  CHECK((eff.sigma_n - want).norm() < 1e-10);
}

TEST_CASE("water-filling: scalar oracle") {
  EffectiveChannel eff;
  eff.h = CMat::Identity(1, 1);
  eff.sigma_n = CMat::Identity(1, 1);
  const CMat sigma_x = CMat::Identity(1, 1);  // lambda = 2
  const CMat om = waterfill_ff(eff, sigma_x, 1.0, 1e7);
  CHECK(om(0, 0).real() == Catch::Approx(2.0).margin(1e-6));
  const double g = std::log2((1.0 + 1.0 + om(0, 0).real()) / om(0, 0).real());
  CHECK(g == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("water-filling: signal-free direction carries no rate") {
  EffectiveChannel eff;
  eff.h = CMat::Zero(1, 1);
  eff.sigma_n = CMat::Identity(1, 1);
  const CMat om = waterfill_ff(eff, CMat::Identity(1, 1), 1.0, 1e7);
  CHECK(om(0, 0).real() == Catch::Approx(1e7));
}

TEST_CASE("water-filling meets the capacity with equality") {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int rep = 0; rep < 40; ++rep) {
    const int d = 3, n_m = 3;
    EffectiveChannel eff;
    eff.h = CMat(d, n_m);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < n_m; ++j) eff.h(i, j) = cxd(g(rng), g(rng));
    CMat a = CMat(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) a(i, j) = cxd(g(rng), g(rng));
    eff.sigma_n = symmetrize(a * a.adjoint() + 0.5 * CMat::Identity(d, d));
    const CMat sigma_x = 2.0 * CMat::Identity(n_m, n_m);
    const double ctilde = 1.5;
    const CMat om = waterfill_ff(eff, sigma_x, ctilde, 1e7);
    const CMat sr = symmetrize(eff.h * sigma_x * eff.h.adjoint() + eff.sigma_n);
    const double rate = log2det(sr + om) - log2det(om);
    CHECK(std::abs(rate - ctilde) < 1e-6);
  }
}

TEST_CASE("water-filling is optimal for the one-edge problem") {
  // With no side information available the per-edge covariance problem and
  // the water-filling solution optimize the same objective.
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int rep = 0; rep < 5; ++rep) {
    const int d = 2, n_m = 2;
    EffectiveChannel eff;
    eff.h = CMat(d, n_m);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < n_m; ++j) eff.h(i, j) = cxd(g(rng), g(rng));
    eff.sigma_n = CMat::Identity(d, d);
    const CMat sigma_x = CMat::Identity(n_m, n_m);
    const double ctilde = 2.0;
    const CMat hxh = symmetrize(eff.h * sigma_x * eff.h.adjoint());
    const CMat sr = symmetrize(hxh + eff.sigma_n);

    const CMat om_wf = waterfill_ff(eff, sigma_x, ctilde, 1e7);
    const CMat om_mm = detail::dec_edge_mm(sr, eff.sigma_n, sr, ctilde, 1e7, {});
    const auto value = [&](const CMat& om) {
      return log2det(sr + om) - log2det(eff.sigma_n + om);
    };
    CHECK(value(om_wf) == Catch::Approx(value(om_mm)).margin(1e-4));
  }
}

TEST_CASE("side-information covariances: hand oracle on a fork") {
  std::vector<Node> nodes = {{1, NodeKind::RU, 1, false},
                             {2, NodeKind::RU, 1, false},
                             {3, NodeKind::RU, 1, false},
                             {4, NodeKind::CU, 0, false}};
  std::vector<Edge> edges = {{1, 3, 1.0}, {2, 3, 1.0}, {3, 4, 1.0}};
  Topology topo(nodes, edges);
  RoutingPartition part;
  part.layers = {{1, 2}, {3}, {4}};
  ActiveEdgeSet active(topo, part);
  const double p = 1.5, w1 = 0.4, w2 = 0.9;
  const ChannelRealization ch = sample_channel(topo, 1, p, 12);
  std::vector<CMat> omega = {w1 * CMat::Identity(1, 1), w2 * CMat::Identity(1, 1)};

  const SideInfo si = sideinfo_covariances(3, {0}, omega, active, ch);
  const cxd h1 = ch.h_per_ru.at(1)(0, 0);
  REQUIRE(si.sigma_v.rows() == 1);
  CHECK(si.sigma_v(0, 0).real() == Catch::Approx(std::norm(h1) * p + 1.0 + w1).margin(1e-10));
  CHECK((si.sigma_xv - ch.sigma_x * ch.h_per_ru.at(1).adjoint()).norm() < 1e-10);
  // Node 3 stacks [y3; u(1,3); u(2,3)]; only the middle row shares noise
  // with the side-information stream.
  REQUIRE(si.sigma_nv.rows() == 3);
  CHECK(std::abs(si.sigma_nv(0, 0)) < 1e-12);
  CHECK(si.sigma_nv(1, 0).real() == Catch::Approx(1.0 + w1).margin(1e-10));
  CHECK(std::abs(si.sigma_nv(2, 0)) < 1e-12);
}

TEST_CASE("signal statistics match a Monte-Carlo simulation") {
  auto topo = chain_topology();
  ActiveEdgeSet active = chain_active(*topo);
  const double p = 2.0, w = 0.6;
  const ChannelRealization ch = sample_channel(*topo, 2, p, 21);
  const SignalDimensions dims = signal_dimensions(active);
  SignalFlow sf(active, dims, ch, identity_processors(active, dims));
  std::vector<CMat> omega = {w * CMat::Identity(1, 1), 0.3 * CMat::Identity(1, 1)};

  const SignalFlow::Maps& m = sf.node_maps(2);
  const CMat want = sf.covariance(m, ch.sigma_x, omega);

  std::mt19937_64 rng(5);
  const int trials = 200000;
  CMat acc = CMat::Zero(2, 2);
  const double sx = std::sqrt(p), sq = std::sqrt(w);
  for (int t = 0; t < trials; ++t) {
    const CMat x = sx * random_cvec(2, rng);
    const CMat z = random_cvec(2, rng);
    const CMat q = sq * random_cvec(1, rng);
    // r_2 = [y_2; y_1 + q_1] with y_i = h_i x + z_i.
    CMat r(2, 1);
    r(1, 0) = (ch.h_per_ru.at(1) * x)(0, 0) + z(0, 0) + q(0, 0);
    r(0, 0) = (ch.h_per_ru.at(2) * x)(0, 0) + z(1, 0);
    acc += r * r.adjoint();
  }
  acc /= trials;
  CHECK((acc - want).norm() <= 0.02 * want.norm());
}

TEST_CASE("single-edge network: all three variants agree with water-filling") {
  std::vector<Node> nodes = {{1, NodeKind::RU, 2, false}, {2, NodeKind::CU, 0, false}};
  std::vector<Edge> edges = {{1, 2, 1.5}};
  auto topo = std::make_shared<Topology>(nodes, edges);
  RoutingPartition part;
  part.layers = {{1}, {2}};
  ActiveEdgeSet active(*topo, part);
  const ChannelRealization ch = sample_channel(*topo, 2, 1.0, 33);
  const std::vector<double> ctilde = {1.5};

  const DecResult ff = optimize_dec_ff(ch, active, ctilde, default_order(active));
  const DecResult ffb = optimize_ff_fb(ch, active, ctilde, default_order(active));
  const DecResult si = optimize_dec_si(ch, active, ctilde, default_order(active));
  REQUIRE(ff.feasible);
  CHECK(ffb.sum_rate == Catch::Approx(ff.sum_rate).margin(1e-3));
  CHECK(si.sum_rate == Catch::Approx(ffb.sum_rate).margin(1e-6));

  const EffectiveChannel eff = effective_channel(1, active, {}, ch);
  const CMat om = waterfill_ff(eff, ch.sigma_x, 1.5, 1e7);
  DprConfig cfg;
  cfg.processors = identity_processors(active, signal_dimensions(active));
  cfg.omega = {om};
  CHECK(ff.sum_rate == Catch::Approx(dpr_sum_rate(cfg, ch, active)).margin(1e-9));
}

TEST_CASE("variant ordering and the cut-set upper bound") {
  for (std::uint64_t seed : {41ull, 42ull, 43ull}) {
    Scenario sc = hierarchical_scenario(4, 1.5, 3, 5.0);
    PreparedScenario prep = prepare(sc);
    const ChannelRealization ch = sample_channel(*prep.topology, 3, sc.p_tx, seed);
    const OptimizationOrder order = default_order(prep.active);
    const DecResult ff = optimize_dec_ff(ch, prep.active, prep.ctilde, order);
    const DecResult ffb = optimize_ff_fb(ch, prep.active, prep.ctilde, order);
    const DecResult si = optimize_dec_si(ch, prep.active, prep.ctilde, order);
    const double bound = cutset_upper_bound(sc, ch);
    REQUIRE(ff.feasible);
    REQUIRE(ffb.feasible);
    REQUIRE(si.feasible);
    CHECK(ff.sum_rate <= ffb.sum_rate + 1e-6);
    CHECK(ffb.sum_rate <= si.sum_rate + 1e-6);
    CHECK(si.sum_rate <= bound + 1e-6);
  }
}
