#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "cran/dpr.hpp"
#include "cran/multi_cu.hpp"
#include "cran/scenario.hpp"

using namespace cran;

namespace {

struct RandomNetwork {
  std::shared_ptr<Topology> topo;
  ActiveEdgeSet active;
};

// A random layered DAG with 1-antenna relays and a sink CU.  Every node in
// one layer links to at least one node of the next layer.
RandomNetwork random_network(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> layer_count(2, 3), width(1, 3), coin(0, 1);
  std::vector<std::vector<int>> layers(layer_count(rng) + 1);
  std::vector<Node> nodes;
  int next_id = 1;
  for (size_t l = 0; l + 1 < layers.size(); ++l)
    for (int j = 0, w = width(rng); j < w; ++j) {
      nodes.push_back({next_id, NodeKind::RU, 1, false});
      layers[l].push_back(next_id++);
    }
  nodes.push_back({next_id, NodeKind::CU, 0, false});
  layers.back().push_back(next_id);

  std::vector<Edge> edges;
  for (size_t l = 0; l + 1 < layers.size(); ++l)
    for (int tail : layers[l]) {
      const auto& heads = layers[l + 1];
      std::uniform_int_distribution<size_t> pick(0, heads.size() - 1);
      std::set<int> chosen = {heads[pick(rng)]};
      for (int head : heads)
        if (coin(rng) && !chosen.count(head)) chosen.insert(head);
      for (int head : chosen) edges.push_back({tail, head, 1.0});
    }

  auto topo = std::make_shared<Topology>(nodes, edges);
  RoutingPartition part;
  part.layers = layers;
  return {topo, ActiveEdgeSet(*topo, part)};
}

CMat random_cmat(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  CMat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = cxd(g(rng), g(rng));
  return m;
}

CMat random_psd(int n, std::mt19937_64& rng, double ridge = 0.1) {
  const CMat a = random_cmat(n, n, rng);
  return symmetrize(a * a.adjoint() + ridge * CMat::Identity(n, n));
}

DprConfig random_config(const ActiveEdgeSet& active, const SignalDimensions& dims,
                        std::mt19937_64& rng) {
  DprConfig cfg;
  for (int k = 0; k < active.size(); ++k) {
    const int dt = dims.node_dim.at(active.edge(k).tail);
    cfg.processors.push_back(random_cmat(dims.edge_dim[k], dt, rng));
    cfg.omega.push_back(random_psd(dims.edge_dim[k], rng));
  }
  return cfg;
}

}  // namespace

TEST_CASE("transfer matrices reproduce the per-node recursion") {
  std::mt19937_64 rng(101);
  for (int rep = 0; rep < 30; ++rep) {
    RandomNetwork net = random_network(rng);
    const int cu = net.topo->cu_ids().front();
    const SignalDimensions dims = signal_dimensions(net.active);
    const ChannelRealization ch = sample_channel(*net.topo, 2, 1.0, 1000 + rep);
    const DprConfig cfg = random_config(net.active, dims, rng);

    SignalFlow sf(net.active, dims, ch, cfg.processors);
    const TransferMatrices tm = transfer_matrices(net.active, dims, cfg.processors, cu);

    for (int draw = 0; draw < 4; ++draw) {
      const CMat x = random_cmat(sf.x_dim(), 1, rng);
      const CMat z = random_cmat(sf.z_dim(), 1, rng);
      const CMat q = random_cmat(sf.q_dim(), 1, rng);

      const SignalFlow::Maps& m = sf.node_maps(cu);
      const CMat r_rec = m.x * x + m.z * z + m.q * q;

      // Assemble y_sub and q_sub in the transfer-matrix ordering.
      std::vector<CMat> y_parts, q_parts;
      int z_off = 0;
      std::map<int, int> z_offset;
      for (const Node& n : net.topo->nodes()) {
        z_offset[n.id] = z_off;
        z_off += n.antennas;
      }
      for (int id : tm.sub_nodes) {
        const int na = net.topo->node(id).antennas;
        if (na == 0) continue;
        y_parts.push_back(ch.h_per_ru.at(id) * x + z.middleRows(z_offset[id], na));
      }
      for (int k : tm.sub_edges) q_parts.push_back(q.middleRows(sf.q_offset(k), dims.edge_dim[k]));
      const CMat y_sub = y_parts.empty() ? CMat::Zero(0, 1) : vstack(y_parts);
      const CMat q_sub = q_parts.empty() ? CMat::Zero(tm.ttilde.cols(), 1) : vstack(q_parts);

      const CMat r_tm = tm.t * y_sub + tm.ttilde * q_sub;
      REQUIRE(r_rec.rows() == r_tm.rows());
      CHECK((r_rec - r_tm).norm() <= 1e-9 * (1.0 + r_rec.norm()));
    }
  }
}

TEST_CASE("identity reduction preserves all rates") {
  std::mt19937_64 rng(202);
  for (int rep = 0; rep < 20; ++rep) {
    RandomNetwork net = random_network(rng);
    const SignalDimensions dims = signal_dimensions(net.active);
    const ChannelRealization ch = sample_channel(*net.topo, 2, 2.0, 2000 + rep);

    // Square full-rank processors.
    DprConfig cfg;
    for (int k = 0; k < net.active.size(); ++k) {
      const int d = dims.node_dim.at(net.active.edge(k).tail);
      cfg.processors.push_back(random_cmat(d, d, rng) + 3.0 * CMat::Identity(d, d));
      cfg.omega.push_back(random_psd(d, rng));
    }

    const DprConfig reduced = identity_transform(cfg, net.active);
    const double f0 = dpr_sum_rate(cfg, ch, net.active);
    const double f1 = dpr_sum_rate(reduced, ch, net.active);
    CHECK(f1 == Catch::Approx(f0).margin(1e-8 * (1.0 + std::abs(f0))));
    for (int k = 0; k < net.active.size(); ++k) {
      const double g0 = dpr_backhaul_rate(k, cfg, ch, net.active);
      const double g1 = dpr_backhaul_rate(k, reduced, ch, net.active);
      CHECK(g1 == Catch::Approx(g0).margin(1e-8 * (1.0 + std::abs(g0))));
    }
  }
}

TEST_CASE("rates are invariant under unitary reshaping of a processor") {
  std::mt19937_64 rng(303);
  RandomNetwork net = random_network(rng);
  const SignalDimensions dims = signal_dimensions(net.active);
  const ChannelRealization ch = sample_channel(*net.topo, 2, 1.0, 42);
  DprConfig cfg = random_config(net.active, dims, rng);
  const double f0 = dpr_sum_rate(cfg, ch, net.active);
  std::vector<double> g0(net.active.size());
  for (int k = 0; k < net.active.size(); ++k) g0[k] = dpr_backhaul_rate(k, cfg, ch, net.active);

  // Reshaping an edge into the CU leaves every rate unchanged; interior
  // edges would also need their consumers adjusted, so only final edges are
  // touched here.
  const int cu = net.topo->cu_ids().front();
  for (int k : net.active.gamma_in(cu)) {
    const int d = dims.edge_dim[k];
    Eigen::HouseholderQR<CMat> qr(random_cmat(d, d, rng));
    const CMat u = qr.householderQ() * CMat::Identity(d, d);
    cfg.processors[k] = u * cfg.processors[k];
    cfg.omega[k] = symmetrize(u * cfg.omega[k] * u.adjoint());
  }
  CHECK(dpr_sum_rate(cfg, ch, net.active) == Catch::Approx(f0).margin(1e-9 * (1.0 + f0)));
  for (int k = 0; k < net.active.size(); ++k)
    CHECK(dpr_backhaul_rate(k, cfg, ch, net.active) ==
          Catch::Approx(g0[k]).margin(1e-9 * (1.0 + g0[k])));
}

TEST_CASE("scaled-identity baseline saturates every link") {
  Scenario sc = hierarchical_scenario(4, 2.0, 3, 0.0);
  PreparedScenario prep = prepare(sc);
  const ChannelRealization ch = sample_channel(*prep.topology, 3, sc.p_tx, 5);
  const DprResult sol = dpr_not_opt(ch, prep.active, prep.ctilde);
  REQUIRE(sol.feasible);
  for (int k = 0; k < prep.active.size(); ++k) {
    const double g = dpr_backhaul_rate(k, sol.config, ch, prep.active);
    CHECK(std::abs(g - prep.ctilde[k]) < 1e-7);
  }

  // Scalar leaf oracle: omega = sigma_y / (2^C - 1).
  const int leaf = ch.ru_order.front();
  const int k0 = prep.active.gamma_out(leaf).front();
  const double sy = received_covariance(ch, leaf)(0, 0).real();
  const double want = sy / (std::pow(2.0, prep.ctilde[k0]) - 1.0);
  CHECK(sol.config.omega[k0](0, 0).real() == Catch::Approx(want).epsilon(1e-6));
}

TEST_CASE("optimized covariances are feasible, monotone and dominate the baseline") {
  for (std::uint64_t seed : {31ull, 32ull}) {
    Scenario sc = hierarchical_scenario(4, 2.0, 4, 5.0, {6});
    PreparedScenario prep = prepare(sc);
    const ChannelRealization ch = sample_channel(*prep.topology, 4, sc.p_tx, seed);
    const DprResult base = dpr_not_opt(ch, prep.active, prep.ctilde);
    const DprResult opt = optimize_dpr_opt(ch, prep.active, prep.ctilde);
    REQUIRE(opt.feasible);
    CHECK(opt.trace.monotone);
    for (size_t i = 1; i < opt.trace.objective.size(); ++i)
      CHECK(opt.trace.objective[i] >= opt.trace.objective[i - 1] - 1e-7);
    for (int k = 0; k < prep.active.size(); ++k) {
      if (prep.ctilde[k] <= 0.0) continue;
      CHECK(dpr_backhaul_rate(k, opt.config, ch, prep.active) <= prep.ctilde[k] + 1e-6);
    }
    CHECK(opt.sum_rate >= base.sum_rate - 1e-6);
  }
}

TEST_CASE("ample backhaul reaches the full-cooperation limit") {
  Scenario sc = hierarchical_scenario(3, 60.0, 2, 0.0);
  PreparedScenario prep = prepare(sc);
  const ChannelRealization ch = sample_channel(*prep.topology, 2, sc.p_tx, 77);
  const DprResult opt = optimize_dpr_opt(ch, prep.active, prep.ctilde);
  REQUIRE(opt.feasible);
  const double limit = log2det(received_covariance(ch));
  CHECK(opt.sum_rate >= 0.98 * limit);
  CHECK(opt.sum_rate <= limit + 1e-6);
}

TEST_CASE("rank-limited compression never beats the full-dimension solution") {
  Scenario sc = hierarchical_scenario(4, 2.0, 3, 0.0);
  PreparedScenario prep = prepare(sc);
  const ChannelRealization ch = sample_channel(*prep.topology, 3, sc.p_tx, 9);
  const DprResult full = optimize_dpr_opt(ch, prep.active, prep.ctilde);
  std::map<int, int> limits;
  for (int k = 0; k < prep.active.size(); ++k) limits[k] = 1;
  const DprResult rank1 = optimize_dpr_rank(ch, prep.active, prep.ctilde, limits);
  REQUIRE(rank1.feasible);
  // Both runs are local optimizations, so only a band is guaranteed: the
  // truncated scheme stays in the neighborhood of the full one.
  CHECK(rank1.sum_rate <= 1.15 * full.sum_rate);
  CHECK(rank1.sum_rate >= 0.70 * full.sum_rate);
  CHECK(rank1.sum_rate > 0.0);

  // Full-dimension limits reduce to a unitary reshaping plus warm-started
  // re-optimization, which cannot lose rate.
  const SignalDimensions dims = signal_dimensions(prep.active);
  std::map<int, int> full_limits;
  for (int k = 0; k < prep.active.size(); ++k)
    full_limits[k] = dims.node_dim.at(prep.active.edge(k).tail);
  const DprResult same = optimize_dpr_rank(ch, prep.active, prep.ctilde, full_limits);
  REQUIRE(same.feasible);
  CHECK(same.sum_rate >= full.sum_rate - 1e-6);
  for (int k = 0; k < prep.active.size(); ++k) {
    CHECK(rank1.config.processors[k].rows() == 1);
    if (prep.ctilde[k] <= 0.0) continue;
    CHECK(dpr_backhaul_rate(k, rank1.config, ch, prep.active) <= prep.ctilde[k] + 1e-6);
  }
}

TEST_CASE("two-CU rates: generous exchange approaches full sharing") {
  Scenario sc = multi_cu_scenario(2, 40.0, 40.0, 2, 2, 0.0);
  PreparedScenario prep = prepare(sc);
  const ChannelRealization ch = sample_channel(*prep.topology, 4, sc.p_tx, 55);
  const MultiCuResult sol = optimize_multi_cu(ch, prep.active, prep.ctilde, *sc.multi_cu);
  REQUIRE(sol.feasible);

  // With near-lossless links every CU effectively observes y; the rate of
  // CU j is then log2det(I + H Sx H') - log2det(I + H Sx_noise H').
  double want = 0.0;
  for (int j = 0; j < 2; ++j) {
    const CMat sxn = detail::mask_sigma_x(ch, sc.multi_cu->decoded_ms.at(sc.multi_cu->cu_ids[j]));
    const CMat full = received_covariance(ch);
    const CMat cond = symmetrize(ch.h * sxn * ch.h.adjoint() +
                                 CMat::Identity(full.rows(), full.rows()));
    want += log2det(full) - log2det(cond);
  }
  CHECK(sol.sum_rate >= 0.95 * want);
  CHECK(sol.sum_rate <= want + 1e-6);
}

TEST_CASE("two-CU rates: exchange capacity helps") {
  Scenario sc = multi_cu_scenario(2, 1.0, 0.0, 2, 2, 0.0);
  PreparedScenario prep = prepare(sc);
  const ChannelRealization ch = sample_channel(*prep.topology, 4, sc.p_tx, 66);
  const MultiCuResult none = optimize_multi_cu(ch, prep.active, prep.ctilde, *sc.multi_cu);
  MultiCuSetup with = *sc.multi_cu;
  with.exchange_capacity = {7.0, 7.0};
  const MultiCuResult rich = optimize_multi_cu(ch, prep.active, prep.ctilde, with);
  REQUIRE(none.feasible);
  REQUIRE(rich.feasible);
  CHECK(rich.sum_rate >= none.sum_rate - 1e-6);

  // Reported per-CU rates match re-evaluation at the returned covariances.
  const auto eval = multi_cu_rates(rich.config, rich.inter_omega, ch, prep.active, with);
  CHECK(eval[0] == Catch::Approx(rich.per_cu_rate[0]).margin(1e-6));
  CHECK(eval[1] == Catch::Approx(rich.per_cu_rate[1]).margin(1e-6));
}

TEST_CASE("two-CU setup validation") {
  Scenario sc = multi_cu_scenario(2, 1.0, 1.0, 2, 2, 0.0);
  PreparedScenario prep = prepare(sc);
  const ChannelRealization ch = sample_channel(*prep.topology, 4, sc.p_tx, 1);
  MultiCuSetup bad = *sc.multi_cu;
  bad.decoded_ms[bad.cu_ids[1]] = {0, 3};  // overlaps with CU 0's subset
  CHECK_THROWS_AS(optimize_multi_cu(ch, prep.active, prep.ctilde, bad), ValidationError);
  MultiCuSetup missing = *sc.multi_cu;
  missing.decoded_ms[missing.cu_ids[1]] = {3};  // MS 2 unassigned
  CHECK_THROWS_AS(optimize_multi_cu(ch, prep.active, prep.ctilde, missing), ValidationError);
}
