#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "cran/config.hpp"
#include "cran/montecarlo.hpp"
#include "cran/scenario.hpp"

using namespace cran;

TEST_CASE("hierarchical generator: shape and deactivation") {
  Scenario sc = hierarchical_scenario(4, 3.0, 4, 0.0, {6});
  CHECK(sc.topology.nodes().size() == 8);
  CHECK(sc.topology.edges().size() == 7);
  // Link 6 -> CU (node 8) has zero capacity, the rest carry 3.
  int zeros = 0;
  for (size_t k = 0; k < sc.topology.edges().size(); ++k) {
    const Edge& e = sc.topology.edges()[k];
    if (e.tail == 6 && e.head == 8) {
      CHECK(sc.edge_capacity[k] == 0.0);
      ++zeros;
    } else {
      CHECK(sc.edge_capacity[k] == 3.0);
    }
  }
  CHECK(zeros == 1);
  PreparedScenario prep = prepare(sc);
  // Depth is 2, so every effective capacity is C * T / D = C at T = D.
  for (int k = 0; k < prep.active.size(); ++k) {
    const Edge& e = prep.active.edge(k);
    CHECK(prep.ctilde[k] == Catch::Approx(e.tail == 6 ? 0.0 : 3.0));
  }
}

TEST_CASE("delay budget scales the effective capacities") {
  Scenario sc = hierarchical_scenario(4, 3.0, 4, 0.0);
  sc.delay_t = 1.0;  // depth is 2
  PreparedScenario prep = prepare(sc);
  for (int k = 0; k < prep.active.size(); ++k)
    CHECK(prep.ctilde[k] == Catch::Approx(1.5));
}

TEST_CASE("two-CU generator shape") {
  Scenario sc = multi_cu_scenario(2, 1.0, 7.0, 2, 2, 0.0);
  CHECK(sc.topology.nodes().size() == 6);
  CHECK(sc.topology.edges().size() == 6);
  REQUIRE(sc.multi_cu.has_value());
  CHECK(sc.multi_cu->cu_ids == std::array<int, 2>{5, 6});
  CHECK(sc.multi_cu->decoded_ms.at(5) == std::vector<int>{0, 1});
  CHECK(sc.multi_cu->decoded_ms.at(6) == std::vector<int>{2, 3});
}

TEST_CASE("cut-set bound limits") {
  Scenario tight = hierarchical_scenario(3, 0.0, 2, 0.0);
  PreparedScenario prep0 = prepare(tight);
  const ChannelRealization ch0 = sample_channel(*prep0.topology, 2, tight.p_tx, 4);
  CHECK(cutset_upper_bound(tight, ch0) == 0.0);

  Scenario loose = hierarchical_scenario(3, 50.0, 2, 0.0);
  PreparedScenario prep1 = prepare(loose);
  const ChannelRealization ch1 = sample_channel(*prep1.topology, 2, loose.p_tx, 4);
  const double ub = cutset_upper_bound(loose, ch1);
  const double direct = log2det(received_covariance(ch1));
  CHECK(ub >= direct - 1e-6);
  CHECK(ub <= 150.0 + 1e-6);  // never exceeds the capacity of the CU cut
}

TEST_CASE("cut-set bound dominates every optimized scheme") {
  Scenario sc = hierarchical_scenario(4, 2.0, 3, 5.0);
  sc.schemes = {parse_scheme("MF"), parse_scheme("DPR-opt"), parse_scheme("DPR-dec-SI")};
  sc.trials = 4;
  sc.seed = 77;
  PreparedScenario prep = prepare(sc);
  const ExperimentResult res = run_monte_carlo(sc);
  for (const TrialRecord& r : res.records) {
    REQUIRE(r.ok);
    const ChannelRealization ch = sample_channel(*prep.topology, sc.num_ms, sc.p_tx, r.seed);
    CHECK(r.sum_rate <= cutset_upper_bound(sc, ch) + 1e-6);
  }
}

TEST_CASE("simulation results are independent of the worker count") {
  Scenario sc = hierarchical_scenario(3, 2.0, 2, 0.0);
  sc.schemes = {parse_scheme("DPR-opt"), parse_scheme("DPR-not-opt")};
  sc.trials = 6;
  sc.seed = 2026;
  const ExperimentResult a = run_monte_carlo(sc, 1);
  const ExperimentResult b = run_monte_carlo(sc, 4);
  REQUIRE(a.records.size() == b.records.size());
  for (size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].trial == b.records[i].trial);
    CHECK(a.records[i].scheme == b.records[i].scheme);
    CHECK(a.records[i].sum_rate == b.records[i].sum_rate);
  }
  for (size_t j = 0; j < a.aggregates.size(); ++j) {
    CHECK(a.aggregates[j].mean == b.aggregates[j].mean);
    CHECK(a.aggregates[j].stderr_mean == b.aggregates[j].stderr_mean);
  }
}

TEST_CASE("trial CSV format") {
  TrialRecord r1{0, 11, "DPR-opt", 3.5, 0.0, 7, 1.25, true};
  TrialRecord r2{1, 12, "MF", 0.0, 0.0, 0, 0.5, false};
  const std::string path = "trials_test.csv";
  write_trials_csv(path, {r1, r2});
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "trial,seed,scheme,sum_rate_bits,feasibility_residual,outer_iters,wall_ms");
  std::getline(in, line);
  CHECK(line.rfind("0,11,DPR-opt,3.5,", 0) == 0);
  std::getline(in, line);
  CHECK(line.rfind("1,12,MF,nan,", 0) == 0);
  std::remove(path.c_str());
}

TEST_CASE("aggregate CSV format") {
  ExperimentResult res;
  res.aggregates.push_back({"DPR-opt", 2.0, 0.1, 5});
  const std::string path = "agg_test.csv";
  write_aggregate_csv(path, {{"1.5", res}});
  write_aggregate_csv(path, {{"2.5", res}}, true);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "scheme,param,mean_rate,stderr,n_trials");
  std::getline(in, line);
  CHECK(line == "DPR-opt,1.5,2,0.1,5");
  std::getline(in, line);
  CHECK(line == "DPR-opt,2.5,2,0.1,5");
  std::remove(path.c_str());
}

TEST_CASE("scheme names round-trip") {
  for (const std::string name : {"MF", "DPR-opt", "DPR-not-opt", "DPR-dec-FF", "DPR-dec-FF-FB",
                                 "DPR-dec-SI", "DPR-rank-2"}) {
    CHECK(scheme_name(parse_scheme(name)) == name);
  }
  CHECK_THROWS_AS(parse_scheme("bogus"), ValidationError);
}

TEST_CASE("config: generator form") {
  std::istringstream in(R"(# sample
[scenario]
type = hierarchical
n = 4
c = 2.5
deactivated = 6
[ms]
count = 3
p_tx_db = 5
[schemes]
scheme = MF
scheme = DPR-opt
[mc]
trials = 10
seed = 99
)");
  const ConfigFile cfg = parse_config(in);
  const Scenario sc = scenario_from_config(cfg);
  CHECK(sc.topology.nodes().size() == 8);
  CHECK(sc.num_ms == 3);
  CHECK(sc.p_tx == Catch::Approx(db_to_linear(5.0)));
  REQUIRE(sc.schemes.size() == 2);
  CHECK(scheme_name(sc.schemes[0]) == "MF");
  CHECK(sc.trials == 10);
  CHECK(sc.seed == 99);
  int zero_caps = 0;
  for (double c : sc.edge_capacity)
    if (c == 0.0) ++zero_caps;
  CHECK(zero_caps == 1);
}

TEST_CASE("config: explicit topology form") {
  std::istringstream in(R"(
[nodes]
node = 1 RU 1
node = 2 RU 2
node = 3 CU 0
[edges]
edge = 1 2 1.0
edge = 2 3 2.0
[partition]
layer = 1
layer = 2
layer = 3
[ms]
count = 2
[schemes]
scheme = DPR-opt
)");
  const Scenario sc = scenario_from_config(parse_config(in));
  CHECK(sc.topology.nodes().size() == 3);
  CHECK(sc.topology.node(2).antennas == 2);
  CHECK(sc.edge_capacity == std::vector<double>{1.0, 2.0});
  PreparedScenario prep = prepare(sc);
  CHECK(prep.active.size() == 2);
}

TEST_CASE("config: sweep overrides") {
  std::istringstream in(R"(
[scenario]
type = hierarchical
n = 3
c = 1.0
[ms]
count = 2
[schemes]
scheme = MF
)");
  const ConfigFile cfg = parse_config(in);
  const Scenario swept = scenario_with_param(cfg, "c", "4.0");
  for (double c : swept.edge_capacity) CHECK(c == 4.0);
  const Scenario power = scenario_with_param(cfg, "p_tx_db", "10");
  CHECK(power.p_tx == Catch::Approx(10.0));
  CHECK_THROWS_AS(scenario_with_param(cfg, "nonsense", "1"), ValidationError);
}

TEST_CASE("more backhaul never hurts the optimized schemes") {
  double prev = -1.0;
  for (double c : {0.5, 1.5, 3.0}) {
    Scenario sc = hierarchical_scenario(3, c, 2, 0.0);
    PreparedScenario prep = prepare(sc);
    const ChannelRealization ch = sample_channel(*prep.topology, 2, sc.p_tx, 63);
    const DprResult r = optimize_dpr_opt(ch, prep.active, prep.ctilde);
    REQUIRE(r.feasible);
    CHECK(r.sum_rate >= prev - 1e-4);
    prev = r.sum_rate;
  }
}
