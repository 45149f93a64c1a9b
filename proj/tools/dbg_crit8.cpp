#include <cstdio>
#include <cstdlib>

#include "cran/channel.hpp"
#include "cran/dpr.hpp"
#include "cran/mf.hpp"
#include "cran/scenario.hpp"

using namespace cran;

int main(int argc, char** argv) {
  const double cap = argc > 1 ? std::atof(argv[1]) : 8.0;
  const int trials = argc > 2 ? std::atoi(argv[2]) : 5;
  const std::uint64_t seed = argc > 3 ? std::strtoull(argv[3], nullptr, 10) : 700;
  Scenario sc = hierarchical_scenario(8, cap, 5, 0.0);
  sc.seed = seed;
  PreparedScenario prep = prepare(sc);
  double sum_dpr = 0, sum_mf = 0, sum_ub = 0, sum_coop = 0;
  for (int t = 0; t < trials; ++t) {
    ChannelRealization ch =
        sample_channel(*prep.topology, sc.num_ms, sc.p_tx, sub_seed(sc.seed, (std::uint64_t)t));
    MmOptions opts;
    DprResult dr = optimize_dpr_opt(ch, prep.active, prep.ctilde, opts);
    MfSolution mr = optimize_mf(ch, prep.active, prep.ctilde, opts);
    const double ub = cutset_upper_bound(sc, ch);
    const CMat coop =
        CMat::Identity(ch.h.cols(), ch.h.cols()) + ch.sigma_x * ch.h.adjoint() * ch.h;
    const double full = log2det(symmetrize(coop));
    sum_dpr += dr.sum_rate;
    sum_mf += mr.sum_rate;
    std::printf("  t%d mf=%.4f dpr=%.4f\n", t, mr.sum_rate, dr.sum_rate);
    sum_ub += ub;
    sum_coop += full;
    if (t == 0) {
      std::printf("  per-edge DPR rates (C=%g):", cap);
      for (int e = 0; e < prep.active.size(); ++e) {
        const double r = dpr_backhaul_rate(e, dr.config, ch, prep.active);
        std::printf(" e%d(%d->%d)=%.3f", e, prep.active.edge(e).tail, prep.active.edge(e).head, r);
      }
      std::printf("\n  MF per-RU rates:");
      for (const auto& [id, r] : mr.rates) std::printf(" R%d=%.4f", id, r);
      // Hand-built alternative: full CU-edge budget on each layer-2 RU's own
      // antenna, layer-1 streams dropped.
      const int nr = static_cast<int>(ch.ru_order.size());
      RVec w = RVec::Zero(nr);
      double conc = 0.0;
      {
        const double ct = prep.ctilde[prep.active.size() - 1];
        for (int j = 0; j < nr; ++j) {
          const int id = ch.ru_order[j];
          if (id < 9) continue;
          const double sy = received_covariance(ch, id)(0, 0).real();
          const double om = sy / (std::pow(2.0, ct) - 1.0);
          w(j) = 1.0 / (1.0 + om);
        }
        const CMat wm = w.cast<std::complex<double>>().asDiagonal();
        const CMat inner = CMat::Identity(ch.h.cols(), ch.h.cols()) +
                           ch.sigma_x * ch.h.adjoint() * wm * ch.h;
        conc = log2det(symmetrize(inner));
      }
      std::printf("\n  MF trial0=%.4f  concentrated-alt=%.4f\n", mr.sum_rate, conc);
    }
  }
  std::printf("C=%g trials=%d  MF=%.4f DPR=%.4f UB=%.4f coop=%.4f  (0.97UB=%.4f)\n", cap, trials,
              sum_mf / trials, sum_dpr / trials, sum_ub / trials, sum_coop / trials,
              0.97 * sum_ub / trials);
  return 0;
}
