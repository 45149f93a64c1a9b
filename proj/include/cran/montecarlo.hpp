#pragma once

// Monte Carlo experiment runner: per-trial channel sampling from a master
// seed, per-scheme optimization on identical realizations, aggregation,
// and CSV persistence.  Results are independent of the worker count.

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "cran/decentralized.hpp"
#include "cran/mf.hpp"
#include "cran/scenario.hpp"

namespace cran {

class RunFailureError : public std::runtime_error {
 public:
  explicit RunFailureError(const std::string& what) : std::runtime_error(what) {}
};

struct TrialRecord {
  int trial = 0;
  std::uint64_t seed = 0;
  std::string scheme;
  double sum_rate = std::numeric_limits<double>::quiet_NaN();
  double residual = 0.0;
  int outer_iters = 0;
  double wall_ms = 0.0;
  bool ok = false;
};

struct SchemeAggregate {
  std::string scheme;
  double mean = 0.0;
  double stderr_mean = 0.0;
  int n_trials = 0;
};

struct ExperimentResult {
  std::vector<TrialRecord> records;
  std::vector<SchemeAggregate> aggregates;
  int failures = 0;
  double wall_ms = 0.0;
};

namespace detail {

inline double dpr_residual(const DprConfig& config, const ChannelRealization& ch,
                           const ActiveEdgeSet& active, const std::vector<double>& ctilde) {
  double res = 0.0;
  for (int k = 0; k < active.size(); ++k) {
    if (ctilde[k] <= 0) continue;
    res = std::max(res, dpr_backhaul_rate(k, config, ch, active) - ctilde[k]);
  }
  return std::max(res, 0.0);
}

inline TrialRecord run_scheme(const SchemeSpec& spec, const Scenario& sc,
                              const PreparedScenario& prep, const ChannelRealization& ch,
                              const MmOptions& opts) {
  TrialRecord rec;
  rec.scheme = scheme_name(spec);
  const auto t0 = std::chrono::steady_clock::now();
  if (sc.multi_cu) {
    if (spec.kind != SchemeKind::kDprOpt)
      throw UnsupportedInputError("two-CU scenarios support only the DPR-opt scheme");
    const MultiCuResult r = optimize_multi_cu(ch, prep.active, prep.ctilde, *sc.multi_cu, opts);
    rec.sum_rate = r.sum_rate;
    rec.outer_iters = r.trace.outer_iters;
    rec.residual = dpr_residual(r.config, ch, prep.active, prep.ctilde);
    rec.ok = r.feasible;
  } else {
    switch (spec.kind) {
      case SchemeKind::kMf: {
        const MfSolution r = optimize_mf(ch, prep.active, prep.ctilde, opts);
        rec.sum_rate = r.sum_rate;
        rec.outer_iters = r.trace.outer_iters;
        FlowResiduals fr = check_flow_constraints(r.flows, r.rates, prep.active, prep.ctilde);
        rec.residual = std::max(0.0, fr.max_violation());
        rec.ok = r.feasible;
        break;
      }
      case SchemeKind::kDprOpt:
      case SchemeKind::kDprRank:
      case SchemeKind::kDprNotOpt: {
        DprResult r;
        if (spec.kind == SchemeKind::kDprOpt) {
          r = optimize_dpr_opt(ch, prep.active, prep.ctilde, opts);
        } else if (spec.kind == SchemeKind::kDprNotOpt) {
          r = dpr_not_opt(ch, prep.active, prep.ctilde);
        } else {
          std::map<int, int> ranks;
          for (int k = 0; k < prep.active.size(); ++k) ranks[k] = spec.rank;
          r = optimize_dpr_rank(ch, prep.active, prep.ctilde, ranks, opts);
        }
        rec.sum_rate = r.sum_rate;
        rec.outer_iters = r.trace.outer_iters;
        rec.residual = dpr_residual(r.config, ch, prep.active, prep.ctilde);
        rec.ok = r.feasible;
        break;
      }
      case SchemeKind::kDecFf:
      case SchemeKind::kDecFfFb:
      case SchemeKind::kDecSi: {
        const OptimizationOrder order = default_order(prep.active);
        DecResult r;
        if (spec.kind == SchemeKind::kDecFf)
          r = optimize_dec_ff(ch, prep.active, prep.ctilde, order, opts);
        else if (spec.kind == SchemeKind::kDecFfFb)
          r = optimize_ff_fb(ch, prep.active, prep.ctilde, order, opts);
        else
          r = optimize_dec_si(ch, prep.active, prep.ctilde, order, opts);
        rec.sum_rate = r.sum_rate;
        // The SI variant's constraints are conditional by design, so the
        // unconditional per-edge rates are not a residual for it.
        rec.residual = spec.kind == SchemeKind::kDecSi
                           ? 0.0
                           : dpr_residual(r.config, ch, prep.active, prep.ctilde);
        rec.ok = r.feasible;
        break;
      }
    }
  }
  rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
  return rec;
}

}  // namespace detail

inline ExperimentResult run_monte_carlo(const Scenario& sc, int threads = 1,
                                        const MmOptions& opts = {}) {
  sc.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const int n_schemes = static_cast<int>(sc.schemes.size());
  if (n_schemes == 0) throw ValidationError("no schemes requested");
  std::vector<std::vector<TrialRecord>> per_trial(sc.trials);

  std::atomic<int> next{0};
  auto worker = [&]() {
    // Each worker owns its prepared scenario; results depend only on the
    // trial index.
    const PreparedScenario prep = prepare(sc);
    for (;;) {
      const int t = next.fetch_add(1);
      if (t >= sc.trials) return;
      const std::uint64_t seed = sub_seed(sc.seed, static_cast<std::uint64_t>(t));
      std::vector<TrialRecord> recs;
      ChannelRealization ch;
      bool ch_ok = true;
      try {
        ch = sample_channel(*prep.topology, sc.num_ms, sc.p_tx, seed);
      } catch (const std::exception&) {
        ch_ok = false;
      }
      for (const SchemeSpec& spec : sc.schemes) {
        TrialRecord rec;
        rec.scheme = scheme_name(spec);
        if (ch_ok) {
          try {
            rec = detail::run_scheme(spec, sc, prep, ch, opts);
          } catch (const std::exception&) {
            rec.ok = false;
          }
        }
        rec.trial = t;
        rec.seed = seed;
        recs.push_back(std::move(rec));
      }
      per_trial[t] = std::move(recs);
    }
  };
  const int w = std::max(1, threads);
  std::vector<std::thread> pool;
  for (int i = 1; i < w; ++i) pool.emplace_back(worker);
  worker();
  for (std::thread& th : pool) th.join();

  ExperimentResult out;
  for (auto& recs : per_trial)
    for (auto& r : recs) out.records.push_back(std::move(r));
  for (const SchemeSpec& spec : sc.schemes) {
    SchemeAggregate agg;
    agg.scheme = scheme_name(spec);
    double sum = 0.0, sumsq = 0.0;
    for (const TrialRecord& r : out.records) {
      if (r.scheme != agg.scheme) continue;
      if (!r.ok) {
        ++out.failures;
        continue;
      }
      sum += r.sum_rate;
      sumsq += r.sum_rate * r.sum_rate;
      ++agg.n_trials;
    }
    if (agg.n_trials > 0) agg.mean = sum / agg.n_trials;
    if (agg.n_trials > 1) {
      const double var =
          std::max(0.0, (sumsq - agg.n_trials * agg.mean * agg.mean) / (agg.n_trials - 1));
      agg.stderr_mean = std::sqrt(var / agg.n_trials);
    }
    out.aggregates.push_back(std::move(agg));
  }
  out.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  if (out.failures * 20 > static_cast<int>(out.records.size()))
    throw RunFailureError("more than 5% of trials failed (" + std::to_string(out.failures) +
                          " of " + std::to_string(out.records.size()) + ")");
  return out;
}

inline void write_trials_csv(const std::string& path, const std::vector<TrialRecord>& records) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot open " + path + " for writing");
  os << "trial,seed,scheme,sum_rate_bits,feasibility_residual,outer_iters,wall_ms\n";
  os.precision(12);
  for (const TrialRecord& r : records) {
    os << r.trial << ',' << r.seed << ',' << r.scheme << ',';
    if (r.ok)
      os << r.sum_rate;
    else
      os << "nan";
    os << ',' << r.residual << ',' << r.outer_iters << ',' << r.wall_ms << '\n';
  }
}

inline void write_aggregate_csv(const std::string& path,
                                const std::vector<std::pair<std::string, ExperimentResult>>& runs,
                                bool append = false) {
  std::ofstream os(path, append ? std::ios::app : std::ios::out);
  if (!os) throw ValidationError("cannot open " + path + " for writing");
  if (!append) os << "scheme,param,mean_rate,stderr,n_trials\n";
  os.precision(12);
  for (const auto& [param, res] : runs)
    for (const SchemeAggregate& a : res.aggregates)
      os << a.scheme << ',' << param << ',' << a.mean << ',' << a.stderr_mean << ','
         << a.n_trials << '\n';
}

}  // namespace cran
