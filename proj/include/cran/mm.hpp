#pragma once

// Shared bookkeeping for the iterative concave-minorant optimization loops
// used by every compression scheme.

#include <vector>

#include "cran/common.hpp"
#include "cran/solver.hpp"

namespace cran {

struct MmOptions {
  int max_outer = 50;
  double rate_tol = 1e-5;  // stop when the objective improves by less (bits)
  SolverOptions solver;
};

struct MmTrace {
  std::vector<double> objective;  // true objective after each outer iteration
  int outer_iters = 0;
  bool monotone = true;  // objective never decreased beyond round-off
  Termination termination = Termination::kConverged;
};

}  // namespace cran
