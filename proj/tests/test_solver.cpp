#include <catch2/catch_amalgamated.hpp>

#include <functional>
#include <random>

#include "cran/solver.hpp"

using namespace cran;

namespace {

// 1-D golden-section maximizer for the scalar cross-checks.
double golden_max(double lo, double hi, const std::function<double(double)>& f) {
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  for (int it = 0; it < 200; ++it) {
    if (f(c) > f(d))
      b = d;
    else
      a = c;
    c = b - gr * (b - a);
    d = a + gr * (b - a);
  }
  return 0.5 * (a + b);
}

}  // namespace

TEST_CASE("unconstrained scalar program with optimum at the boundary") {
  // maximize log2det(1 + w) - w / ln2 over PSD scalar w: the derivative is
  // nonpositive on w >= 0, so the optimum is w = 0.
  LogDetProgram prog;
  prog.matrix_vars.push_back({1, 100.0});
  ConcaveTerm obj;
  obj.expr.base = CMat::Identity(1, 1);
  obj.expr.terms.push_back({0, CMat::Identity(1, 1)});
  prog.objective_concave.push_back(obj);
  prog.objective_linear.matrix_coeffs.emplace_back(0, CMat(-CMat::Identity(1, 1) / kLn2));
  SolverPoint warm;
  warm.x = {CMat::Identity(1, 1)};
  warm.s = RVec::Zero(0);
  const SolverReport rep = solve(prog, warm, {});
  REQUIRE(rep.termination != Termination::kInfeasible);
  CHECK(rep.point.x[0](0, 0).real() < 1e-4);
  CHECK(rep.objective == Catch::Approx(0.0).margin(1e-4));
}

TEST_CASE("capped scalar program matches a golden-section oracle") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.2, 3.0);
  for (int trial = 0; trial < 10; ++trial) {
    const double t = u(rng), c = 0.3 * u(rng), cap = 2.0 * u(rng);
    // maximize log2(1 + w t) - c w subject to 0 <= w <= cap.
    LogDetProgram prog;
    prog.matrix_vars.push_back({1, cap});
    ConcaveTerm obj;
    obj.expr.base = CMat::Identity(1, 1);
    obj.expr.terms.push_back({0, CMat(std::sqrt(t) * CMat::Identity(1, 1))});
    prog.objective_concave.push_back(obj);
    prog.objective_linear.matrix_coeffs.emplace_back(0, CMat(-c * CMat::Identity(1, 1)));
    SolverPoint warm;
    warm.x = {0.5 * cap * CMat::Identity(1, 1)};
    warm.s = RVec::Zero(0);
    const SolverReport rep = solve(prog, warm, {});
    REQUIRE(rep.termination != Termination::kInfeasible);
    auto f = [&](double w) { return std::log2(1.0 + w * t) - c * w; };
    const double w_star = golden_max(0.0, cap, f);
    CHECK(rep.objective == Catch::Approx(f(w_star)).margin(1e-5));
  }
}

TEST_CASE("rate-constrained scalar program meets KKT water-level") {
  // maximize log2(s + w) - log2(w) decreasing in w, subject to
  // log2((w + v)/w) <= ctilde: the optimum pushes the constraint active,
  // i.e. w* = v / (2^ctilde - 1).
  const double v = 3.0, ctilde = 1.5;
  LogDetProgram prog;
  prog.matrix_vars.push_back({1, 1e6});
  // Minimize w (maximize -w) subject to w >= v / (2^ctilde - 1), the
  // water-level implied by an active rate constraint.
  prog.objective_linear.matrix_coeffs.emplace_back(0, CMat(-CMat::Identity(1, 1) / kLn2));
  Inequality con;
  con.linear.matrix_coeffs.emplace_back(0, CMat(-CMat::Identity(1, 1)));
  con.bound = -v / (std::pow(2.0, ctilde) - 1.0);
  prog.constraints.push_back(con);
  SolverPoint warm;
  warm.x = {10.0 * CMat::Identity(1, 1)};
  warm.s = RVec::Zero(0);
  const SolverReport rep = solve(prog, warm, {});
  REQUIRE(rep.termination != Termination::kInfeasible);
  CHECK(rep.point.x[0](0, 0).real() ==
        Catch::Approx(v / (std::pow(2.0, ctilde) - 1.0)).margin(1e-4));
}

TEST_CASE("solver respects PSD-ness and caps on a 2x2 instance") {
  LogDetProgram prog;
  prog.matrix_vars.push_back({2, 5.0});
  ConcaveTerm obj;
  obj.expr.base = CMat::Identity(2, 2);
  CMat m(2, 2);
  m << cxd(1.0, 0.0), cxd(0.3, 0.2), cxd(0.3, -0.2), cxd(0.8, 0.0);
  obj.expr.terms.push_back({0, m});
  prog.objective_concave.push_back(obj);
  SolverPoint warm;
  warm.x = {CMat::Identity(2, 2)};
  warm.s = RVec::Zero(0);
  const SolverReport rep = solve(prog, warm, {});
  REQUIRE(rep.termination != Termination::kInfeasible);
  const Eigen::SelfAdjointEigenSolver<CMat> es(rep.point.x[0]);
  CHECK(es.eigenvalues().minCoeff() >= -1e-8);
  CHECK(es.eigenvalues().maxCoeff() <= 5.0 + 1e-6);
  // Objective increases in X, so the cap should be active.
  CHECK(es.eigenvalues().maxCoeff() > 4.9);
}

TEST_CASE("phase one detects infeasible programs") {
  // w <= -1 with w PSD is infeasible.
  LogDetProgram prog;
  prog.matrix_vars.push_back({1, 10.0});
  Inequality con;
  con.linear.matrix_coeffs.emplace_back(0, CMat::Identity(1, 1));
  con.bound = -1.0;
  prog.constraints.push_back(con);
  const SolverReport rep = solve(prog, std::nullopt, {});
  CHECK(rep.termination == Termination::kInfeasible);
}

TEST_CASE("warm start never ends below its own objective") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  for (int trial = 0; trial < 5; ++trial) {
    LogDetProgram prog;
    prog.matrix_vars.push_back({2, 20.0});
    ConcaveTerm obj;
    obj.expr.base = u(rng) * CMat::Identity(2, 2);
    obj.expr.terms.push_back({0, CMat(u(rng) * CMat::Identity(2, 2))});
    prog.objective_concave.push_back(obj);
    prog.objective_linear.matrix_coeffs.emplace_back(
        0, CMat(-u(rng) * CMat::Identity(2, 2) / kLn2));
    Inequality con;  // tr(X) <= 6
    con.linear.matrix_coeffs.emplace_back(0, CMat::Identity(2, 2));
    con.bound = 6.0;
    prog.constraints.push_back(con);
    SolverPoint warm;
    warm.x = {u(rng) * CMat::Identity(2, 2)};
    warm.s = RVec::Zero(0);
    LogDetSolver solver(prog, {});
    const double warm_obj = solver.objective_value(warm);
    const SolverReport rep = solve(prog, warm, {});
    REQUIRE(rep.termination != Termination::kInfeasible);
    CHECK(rep.objective >= warm_obj - 1e-6);
  }
}
