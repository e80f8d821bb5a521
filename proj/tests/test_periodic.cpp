#include <doctest.h>

#include "nlgpe/error.hpp"
#include "nlgpe/periodic.hpp"

#include <cmath>
#include <numbers>

using namespace nlgpe;

namespace {

const double pi = std::numbers::pi;

SpatialMesh unit_interval(std::size_t n) { return build_mesh(1, Box{{{0.0, 1.0}}}, {n}); }

LogisticProblem logistic(std::size_t n, std::function<double(std::size_t, double)> r,
                         BoundaryMode mode = BoundaryMode::neumann_type) {
  return LogisticProblem{unit_interval(n), TimeGrid(1.0, 32), DispersalRecipe{KernelProfile::gaussian(0.1), 1.0, mode},
                         PeriodicScalarField::function(std::move(r), "r"), PeriodicScalarField::constant(1.0), {}};
}

double seasonal(std::size_t, double t) { return 1.0 + 0.5 * std::sin(2 * pi * t); }

// periodic solution of u' = u (r(t) - u) at t = 0, via w = 1/u:
// w(0) = int_0^1 exp(-(R(1) - R(s))) ds / (1 - exp(-R(1))), R(t) = int_0^t r
double logistic_periodic_value(double mean, double amp) {
  auto R = [&](double t) { return mean * t + amp * (1.0 - std::cos(2 * pi * t)) / (2 * pi); };
  const int n = 200000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = (i + 0.5) / n;
    s += std::exp(-(R(1.0) - R(x))) / n;
  }
  return (1.0 - std::exp(-R(1.0))) / s;
}

LogisticOptions tight() {
  LogisticOptions o;
  o.gpe.tol_lambda = 1e-3;
  o.gpe.power_tol = 1e-9;
  o.tol = 1e-8;
  return o;
}

}  // namespace

TEST_CASE("residuals of constant candidates") {
  const LogisticProblem p = logistic(8, [](std::size_t, double) { return 0.8; });
  const NonlinearSystem sys = logistic_system(p);
  const Trajectory eq = constant_trajectory(StateField::constant(8, 1, 0.8), p.grid);
  CHECK(eq.size() == 33);
  const ResidualRange r = residual_range(sys, eq);
  CHECK(std::abs(r.min) <= 1e-14);
  CHECK(std::abs(r.max) <= 1e-14);
  CHECK(r.samples == 33 * 8);
  const ResidualRange hi = residual_range(sys, constant_trajectory(StateField::constant(8, 1, 2.0), p.grid));
  CHECK(hi.max == doctest::Approx(2.0 * (0.8 - 2.0)));
}

TEST_CASE("pair checks detect order, periodicity and residual signs") {
  const LogisticProblem p = logistic(8, [](std::size_t, double) { return 0.8; });
  const NonlinearSystem sys = logistic_system(p);
  const Trajectory lo = constant_trajectory(StateField::constant(8, 1, 0.1), p.grid);
  const Trajectory hi = constant_trajectory(StateField::constant(8, 1, 1.5), p.grid);
  CHECK(check_pair(sys, lo, hi).ok());
  const PairCheck swapped = check_pair(sys, hi, lo);
  CHECK_FALSE(swapped.ordered);
  CHECK_FALSE(swapped.lower_residual_ok);
  CHECK_FALSE(swapped.upper_residual_ok);
  CHECK_FALSE(swapped.describe().empty());
}

TEST_CASE("monotone iteration converges to the periodic ODE solution on a homogeneous patch") {
  const LogisticProblem p = logistic(12, seasonal);
  const LogisticResult res = logistic_solve(p, tight());
  REQUIRE(res.verdict.threshold_case == ThresholdCase::positive);
  CHECK(res.verdict.lambda == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(res.condition == "A");
  CHECK(res.condition_a);
  REQUIRE(res.solution);
  REQUIRE(res.pair);
  CHECK(res.pair->check.ok());
  CHECK(res.pair->rho > 0.0);
  const PeriodicSolution& s = *res.solution;
  CHECK(s.gap <= 1e-8);
  CHECK(s.defect <= 1e-7);
  for (std::size_t k = 1; k < s.history.size(); ++k) CHECK(s.history[k].gap <= s.history[k - 1].gap * (1 + 1e-12));
  const double oracle = logistic_periodic_value(1.0, 0.5);
  CHECK((s.trajectory.front().values.array() - oracle).abs().maxCoeff() <= 1e-6);
  // envelopes stay ordered and contain the solution
  for (std::size_t k = 0; k < s.trajectory.size(); ++k) {
    CHECK((s.upper_envelope.snapshots[k].values - s.lower_envelope.snapshots[k].values).minCoeff() >= -1e-8);
  }
}

TEST_CASE("heterogeneous logistic solution is a periodic solution of the equation") {
  const SpatialMesh m = unit_interval(16);
  const LogisticProblem p = logistic(16, [&m](std::size_t a, double t) {
    return 0.5 + std::cos(pi * m.node(a).x) + 0.5 * std::sin(2 * pi * t);
  });
  const LogisticResult res = logistic_solve(p, tight());
  REQUIRE(res.solution);
  const PeriodicSolution& s = *res.solution;
  CHECK(s.trajectory.front().values.minCoeff() > 0.0);
  const ResidualRange r = residual_range(logistic_system(p), s.trajectory);
  // centered differences on a 32-step grid
  CHECK(std::max(std::abs(r.min), std::abs(r.max)) <= 5e-2);
  CHECK(s.defect <= 1e-7);

  ThresholdVerdict v = res.verdict;
  std::vector<StateField> starts{StateField::constant(16, 1, 0.05), StateField::constant(16, 1, 3.0)};
  const ConvergenceEvidence ev = verify_convergence(logistic_system(p), v, &s, starts, 40);
  CHECK(ev.all_pass);
  for (const EvidenceRun& run : ev.runs) CHECK(run.final_distance <= 1e-4);
}

TEST_CASE("negative and critical cases") {
  const LogisticProblem neg = logistic(10, [](std::size_t, double t) { return -0.5 + 0.5 * std::sin(2 * pi * t); });
  const LogisticResult rn = logistic_solve(neg, tight());
  CHECK(rn.verdict.threshold_case == ThresholdCase::negative);
  CHECK(rn.verdict.lambda == doctest::Approx(-0.5).epsilon(1e-6));
  CHECK(rn.verdict.sigma == doctest::Approx(-0.25 * rn.verdict.bracket.lambda_hi));
  CHECK_FALSE(rn.solution);
  const ConvergenceEvidence ev =
      verify_convergence(logistic_system(neg), rn.verdict, nullptr, {StateField::constant(10, 1, 1.0)}, 30);
  CHECK(ev.all_pass);
  CHECK(ev.runs[0].fitted_slope <= -0.45);
  CHECK(ev.runs[0].monotone_tail);

  const LogisticProblem crit = logistic(10, [](std::size_t, double t) { return 0.5 * std::sin(2 * pi * t); });
  const LogisticResult rc = logistic_solve(crit, tight());
  CHECK(rc.verdict.threshold_case == ThresholdCase::critical);
  CHECK(rc.verdict.predicted == "indeterminate");
  CHECK(to_string(ThresholdCase::critical) == "indeterminate-critical");
  CHECK_THROWS_AS(verify_convergence(logistic_system(crit), rc.verdict, nullptr, {StateField::constant(10, 1, 1.0)}, 1),
                  ConfigError);
}

TEST_CASE("upper-level conditions") {
  const LogisticProblem p = logistic(10, seasonal);
  CHECK(logistic_condition_b(p, 1.6));
  CHECK_FALSE(logistic_condition_b(p, 1.0));
  LogisticOptions b = tight();
  b.path = LogisticPath::condition_b;
  const LogisticResult rb = logistic_solve(p, b);
  CHECK(rb.condition == "B");
  CHECK(logistic_condition_b(p, rb.upper_level));

  LogisticProblem asym = p;
  Eigen::MatrixXd t(10, 10);
  for (int a = 0; a < 10; ++a)
    for (int c = 0; c < 10; ++c) t(a, c) = std::exp(-std::abs(a - c)) * (1.0 + 0.1 * c);
  asym.dispersal = DispersalRecipe{KernelProfile::tabulated(t), 1.0, BoundaryMode::neumann_type, TabulatedPolicy::rescale};
  LogisticOptions a = tight();
  a.path = LogisticPath::condition_a;
  CHECK_THROWS_AS(logistic_solve(asym, a), ConfigError);
  const LogisticResult auto_b = logistic_solve(asym, tight());
  CHECK(auto_b.condition == "B");
  REQUIRE(auto_b.solution);
  CHECK(auto_b.solution->defect <= 1e-7);
}

TEST_CASE("auto pair scales the lower solution below the upper one") {
  const LogisticProblem p = logistic(10, seasonal);
  const NonlinearSystem sys = logistic_system(p);
  GpeOptions g = tight().gpe;
  const EigenBracket br = solve_gpe(sys.linearization_at_zero(), p.mesh, g);
  const OrderedPair pair = auto_pair(sys, br, constant_trajectory(StateField::constant(10, 1, 1.65), p.grid), 1.65);
  CHECK(pair.check.ok());
  CHECK(pair.rho > 0.0);
  CHECK(pair.rho <= 1.65);
  CHECK(pair.check.lower_residual.min >= 0.0);
  CHECK(pair.check.upper_residual.max <= 0.0);
}
