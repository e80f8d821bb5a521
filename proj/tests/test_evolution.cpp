#include <doctest.h>

#include "nlgpe/error.hpp"
#include "nlgpe/evolution.hpp"
#include "nlgpe/mesh.hpp"
#include "nlgpe/reaction.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace nlgpe;

namespace {

const double pi = std::numbers::pi;

SpatialMesh unit_interval(std::size_t n) { return build_mesh(1, Box{{{0.0, 1.0}}}, {n}); }

DispersalOperator op(const SpatialMesh& m, double width, double rate, BoundaryMode mode = BoundaryMode::neumann_type) {
  return assemble_dispersal(normalize_kernel(KernelProfile::gaussian(width), m), m, rate, mode);
}

PeriodicMatrixField scalar_field(std::function<double(std::size_t, double)> fn, std::size_t nodes) {
  PeriodicMatrixField f(1, nodes);
  f(0, 0) = PeriodicScalarField::function(std::move(fn), "test");
  return f;
}

PeriodicMatrixField coupled(std::size_t nodes) {
  PeriodicMatrixField f(2, nodes);
  f(0, 0) = PeriodicScalarField::function([](std::size_t a, double t) { return 0.2 * std::sin(2 * pi * t) - 0.01 * a; }, "a");
  f(0, 1) = PeriodicScalarField::function([](std::size_t, double t) { return 0.5 + 0.3 * std::cos(2 * pi * t); }, "b");
  f(1, 0) = PeriodicScalarField::constant(0.4);
  f(1, 1) = PeriodicScalarField::function([](std::size_t a, double) { return -0.3 + 0.02 * a; }, "c");
  return f;
}

StateField random_state(std::size_t n, std::size_t m, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  StateField s{Eigen::MatrixXd(n, m), 0.0};
  for (Eigen::Index i = 0; i < s.values.size(); ++i) s.values.data()[i] = u(rng);
  return s;
}

}  // namespace

TEST_CASE("linear stepping: zero, constants and superposition") {
  const SpatialMesh m = unit_interval(20);
  const TimeGrid g(1.0, 16);
  const double c = 0.35;
  const LinearSystem sys = LinearSystem::from_reaction_coupling(
      {op(m, 0.1, 1.0)}, scalar_field([c](std::size_t, double) { return c; }, 20), g, StepOptions{0.01, 0});

  const StateField zero = StateField::constant(20, 1, 0.0);
  CHECK(period_map(sys, zero).values.isZero(0.0));

  const StateField one = StateField::constant(20, 1, 1.0);
  const StateField half = step_linear(sys, one, 0.0, 0.5);
  CHECK((half.values.array() - std::exp(0.5 * c)).abs().maxCoeff() <= 1e-10);
  CHECK(half.time == doctest::Approx(0.5));

  std::mt19937_64 rng(3);
  const StateField u = random_state(20, 1, rng), v = random_state(20, 1, rng);
  StateField w{u.values + v.values, 0.0};
  const Eigen::MatrixXd lhs = period_map(sys, w).values;
  const Eigen::MatrixXd rhs = period_map(sys, u).values + period_map(sys, v).values;
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-10 * rhs.cwiseAbs().maxCoeff());
}

TEST_CASE("time-dependent scalar growth matches the exact exponential on aligned and unaligned ranges") {
  const SpatialMesh m = unit_interval(4);
  const TimeGrid g(1.0, 16);
  const double a = -0.2;
  const LinearSystem sys = LinearSystem::from_reaction_coupling(
      {op(m, 0.1, 1.0)}, scalar_field([a](std::size_t, double t) { return a + std::sin(2 * pi * t); }, 4), g,
      StepOptions{0.1, 1024});
  auto exact = [a](double t0, double t1) {
    return std::exp(a * (t1 - t0) - (std::cos(2 * pi * t1) - std::cos(2 * pi * t0)) / (2 * pi));
  };
  const StateField one = StateField::constant(4, 1, 1.0);
  for (auto [t0, t1] : {std::pair{0.0, 1.0}, std::pair{0.25, 0.75}, std::pair{0.1, 0.37}, std::pair{0.9, 2.3}}) {
    const StateField out = step_linear(sys, StateField{one.values, t0}, t0, t1);
    CHECK(std::abs(out.values(2, 0) - exact(t0, t1)) <= 1e-9);
  }
}

TEST_CASE("substep counts are multiples of the grid") {
  const SpatialMesh m = unit_interval(6);
  const TimeGrid g(1.0, 8);
  CHECK_THROWS_AS(LinearSystem::from_reaction_coupling({op(m, 0.1, 1.0)}, coupled(6), g), ConfigError);
  const LinearSystem s2 = LinearSystem::from_reaction_coupling({op(m, 0.1, 1.0), op(m, 0.1, 1.0)}, coupled(6), g,
                                                               StepOptions{0.1, 20});
  CHECK(s2.substeps_per_period() == 24);
  CHECK(s2.with_substeps(100).substeps_per_period() == 104);
}

TEST_CASE("flow is periodic in time and strongly positive after m + 1 periods") {
  const SpatialMesh m = unit_interval(15);
  const TimeGrid g(1.0, 16);
  const LinearSystem sys =
      LinearSystem::from_reaction_coupling({op(m, 0.1, 1.0), op(m, 0.15, 0.5)}, coupled(15), g, StepOptions{0.1, 0});
  std::mt19937_64 rng(5);
  const StateField u0 = random_state(15, 2, rng);
  const StateField p1 = step_linear(sys, u0, 0.0, 1.0);
  const StateField p2 = step_linear(sys, p1, 1.0, 2.0);
  const StateField q2 = step_linear(sys, StateField{p1.values, 0.0}, 0.0, 1.0);
  CHECK((p2.values - q2.values).cwiseAbs().maxCoeff() <= 1e-12 * p2.sup_norm());

  StateField spike = StateField::constant(15, 2, 0.0);
  spike.values(0, 1) = 1.0;
  for (int k = 0; k < 3; ++k) spike = period_map(sys, spike);
  CHECK(spike.values.minCoeff() > 0.0);
}

TEST_CASE("blow-up and bad input are reported") {
  const SpatialMesh m = unit_interval(4);
  const TimeGrid g(1.0, 8);
  const LinearSystem sys = LinearSystem::from_reaction_coupling(
      {op(m, 0.1, 1.0)}, scalar_field([](std::size_t, double) { return 40.0; }, 4), g);
  CHECK_THROWS_AS(period_map(sys, StateField::constant(4, 1, 1.0)), NumericalError);
  CHECK_THROWS_AS(step_linear(sys, StateField::constant(4, 1, 1.0), 0.5, 0.5), ConfigError);
  CHECK_THROWS_AS(period_map(sys, StateField::constant(3, 1, 1.0)), ConfigError);

  const NonlinearSystem nl({op(m, 0.1, 1.0)},
                           std::make_shared<LogisticReaction>(PeriodicScalarField::constant(1.0),
                                                              PeriodicScalarField::constant(1.0), 4),
                           g);
  StateField neg = StateField::constant(4, 1, 1.0);
  neg.values(1, 0) = -0.5;
  CHECK_THROWS_AS(step_nonlinear(nl, neg, 0.0, 1.0), ConfigError);
}

TEST_CASE("a linear reaction reproduces the linear stepper") {
  const SpatialMesh m = unit_interval(10);
  const TimeGrid g(1.0, 16);
  const std::vector<DispersalOperator> ops{op(m, 0.1, 1.0), op(m, 0.2, 0.5)};
  PeriodicMatrixField zero(2, 10);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < 2; ++k) zero(i, k) = PeriodicScalarField::constant(0.0);
  const NonlinearSystem nl(ops, std::make_shared<QuadraticReaction>(coupled(10), zero), g, StepOptions{0.01, 0});
  const LinearSystem lin = LinearSystem::from_reaction_coupling(ops, coupled(10), g, StepOptions{0.01, 0});
  std::mt19937_64 rng(9);
  const StateField u0 = random_state(10, 2, rng);
  const Eigen::MatrixXd a = trajectory_nonlinear(nl, u0, 1).back().values;
  const Eigen::MatrixXd b = period_map(lin, u0).values;
  CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(nl.linearization_at_zero().coupling().at(3, 0.2).isApprox(lin.coupling().at(3, 0.2)));
}

TEST_CASE("homogeneous logistic matches a fine scalar ODE integration") {
  const SpatialMesh m = unit_interval(12);
  const TimeGrid g(1.0, 16);
  auto r = [](double t) { return 1.0 + 0.5 * std::sin(2 * pi * t); };
  const NonlinearSystem nl(
      {op(m, 0.1, 1.0)},
      std::make_shared<LogisticReaction>(PeriodicScalarField::function([r](std::size_t, double t) { return r(t); }, "r"),
                                         PeriodicScalarField::constant(1.0), 12),
      g);
  const double u0 = 0.2;
  const Trajectory tr = trajectory_nonlinear(nl, StateField::constant(12, 1, u0), 3);
  // independent reference: RK4 with 20000 steps per period
  double u = u0;
  const int n = 20000;
  const double h = 1.0 / n;
  double worst = 0.0;
  for (int p = 0; p < 3; ++p) {
    for (int i = 0; i < n; ++i) {
      const double t = i * h;
      auto f = [&](double s, double v) { return v * (r(s) - v); };
      const double k1 = f(t, u), k2 = f(t + h / 2, u + h / 2 * k1), k3 = f(t + h / 2, u + h / 2 * k2),
                   k4 = f(t + h, u + h * k3);
      u += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    const Eigen::MatrixXd& v = tr.snapshots[static_cast<std::size_t>(16 * (p + 1))].values;
    worst = std::max(worst, (v.array() - u).abs().maxCoeff());
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("comparison principle and positivity on random cooperative systems") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const SpatialMesh m = unit_interval(10);
  const TimeGrid g(1.0, 8);
  for (int trial = 0; trial < 10; ++trial) {
    PeriodicMatrixField b(2, 10), c(2, 10);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t k = 0; k < 2; ++k) {
        const double base = i == k ? uni(rng) - 0.5 : uni(rng), amp = 0.5 * uni(rng);
        b(i, k) = PeriodicScalarField::function(
            [base, amp, i, k](std::size_t, double t) {
              const double v = base + amp * std::sin(2 * pi * t);
              return i == k ? v : std::max(0.0, v);
            },
            "random");
        c(i, k) = PeriodicScalarField::constant(i == k ? uni(rng) : 0.0);
      }
    const NonlinearSystem nl({op(m, 0.1, uni(rng) + 0.1), op(m, 0.2, uni(rng) + 0.1)},
                             std::make_shared<QuadraticReaction>(b, c), g);
    StateField lo = random_state(10, 2, rng, 0.0, 1.0);
    StateField hi{lo.values + random_state(10, 2, rng, 0.0, 1.0).values, 0.0};
    for (int p = 0; p < 3; ++p) {
      lo = trajectory_nonlinear(nl, lo, 1).back();
      hi = trajectory_nonlinear(nl, hi, 1).back();
      lo.time = hi.time = 0.0;
      CHECK((hi.values - lo.values).minCoeff() >= -1e-8);
      CHECK(lo.values.minCoeff() >= 0.0);
    }
  }
}

TEST_CASE("clamping contract") {
  StateField s{Eigen::MatrixXd::Constant(3, 1, 1.0), 0.0};
  s.values(0, 0) = -1e-14;
  StepDiagnostics d;
  clamp_output(s, true, &d);
  CHECK(s.values(0, 0) == 0.0);
  CHECK(d.clamped == 1);
  s.values(1, 0) = -0.1;
  clamp_output(s, true, &d);
  CHECK(d.positivity_violations == 1);
  CHECK(d.most_negative == doctest::Approx(-0.1));
}
