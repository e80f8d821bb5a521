#include <doctest.h>

#include "nlgpe/error.hpp"
#include "nlgpe/gpe.hpp"
#include "nlgpe/parallel.hpp"

#include <cmath>
#include <numbers>

using namespace nlgpe;

namespace {

const double pi = std::numbers::pi;

SpatialMesh unit_interval(std::size_t n) { return build_mesh(1, Box{{{0.0, 1.0}}}, {n}); }

PeriodicMatrixField constant_matrix(const Eigen::Matrix2d& b, std::size_t nodes) {
  PeriodicMatrixField f(2, nodes);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < 2; ++k)
      f(i, k) = PeriodicScalarField::constant(b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)));
  return f;
}

PeriodicMatrixField heterogeneous(const SpatialMesh& m) {
  PeriodicMatrixField f(2, m.size());
  f(0, 0) = PeriodicScalarField::function(
      [&m](std::size_t a, double t) { return 0.5 * std::cos(pi * m.node(a).x) + 0.3 * std::sin(2 * pi * t); }, "b00");
  f(0, 1) = PeriodicScalarField::function([](std::size_t, double t) { return 0.4 + 0.2 * std::cos(2 * pi * t); }, "b01");
  f(1, 0) = PeriodicScalarField::constant(0.3);
  f(1, 1) = PeriodicScalarField::function([&m](std::size_t a, double) { return -0.2 - m.node(a).x; }, "b11");
  return f;
}

LinearSystem build(const SpatialMesh& m, const PeriodicMatrixField& b, std::size_t steps = 16) {
  std::vector<DispersalOperator> ops;
  ops.push_back(assemble_dispersal(normalize_kernel(KernelProfile::gaussian(0.1), m), m, 1.0, BoundaryMode::neumann_type));
  ops.push_back(assemble_dispersal(normalize_kernel(KernelProfile::tent(0.2), m), m, 0.5, BoundaryMode::neumann_type));
  return LinearSystem::from_reaction_coupling(ops, b, TimeGrid(1.0, steps));
}

GpeOptions tight() {
  GpeOptions o;
  o.tol_lambda = 1e-3;
  o.power_tol = 1e-9;
  return o;
}

}  // namespace

TEST_CASE("control fields: offsets, gap and theta of the controls") {
  const SpatialMesh m = unit_interval(30);
  const LinearSystem sys = build(m, heterogeneous(m));
  const MonodromyResult th = theta_field(sys.coupling(), m, sys.grid(), FloquetOptions{0.1, 512});
  for (double eps : {0.2, 0.05, 0.01}) {
    const ControlPair p = build_control_pair(sys.coupling(), th, eps);
    std::size_t count = 0;
    for (Eigen::Index a = 0; a < th.theta.size(); ++a) {
      const bool in = th.theta[a] >= th.theta_max - eps;
      CHECK(p.sigma_set[static_cast<std::size_t>(a)] == in);
      count += in;
      CHECK(p.upper_offset[a] - p.lower_offset[a] == doctest::Approx(3 * eps).epsilon(1e-13));
      CHECK(p.lower_offset[a] <= 0.0);
      CHECK(p.upper_offset[a] >= 0.0);
      CHECK(p.theta_under[a] <= th.theta_max - 2 * eps + 1e-13);
      CHECK(p.theta_over[a] <= th.theta_max + eps + 1e-13);
    }
    CHECK(p.sigma_count == count);
    CHECK(p.theta_under.maxCoeff() == doctest::Approx(th.theta_max - 2 * eps).epsilon(1e-13));
    CHECK(p.theta_over.maxCoeff() == doctest::Approx(th.theta_max + eps).epsilon(1e-13));
    // theta of the control field recomputed directly agrees with the shift identity
    const MonodromyResult tu = theta_field(p.lower_field, m, sys.grid(), FloquetOptions{0.1, 512});
    CHECK((tu.theta - p.theta_under).cwiseAbs().maxCoeff() <= 1e-9);
  }
  CHECK_THROWS_AS(build_control_pair(sys.coupling(), th, 0.0), ConfigError);
}

TEST_CASE("constant scalar coupling gives lambda equal to the constant") {
  const SpatialMesh m = unit_interval(30);
  PeriodicMatrixField b(1, 30);
  b(0, 0) = PeriodicScalarField::constant(0.3);
  const LinearSystem sys = LinearSystem::from_reaction_coupling(
      {assemble_dispersal(normalize_kernel(KernelProfile::gaussian(0.1), m), m, 1.0, BoundaryMode::neumann_type)}, b,
      TimeGrid(1.0, 16));
  const EigenBracket r = solve_gpe(sys, m, tight());
  CHECK(r.converged);
  CHECK(std::abs(r.lambda_estimate - 0.3) <= 1e-8);
  CHECK(r.lambda_lo <= 0.3 + 1e-8);
  CHECK(r.lambda_hi >= 0.3 - 1e-8);
}

TEST_CASE("constant 2x2 coupling gives the top eigenvalue of the matrix") {
  const SpatialMesh m = unit_interval(20);
  Eigen::Matrix2d b;
  b << -1.0, 2.0, 0.5, -2.0;
  const EigenBracket r = solve_gpe(build(m, constant_matrix(b, 20)), m, tight());
  const double top = (-3.0 + std::sqrt(5.0)) / 2.0;
  CHECK(r.converged);
  CHECK(std::abs(r.lambda_estimate - top) <= 1e-8);
}

TEST_CASE("heterogeneous system: trace, sandwich and agreement with the dense bound") {
  const SpatialMesh m = unit_interval(20);
  const LinearSystem sys = build(m, heterogeneous(m));
  const EigenBracket r = solve_gpe(sys, m, tight());
  REQUIRE(r.converged);
  CHECK(r.width() <= 1e-3);
  CHECK(r.epsilon0 == doctest::Approx(std::max(0.1, 0.05 * (r.theta_max - r.theta_min))));
  for (std::size_t k = 0; k < r.trace.size(); ++k) {
    const EpsilonStage& st = r.trace[k];
    CHECK(st.epsilon == doctest::Approx(r.epsilon0 / std::pow(2.0, static_cast<double>(k))));
    CHECK(std::abs(st.lambda_hi - st.lambda_lo - 3 * st.epsilon) <= 2 * r.power_tol);
    CHECK(st.sandwich);
    CHECK(st.certified_lo <= st.lambda_lo);
    CHECK(st.certified_hi >= st.lambda_hi);
    if (k > 0) {
      CHECK(st.lambda_lo >= r.trace[k - 1].lambda_lo - 2 * r.power_tol);
      CHECK(st.lambda_hi <= r.trace[k - 1].lambda_hi + 2 * r.power_tol);
    }
  }
  const double dense = dense_spectral_bound(r.controls.front().with_coupling(sys.coupling()));
  CHECK(r.lambda_lo <= dense + 1e-8);
  CHECK(r.lambda_hi >= dense - 1e-8);
  CHECK(std::abs(r.lambda_estimate - dense) <= 1e-6);

  const CwReport cw = characterize_cw(sys, r, r.tol_lambda);
  CHECK(cw.consistent);
  CHECK(cw.window_lo <= dense + cw.slack);
  CHECK(cw.window_hi >= dense - cw.slack);
}

TEST_CASE("lambda is monotone in the coupling and shifts with the diagonal") {
  const SpatialMesh m = unit_interval(16);
  const PeriodicMatrixField b = heterogeneous(m);
  const double base = solve_gpe(build(m, b), m, tight()).lambda_estimate;
  const double shifted = solve_gpe(build(m, b.with_diagonal_shift(0.25)), m, tight()).lambda_estimate;
  const double more = solve_gpe(build(m, b.with_offdiagonal_shift(0.2)), m, tight()).lambda_estimate;
  CHECK(shifted == doctest::Approx(base + 0.25).epsilon(1e-6));
  CHECK(more > base);
}

TEST_CASE("results do not depend on the thread count") {
  const SpatialMesh m = unit_interval(16);
  const LinearSystem sys = build(m, heterogeneous(m));
  set_thread_count(1);
  const EigenBracket a = solve_gpe(sys, m, tight());
  set_thread_count(3);
  const EigenBracket b = solve_gpe(sys, m, tight());
  set_thread_count(1);
  CHECK(a.lambda_lo == b.lambda_lo);
  CHECK(a.lambda_hi == b.lambda_hi);
  CHECK(a.trace.size() == b.trace.size());
}

TEST_CASE("option validation and non-convergence reporting") {
  const SpatialMesh m = unit_interval(10);
  const LinearSystem sys = build(m, heterogeneous(m));
  GpeOptions bad;
  bad.tol_lambda = 0.0;
  CHECK_THROWS_AS(solve_gpe(sys, m, bad), ConfigError);
  GpeOptions few = tight();
  few.max_halvings = 1;
  const EigenBracket r = solve_gpe(sys, m, few);
  CHECK_FALSE(r.converged);
  CHECK(r.trace.size() == 2);
  GpeOptions starved = tight();
  starved.max_iter = 1;
  CHECK_THROWS_AS(solve_gpe(sys, m, starved), NumericalError);
  CHECK_THROWS_AS(characterize_cw(sys, EigenBracket{}, 1e-3), ConfigError);
}
