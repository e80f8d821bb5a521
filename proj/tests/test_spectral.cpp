#include <doctest.h>

#include "nlgpe/error.hpp"
#include "nlgpe/spectral.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>

using namespace nlgpe;

namespace {

const double pi = std::numbers::pi;

SpatialMesh unit_interval(std::size_t n) { return build_mesh(1, Box{{{0.0, 1.0}}}, {n}); }

PeriodicMatrixField system2(std::size_t nodes, bool seasonal) {
  PeriodicMatrixField f(2, nodes);
  const double amp = seasonal ? 0.4 : 0.0;
  f(0, 0) = PeriodicScalarField::function(
      [amp, nodes](std::size_t a, double t) { return 0.3 - 0.5 * a / nodes + amp * std::sin(2 * pi * t); }, "b00");
  f(0, 1) = PeriodicScalarField::constant(0.6);
  f(1, 0) = PeriodicScalarField::function([amp](std::size_t, double t) { return 0.5 + amp * std::cos(2 * pi * t); },
                                          "b10");
  f(1, 1) = PeriodicScalarField::constant(-0.4);
  return f;
}

SystemRecipe recipe(std::size_t n, bool seasonal, BoundaryMode mode = BoundaryMode::neumann_type) {
  const SpatialMesh m = unit_interval(n);
  return SystemRecipe{m, TimeGrid(1.0, 16),
                      {DispersalRecipe{KernelProfile::gaussian(0.1), 1.0, mode},
                       DispersalRecipe{KernelProfile::tent(0.2), 0.5, mode}},
                      system2(n, seasonal), StepOptions{0.05, 0}};
}

// dense generator K - diag(d*) + B at a fixed time, index i * N + a
Eigen::MatrixXd generator(const LinearSystem& sys, double t) {
  const auto n = static_cast<Eigen::Index>(sys.nodes());
  const auto m = static_cast<Eigen::Index>(sys.components());
  Eigen::MatrixXd g(n * m, n * m);
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(n, m), out(n, m);
  for (Eigen::Index col = 0; col < n * m; ++col) {
    e.setZero();
    e(col % n, col / n) = 1.0;
    sys.apply(t, e, out);
    for (Eigen::Index i = 0; i < m; ++i) g.block(i * n, col, n, 1) = out.col(i);
  }
  return g;
}

}  // namespace

TEST_CASE("power bracket encloses the dense spectral bound and tightens") {
  const LinearSystem sys = recipe(12, true).build();
  const double exact = dense_spectral_bound(sys);
  const SpectralEstimate est = power_bracket(sys, 1e-10, 500);
  CHECK(est.gap_flag);
  CHECK(est.s_lo <= exact + 1e-12);
  CHECK(est.s_hi >= exact - 1e-12);
  CHECK(est.width() <= 1e-10);
  CHECK(est.iterate.values.minCoeff() > 0.0);
  for (std::size_t k = 1; k < est.history.size(); ++k) {
    CHECK(est.history[k].first >= est.history[k - 1].first);
    CHECK(est.history[k].second <= est.history[k - 1].second);
  }
  CHECK(std::log(est.r_estimate) == doctest::Approx(est.s_estimate()).epsilon(1e-8));

  const SpectralEstimate capped = power_bracket(sys, 1e-14, 2);
  CHECK_FALSE(capped.gap_flag);
  CHECK(capped.iterations == 2);
}

TEST_CASE("warm start from the converged iterate converges at once") {
  const LinearSystem sys = recipe(10, true).build();
  const SpectralEstimate est = power_bracket(sys, 1e-10, 500);
  const SpectralEstimate warm = power_bracket(sys, 1e-9, 500, &est.iterate);
  CHECK(warm.iterations <= 2);
  StateField bad = est.iterate;
  bad.values(0, 0) = 0.0;
  CHECK_THROWS_AS(power_bracket(sys, 1e-9, 10, &bad), NumericalError);
}

TEST_CASE("time-independent systems: the bound is the top eigenvalue of the generator") {
  for (BoundaryMode mode : {BoundaryMode::neumann_type, BoundaryMode::dirichlet_type}) {
    const LinearSystem sys = recipe(15, false, mode).build().with_substeps(256);
    const Eigen::MatrixXd g = generator(sys, 0.0);
    const Eigen::VectorXcd ev = g.eigenvalues();
    double top = -1e300;
    for (Eigen::Index k = 0; k < ev.size(); ++k) top = std::max(top, ev[k].real());
    const SpectralEstimate est = power_bracket(sys, 1e-12, 2000);
    CHECK(est.s_estimate() == doctest::Approx(top).epsilon(1e-9));
  }
}

TEST_CASE("dense period matrix is positive for an irreducible system") {
  const LinearSystem sys = recipe(8, true).build();
  const Eigen::MatrixXd p = dense_period_matrix(sys);
  CHECK(p.rows() == 16);
  CHECK(p.minCoeff() > 0.0);
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(8, 2);
  v(3, 1) = 1.0;
  const StateField img = period_map(sys, StateField{v, 0.0});
  for (Eigen::Index a = 0; a < 8; ++a) CHECK(img.values(a, 0) == doctest::Approx(p(a, 8 + 3)).epsilon(1e-13));
}

TEST_CASE("certified bounds bracket the spectral bound") {
  const LinearSystem sys = recipe(12, true).build();
  const SpectralEstimate est = power_bracket(sys, 1e-11, 500);
  const EigenTrajectory lo = eigen_trajectory(sys, est.iterate, BoundDirection::lower);
  const EigenTrajectory hi = eigen_trajectory(sys, est.iterate, BoundDirection::upper);
  REQUIRE(lo.phi.size() == 17);
  CHECK(lo.phi.front().time == 0.0);
  CHECK(lo.phi.back().time == doctest::Approx(1.0));
  double sup = 0.0;
  for (const StateField& s : lo.phi.snapshots) sup = std::max(sup, s.sup_norm());
  CHECK(sup == doctest::Approx(1.0).epsilon(1e-14));

  const CertifiedBound cl = certify_bound(sys, lo.phi, BoundDirection::lower);
  const CertifiedBound cu = certify_bound(sys, hi.phi, BoundDirection::upper);
  CHECK(cl.period_ratio >= 1.0 - 1e-12);
  CHECK(cu.period_ratio <= 1.0 + 1e-12);
  CHECK(cl.beta <= cu.beta);
  // the finite-difference time derivative limits the sharpness to the grid
  CHECK(cl.beta <= est.s_lo + 1e-3);
  CHECK(cu.beta >= est.s_hi - 1e-3);
  CHECK(cu.beta - cl.beta <= 0.1);
  CHECK(cl.samples == 17 * 12 * 2);
}

TEST_CASE("constant scalar systems are certified exactly") {
  const SpatialMesh m = unit_interval(10);
  PeriodicMatrixField b(1, 10);
  b(0, 0) = PeriodicScalarField::constant(0.3);
  const SystemRecipe r{m, TimeGrid(1.0, 8), {DispersalRecipe{KernelProfile::gaussian(0.1), 1.0}}, b, {}};
  const LinearSystem sys = r.build();
  const SpectralEstimate est = power_bracket(sys, 1e-12, 100);
  CHECK(est.s_estimate() == doctest::Approx(0.3).epsilon(1e-10));
  const EigenTrajectory lo = eigen_trajectory(sys, est.iterate, BoundDirection::lower);
  const CertifiedBound c = certify_bound(sys, lo.phi, BoundDirection::lower);
  CHECK(c.beta == doctest::Approx(0.3).epsilon(1e-9));
  CHECK(lo.s == doctest::Approx(0.3).epsilon(1e-10));
}

TEST_CASE("recipe assembly subtracts the removal rate") {
  const SystemRecipe r = recipe(10, true);
  const LinearSystem a = r.build();
  std::vector<DispersalOperator> ops;
  for (const DispersalRecipe& d : r.dispersal)
    ops.push_back(assemble_dispersal(normalize_kernel(d.profile, r.mesh, d.policy), r.mesh, d.rate, d.mode));
  const LinearSystem b = LinearSystem::from_reaction_coupling(ops, r.coupling, r.grid, r.options);
  CHECK(a.coupling().at(4, 0.3).isApprox(b.coupling().at(4, 0.3), 1e-15));
  CHECK(a.coupling().at(4, 0.3)(0, 0) == doctest::Approx(r.coupling.at(4, 0.3)(0, 0) - ops[0].removal[4]));
}

TEST_CASE("continuity probe: changes shrink with the perturbation") {
  const ContinuityReport rep = continuity_probe(recipe(10, true), 1e-3, 1e-10);
  CHECK(rep.ok);
  CHECK(rep.entries.size() >= 6);
  for (const ContinuityEntry& e : rep.entries) {
    CHECK(e.ok);
    CHECK(std::abs(e.ds) <= 10.0 * e.delta);
    CHECK(std::abs(e.ds_half) <= std::abs(e.ds) + 1e-9);
  }
  CHECK(rep.baseline == doctest::Approx(dense_spectral_bound(recipe(10, true).build())).epsilon(1e-8));
}

TEST_CASE("bound direction names") {
  CHECK(to_string(BoundDirection::lower) == "lower");
  CHECK(to_string(BoundDirection::upper) == "upper");
}
