#include <doctest.h>

#include "nlgpe/error.hpp"
#include "nlgpe/wnv.hpp"

#include <cmath>
#include <numbers>

using namespace nlgpe;

namespace {

struct Params {
  double a1 = 1.0, a2 = 2.0, b1 = 0.2, b2 = 0.5, c1 = 1.0, c2 = 1.0, mu1 = 2.0, mu2 = 2.0, gamma = 0.1;
};

WnvConfig make_config(const Params& p, std::size_t n = 8) {
  const SpatialMesh mesh = build_mesh(1, Box{{{0.0, 1.0}}}, {n});
  auto c = [](double v) { return PeriodicScalarField::constant(v); };
  WnvCoefficients k{c(p.a1), c(p.a2), c(p.b1), c(p.b2), c(p.c1), c(p.c2), c(p.mu1), c(p.mu2), c(p.gamma)};
  const DispersalRecipe host{KernelProfile::gaussian(0.1), 1.0, BoundaryMode::neumann_type};
  const DispersalRecipe vec{KernelProfile::tent(0.2), 0.5, BoundaryMode::neumann_type};
  Eigen::MatrixXd init(static_cast<Eigen::Index>(n), 4);
  init.col(0).setConstant(0.5);
  init.col(1).setConstant(0.1);
  init.col(2).setConstant(1.0);
  init.col(3).setConstant(0.2);
  return WnvConfig{mesh, TimeGrid(1.0, 16), host, vec, k, init, StepOptions{}};
}

// homogeneous oracles
struct Closed {
  double h, v, lambda, hi, vi;
};

Closed closed_form(const Params& p) {
  Closed c{};
  c.h = (p.a1 - p.b1) / p.c1;
  c.v = (p.a2 - p.b2) / p.c2;
  const double alpha = p.b1 + p.gamma + p.c1 * c.h, beta = p.b2 + p.c2 * c.v;
  const double tr = -alpha - beta, det = alpha * beta - p.mu1 * p.mu2 * c.v / c.h;
  c.lambda = 0.5 * (tr + std::sqrt(tr * tr - 4.0 * det));
  // equilibrium of -alpha Hi + mu1 (H - Hi)/H Vi = 0, -beta Vi + mu2 (V - Vi)/H Hi = 0
  c.hi = c.h * (p.mu1 * p.mu2 * c.v - alpha * beta * c.h) / (p.mu2 * (alpha * c.h + p.mu1 * c.v));
  c.vi = p.mu2 * c.v * c.hi / (beta * c.h + p.mu2 * c.hi);
  return c;
}

WnvOptions options() {
  WnvOptions o;
  o.gpe.tol_lambda = 1e-3;
  o.gpe.power_tol = 1e-9;
  return o;
}

}  // namespace

TEST_CASE("model validation") {
  CHECK_NOTHROW(validate_wnv(make_config({})));
  Params bad;
  bad.a1 = 0.0;
  CHECK_THROWS_AS(validate_wnv(make_config(bad)), ConfigError);
  Params neg;
  neg.gamma = -0.1;
  CHECK_THROWS_AS(validate_wnv(make_config(neg)), ConfigError);
  Params no_bite;
  no_bite.mu1 = 0.0;
  CHECK_THROWS_AS(validate_wnv(make_config(no_bite)), ConfigError);
  WnvConfig shape = make_config({});
  shape.initial = Eigen::MatrixXd::Ones(8, 3);
  CHECK_THROWS_AS(validate_wnv(shape), ConfigError);
}

TEST_CASE("full reaction: Jacobian, totals and the linear part") {
  const Params p;
  const WnvConfig cfg = make_config(p, 3);
  const WnvReaction f(cfg.coef, 3);
  Eigen::MatrixXd u(3, 4);
  u << 0.5, 0.2, 1.0, 0.3, 0.1, 0.05, 0.7, 0.4, 0.9, 0.6, 0.2, 0.1;
  Eigen::MatrixXd out;
  f.evaluate(0.3, u, out);
  for (Eigen::Index a = 0; a < 3; ++a) {
    const double h = u(a, 0) + u(a, 1), v = u(a, 2) + u(a, 3);
    CHECK(out(a, 0) + out(a, 1) == doctest::Approx(h * (p.a1 - p.b1 - p.c1 * h)).epsilon(1e-13));
    CHECK(out(a, 2) + out(a, 3) == doctest::Approx(v * (p.a2 - p.b2 - p.c2 * v)).epsilon(1e-13));
  }
  const Eigen::VectorXd x = u.row(1).transpose();
  const Eigen::MatrixXd j = f.jacobian(1, 0.3, x);
  for (int k = 0; k < 4; ++k) {
    Eigen::MatrixXd up = u, dn = u, fu, fd;
    const double h = 1e-6;
    up(1, k) += h;
    dn(1, k) -= h;
    f.evaluate(0.3, up, fu);
    f.evaluate(0.3, dn, fd);
    for (int i = 0; i < 4; ++i) CHECK(j(i, k) == doctest::Approx((fu(1, i) - fd(1, i)) / (2 * h)).epsilon(1e-7));
  }
  const Eigen::MatrixXd lin = f.jacobian_at_zero().at(0, 0.0);
  CHECK(lin(0, 0) == doctest::Approx(p.a1 - p.b1));
  CHECK(lin(0, 1) == doctest::Approx(p.a1 + p.gamma));
  CHECK(lin(1, 1) == doctest::Approx(-(p.b1 + p.gamma)));
  CHECK(lin(2, 2) == doctest::Approx(p.a2 - p.b2));
  CHECK(lin(2, 3) == doctest::Approx(p.a2));
  CHECK(lin(3, 3) == doctest::Approx(-p.b2));
  CHECK(lin(1, 3) == 0.0);

  // no host: incidence vanishes
  Eigen::MatrixXd empty = Eigen::MatrixXd::Zero(3, 4);
  empty.col(3).setConstant(0.5);
  f.evaluate(0.0, empty, out);
  CHECK(out.col(1).isZero(0.0));
  CHECK(out.allFinite());
}

TEST_CASE("endemic case: lambda and equilibrium match the closed forms") {
  const Params p;
  const Closed c = closed_form(p);
  const WnvConfig cfg = make_config(p);
  const WnvLogistic lg = wnv_logistic_pair(cfg, options());
  CHECK(lg.lambda_g1 == doctest::Approx(p.a1 - p.b1).epsilon(1e-6));
  CHECK(lg.lambda_g2 == doctest::Approx(p.a2 - p.b2).epsilon(1e-6));
  REQUIRE(lg.host_positive);
  REQUIRE(lg.vector_positive);
  const WnvReduction red = wnv_reduce(cfg, lg);
  CHECK(red.sigma0 > 0.0);
  CHECK((red.host_total.front().values.array() - c.h).abs().maxCoeff() <= 1e-7);
  CHECK((red.vector_total.front().values.array() - c.v).abs().maxCoeff() <= 1e-7);

  const WnvReducedResult rr = wnv_reduced_solve(red, cfg.mesh, 0.0, options());
  CHECK(std::abs(rr.bracket.lambda_estimate - c.lambda) <= 1e-6);
  REQUIRE(rr.threshold_case == ThresholdCase::positive);
  REQUIRE(rr.solution);
  CHECK(rr.exists);
  CHECK(rr.kappa1 > 0.0);
  CHECK(rr.kappa2 > 0.0);
  CHECK(rr.clamp_difference <= 1e-8);
  const Eigen::MatrixXd& u = rr.solution->trajectory.front().values;
  CHECK((u.col(0).array() - c.hi).abs().maxCoeff() <= 1e-6);
  CHECK((u.col(1).array() - c.vi).abs().maxCoeff() <= 1e-6);

  WnvVerifyOptions vo;
  vo.periods = 60;
  const WnvEvidence ev = wnv_simulate_verify(cfg, lg, &rr, vo);
  CHECK(ev.predicted == WnvCase::endemic);
  CHECK(ev.pass);
  CHECK(ev.host_conservation <= 1e-8);
  CHECK(ev.vector_conservation <= 1e-8);
  CHECK(std::abs(ev.limit(0, 1) - c.hi) <= 1e-6);
  CHECK(std::abs(ev.final_period.front().values(0, 3) - c.vi) <= 1e-3);
  CHECK(ev.components.size() == 4);
}

TEST_CASE("perturbed reductions are ordered in sigma") {
  const WnvConfig cfg = make_config({});
  const WnvLogistic lg = wnv_logistic_pair(cfg, options());
  const WnvReduction red = wnv_reduce(cfg, lg);
  const double s = 0.5 * red.sigma0;
  const double lo = dense_spectral_bound(red.linear_system(-s));
  const double mid = dense_spectral_bound(red.linear_system(0.0));
  const double hi = dense_spectral_bound(red.linear_system(s));
  CHECK(lo < mid);
  CHECK(mid < hi);
  const Trajectory up = red.upper_candidate(s);
  CHECK((up.front().values.col(0) - red.host_total.front().values.col(0)).minCoeff() > 0.0);
  CHECK_THROWS_AS(wnv_reduced_solve(red, cfg.mesh, 2.0 * red.sigma0, options()), ConfigError);
}

TEST_CASE("disease-free and extinction cases") {
  Params low;
  low.mu1 = low.mu2 = 0.5;
  CHECK(closed_form(low).lambda < 0.0);
  const WnvConfig cfg = make_config(low);
  const WnvLogistic lg = wnv_logistic_pair(cfg, options());
  const WnvReduction red = wnv_reduce(cfg, lg);
  const WnvReducedResult rr = wnv_reduced_solve(red, cfg.mesh, 0.0, options());
  CHECK(std::abs(rr.bracket.lambda_estimate - closed_form(low).lambda) <= 1e-6);
  CHECK(rr.threshold_case == ThresholdCase::negative);
  CHECK_FALSE(rr.certificate.empty());
  WnvVerifyOptions vo;
  vo.periods = 60;
  const WnvEvidence ev = wnv_simulate_verify(cfg, lg, &rr, vo);
  CHECK(ev.predicted == WnvCase::disease_free);
  CHECK(ev.pass);
  CHECK(ev.final_period.front().values.col(1).maxCoeff() <= 1e-6);
  CHECK(ev.final_period.front().values.col(3).maxCoeff() <= 1e-6);

  Params no_vec;
  no_vec.a2 = 0.3;
  const WnvConfig cv = make_config(no_vec);
  const WnvLogistic lv = wnv_logistic_pair(cv, options());
  CHECK_FALSE(lv.vector_positive);
  CHECK_THROWS_AS(wnv_reduce(cv, lv), ConfigError);
  // decay at rate 0.2 per period needs more periods to reach the zero tolerance
  vo.periods = 100;
  const WnvEvidence evv = wnv_simulate_verify(cv, lv, nullptr, vo);
  CHECK(evv.predicted == WnvCase::vector_extinct);
  CHECK(evv.pass);

  // host extinction with standard incidence: H_i / H tends to 1, so the
  // vector infection does not switch off and the explicit stepper stiffens
  Params no_host;
  no_host.a1 = 0.05;
  WnvConfig ch = make_config(no_host);
  ch.options.max_substeps = 5000;
  const WnvLogistic lh = wnv_logistic_pair(ch, options());
  CHECK_FALSE(lh.host_positive);
  CHECK(lh.vector_positive);
  const WnvEvidence evh = wnv_simulate_verify(ch, lh, nullptr, vo);
  CHECK(evh.predicted == WnvCase::host_extinct);
  CHECK(evh.periods_completed < vo.periods);
  CHECK_FALSE(evh.pass);
  REQUIRE(evh.periods_completed > 0);
  const Eigen::MatrixXd& last = evh.final_period.back().values;
  CHECK((last.col(0) + last.col(1)).maxCoeff() <= 1e-3);
  CHECK(last.col(3).minCoeff() >= 0.5);

  Params none;
  none.a1 = 0.05;
  none.a2 = 0.3;
  const WnvConfig cn = make_config(none);
  const WnvLogistic ln = wnv_logistic_pair(cn, options());
  const WnvEvidence evn = wnv_simulate_verify(cn, ln, nullptr, vo);
  CHECK(evn.predicted == WnvCase::total_extinction);
  CHECK(evn.pass);
}

TEST_CASE("case names") {
  CHECK(to_string(WnvCase::endemic) == "endemic");
  CHECK(to_string(WnvCase::disease_free) == "disease-free");
  CHECK(to_string(WnvCase::host_extinct) == "host-extinct");
  CHECK(to_string(WnvCase::vector_extinct) == "vector-extinct");
  CHECK(to_string(WnvCase::total_extinction) == "total-extinction");
  CHECK(to_string(WnvCase::indeterminate) == "indeterminate");
}
