#include "nlgpe/wnv.hpp"

#include "nlgpe/error.hpp"

#include <cmath>
#include <sstream>

namespace nlgpe {

namespace {

PeriodicScalarField difference(const PeriodicScalarField& a, const PeriodicScalarField& b, const std::string& desc) {
  return PeriodicScalarField::function([a, b](std::size_t n, double t) { return a.at(n, t) - b.at(n, t); }, desc,
                                       a.time_independent() && b.time_independent());
}

PeriodicScalarField component_table(const Trajectory& tr, Eigen::Index component, double period) {
  const std::size_t m = tr.size() - 1;
  Eigen::MatrixXd samples(tr.front().values.rows(), static_cast<Eigen::Index>(m));
  for (std::size_t k = 0; k < m; ++k) samples.col(static_cast<Eigen::Index>(k)) = tr.snapshots[k].values.col(component);
  return PeriodicScalarField::table(std::move(samples), period);
}

DispersalOperator build_op(const DispersalRecipe& r, const SpatialMesh& mesh) {
  return assemble_dispersal(normalize_kernel(r.profile, mesh, r.policy), mesh, r.rate, r.mode);
}

LogisticProblem species_problem(const WnvConfig& c, bool host) {
  const auto& k = c.coef;
  return LogisticProblem{c.mesh,
                         c.grid,
                         host ? c.host : c.vector,
                         host ? difference(k.a1, k.b1, "a1 - b1") : difference(k.a2, k.b2, "a2 - b2"),
                         host ? k.c1 : k.c2,
                         c.options};
}

double sup_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

void validate_wnv(const WnvConfig& config) {
  const std::size_t n = config.mesh.size();
  const auto& k = config.coef;
  auto check = [&](const PeriodicScalarField& f, const char* name, bool strict) {
    const Eigen::MatrixXd s = f.sample(n, config.grid);
    if (!s.allFinite()) throw ConfigError(std::string("wnv: non-finite samples of ") + name);
    const double mn = s.minCoeff();
    if (strict ? !(mn > 0.0) : !(mn >= 0.0))
      throw ConfigError(std::string("wnv: ") + name + (strict ? " must be positive" : " must be nonnegative") +
                        " (min sample " + std::to_string(mn) + ")");
    return s;
  };
  check(k.a1, "a1", true), check(k.a2, "a2", true), check(k.c1, "c1", true), check(k.c2, "c2", true);
  check(k.b1, "b1", false), check(k.b2, "b2", false), check(k.gamma, "gamma", false);
  const Eigen::MatrixXd m1 = check(k.mu1, "mu1", false), m2 = check(k.mu2, "mu2", false);
  bool found = false;
  for (Eigen::Index a = 0; a < m1.rows() && !found; ++a) found = m1.row(a).minCoeff() > 0.0 && m2.row(a).minCoeff() > 0.0;
  if (!found) throw ConfigError("wnv: need a node where mu1 and mu2 are positive for all t");
  if (config.initial.size() != 0) {
    if (config.initial.rows() != static_cast<Eigen::Index>(n) || config.initial.cols() != 4)
      throw ConfigError("wnv: initial state must be N x 4");
    if (config.initial.minCoeff() < 0.0) throw ConfigError("wnv: initial state must be nonnegative");
  }
}

WnvReaction::WnvReaction(WnvCoefficients coef, std::size_t nodes) : coef_(std::move(coef)), nodes_(nodes) {}

void WnvReaction::local(std::size_t node, double t, const double* u, double* f, Eigen::MatrixXd* jac) const {
  const auto& k = coef_;
  const double a1 = k.a1.at(node, t), a2 = k.a2.at(node, t), b1 = k.b1.at(node, t), b2 = k.b2.at(node, t);
  const double c1 = k.c1.at(node, t), c2 = k.c2.at(node, t), mu1 = k.mu1.at(node, t), mu2 = k.mu2.at(node, t);
  const double g = k.gamma.at(node, t);
  const double hu = u[0], hi = u[1], vu = u[2], vi = u[3];
  const double h = hu + hi, v = vu + vi;
  const bool active = h > kIncidenceFloor;
  const double s = active ? hu / h : 0.0, q = active ? hi / h : 0.0;
  const double i1 = mu1 * s * vi, i2 = mu2 * q * vu;
  if (f) {
    f[0] = -b1 * hu + a1 * h - c1 * h * hu - i1 + g * hi;
    f[1] = -b1 * hi + i1 - c1 * h * hi - g * hi;
    f[2] = -b2 * vu + a2 * v - c2 * v * vu - i2;
    f[3] = -b2 * vi + i2 - c2 * v * vi;
  }
  if (jac) {
    Eigen::MatrixXd& j = *jac;
    j.setZero(4, 4);
    const double h2 = active ? h * h : 1.0;
    const double ds_hu = active ? hi / h2 : 0.0, ds_hi = active ? -hu / h2 : 0.0;
    j(0, 0) = -b1 + a1 - c1 * (h + hu) - mu1 * vi * ds_hu;
    j(0, 1) = a1 - c1 * hu - mu1 * vi * ds_hi + g;
    j(0, 3) = -mu1 * s;
    j(1, 0) = mu1 * vi * ds_hu - c1 * hi;
    j(1, 1) = -b1 + mu1 * vi * ds_hi - c1 * (h + hi) - g;
    j(1, 3) = mu1 * s;
    // q = 1 - s
    j(2, 0) = mu2 * vu * ds_hu;
    j(2, 1) = mu2 * vu * ds_hi;
    j(2, 2) = -b2 + a2 - c2 * (v + vu) - mu2 * q;
    j(2, 3) = a2 - c2 * vu;
    j(3, 0) = -mu2 * vu * ds_hu;
    j(3, 1) = -mu2 * vu * ds_hi;
    j(3, 2) = mu2 * q - c2 * vi;
    j(3, 3) = -b2 - c2 * (v + vi);
  }
}

void WnvReaction::evaluate(double t, const Eigen::MatrixXd& u, Eigen::MatrixXd& out) const {
  if (u.cols() != 4 || static_cast<std::size_t>(u.rows()) != nodes_) throw ConfigError("wnv: state must be N x 4");
  out.resize(u.rows(), 4);
  double row[4], f[4];
  for (Eigen::Index a = 0; a < u.rows(); ++a) {
    for (int i = 0; i < 4; ++i) row[i] = u(a, i);
    local(static_cast<std::size_t>(a), t, row, f, nullptr);
    for (int i = 0; i < 4; ++i) out(a, i) = f[i];
  }
}

Eigen::MatrixXd WnvReaction::jacobian(std::size_t node, double t, const Eigen::VectorXd& u) const {
  Eigen::MatrixXd j;
  local(node, t, u.data(), nullptr, &j);
  return j;
}

PeriodicMatrixField WnvReaction::jacobian_at_zero() const {
  const auto& k = coef_;
  PeriodicMatrixField b(4, nodes_);
  b(0, 0) = difference(k.a1, k.b1, "a1 - b1");
  b(0, 1) = PeriodicScalarField::function([k](std::size_t n, double t) { return k.a1.at(n, t) + k.gamma.at(n, t); },
                                          "a1 + gamma");
  b(1, 1) = PeriodicScalarField::function([k](std::size_t n, double t) { return -k.b1.at(n, t) - k.gamma.at(n, t); },
                                          "-(b1 + gamma)");
  b(2, 2) = difference(k.a2, k.b2, "a2 - b2");
  b(2, 3) = k.a2;
  b(3, 3) = PeriodicScalarField::function([k](std::size_t n, double t) { return -k.b2.at(n, t); }, "-b2");
  return b;
}

WnvReducedReaction::WnvReducedReaction(std::shared_ptr<const Data> data, double sigma, bool clamp)
    : data_(std::move(data)), sigma_(sigma), clamp_(clamp) {}

void WnvReducedReaction::evaluate(double t, const Eigen::MatrixXd& u, Eigen::MatrixXd& out) const {
  const auto& d = *data_;
  const auto& k = d.coef;
  out.resize(u.rows(), 2);
  for (Eigen::Index a = 0; a < u.rows(); ++a) {
    const auto n = static_cast<std::size_t>(a);
    const double ht = d.host_total.at(n, t), vt = d.vector_total.at(n, t);
    const double p1 = d.phi1.at(n, t), p2 = d.phi2.at(n, t);
    const double den = ht - sigma_ * p1;
    if (!(den > 0.0)) {
      std::ostringstream os;
      os << "wnv reduced: H - sigma phi_1 = " << den << " at node " << n << ", t = " << t;
      throw NumericalError(os.str());
    }
    const double hi = u(a, 0), vi = u(a, 1);
    double s1 = ht + sigma_ * p1 - hi, s2 = vt + sigma_ * p2 - vi;
    if (clamp_) s1 = std::max(s1, 0.0), s2 = std::max(s2, 0.0);
    out(a, 0) = -(k.b1.at(n, t) + k.gamma.at(n, t) + k.c1.at(n, t) * (ht - sigma_ * p1)) * hi +
                k.mu1.at(n, t) * s1 / den * vi;
    out(a, 1) = -(k.b2.at(n, t) + k.c2.at(n, t) * (vt - sigma_ * p2)) * vi + k.mu2.at(n, t) * s2 / den * hi;
  }
}

Eigen::MatrixXd WnvReducedReaction::jacobian(std::size_t n, double t, const Eigen::VectorXd& u) const {
  const auto& d = *data_;
  const auto& k = d.coef;
  const double ht = d.host_total.at(n, t), vt = d.vector_total.at(n, t);
  const double p1 = d.phi1.at(n, t), p2 = d.phi2.at(n, t);
  const double den = ht - sigma_ * p1;
  const double hi = u[0], vi = u[1];
  double s1 = ht + sigma_ * p1 - hi, s2 = vt + sigma_ * p2 - vi;
  const bool act1 = !clamp_ || s1 > 0.0, act2 = !clamp_ || s2 > 0.0;
  if (clamp_) s1 = std::max(s1, 0.0), s2 = std::max(s2, 0.0);
  const double mu1 = k.mu1.at(n, t), mu2 = k.mu2.at(n, t);
  Eigen::MatrixXd j(2, 2);
  j(0, 0) = -(k.b1.at(n, t) + k.gamma.at(n, t) + k.c1.at(n, t) * (ht - sigma_ * p1)) - (act1 ? mu1 * vi / den : 0.0);
  j(0, 1) = mu1 * s1 / den;
  j(1, 0) = mu2 * s2 / den;
  j(1, 1) = -(k.b2.at(n, t) + k.c2.at(n, t) * (vt - sigma_ * p2)) - (act2 ? mu2 * hi / den : 0.0);
  return j;
}

PeriodicMatrixField WnvReducedReaction::jacobian_at_zero() const {
  auto d = data_;
  const double s = sigma_;
  PeriodicMatrixField b(2, d->nodes);
  b(0, 0) = PeriodicScalarField::function(
      [d, s](std::size_t n, double t) {
        const auto& k = d->coef;
        return -(k.b1.at(n, t) + k.gamma.at(n, t) + k.c1.at(n, t) * (d->host_total.at(n, t) - s * d->phi1.at(n, t)));
      },
      "-(b1 + gamma + c1 (H - sigma phi1))");
  b(0, 1) = PeriodicScalarField::function(
      [d, s](std::size_t n, double t) {
        const double h = d->host_total.at(n, t), p = d->phi1.at(n, t);
        return d->coef.mu1.at(n, t) * (h + s * p) / (h - s * p);
      },
      "mu1 (H + sigma phi1) / (H - sigma phi1)");
  b(1, 0) = PeriodicScalarField::function(
      [d, s](std::size_t n, double t) {
        return d->coef.mu2.at(n, t) * (d->vector_total.at(n, t) + s * d->phi2.at(n, t)) /
               (d->host_total.at(n, t) - s * d->phi1.at(n, t));
      },
      "mu2 (V + sigma phi2) / (H - sigma phi1)");
  b(1, 1) = PeriodicScalarField::function(
      [d, s](std::size_t n, double t) {
        const auto& k = d->coef;
        return -(k.b2.at(n, t) + k.c2.at(n, t) * (d->vector_total.at(n, t) - s * d->phi2.at(n, t)));
      },
      "-(b2 + c2 (V - sigma phi2))");
  return b;
}

WnvLogistic wnv_logistic_pair(const WnvConfig& config, const WnvOptions& options) {
  validate_wnv(config);
  LogisticOptions lo;
  lo.gpe = options.gpe;
  lo.tol = options.logistic_tol;
  lo.max_sweeps = options.max_sweeps;
  lo.upper_margin = options.upper_margin;
  WnvLogistic out;
  out.host = logistic_solve(species_problem(config, true), lo);
  out.vector = logistic_solve(species_problem(config, false), lo);
  out.lambda_g1 = out.host.verdict.lambda;
  out.lambda_g2 = out.vector.verdict.lambda;
  out.host_positive = out.host.verdict.threshold_case == ThresholdCase::positive;
  out.vector_positive = out.vector.verdict.threshold_case == ThresholdCase::positive;
  return out;
}

PeriodicMatrixField WnvReduction::coupling(double sigma) const { return linear_system(sigma).coupling(); }

LinearSystem WnvReduction::linear_system(double sigma) const {
  return reduced_system(sigma, true).linearization_at_zero();
}

NonlinearSystem WnvReduction::reduced_system(double sigma, bool clamp) const {
  return NonlinearSystem(dispersal, std::make_shared<WnvReducedReaction>(data, sigma, clamp), grid, options);
}

Trajectory WnvReduction::upper_candidate(double sigma) const {
  Trajectory tr;
  for (std::size_t k = 0; k < host_total.size(); ++k) {
    StateField s;
    s.time = host_total.snapshots[k].time;
    s.values.resize(host_total.snapshots[k].values.rows(), 2);
    s.values.col(0) = host_total.snapshots[k].values.col(0) + sigma * phi1.snapshots[k].values.col(0);
    s.values.col(1) = vector_total.snapshots[k].values.col(0) + sigma * phi2.snapshots[k].values.col(0);
    tr.snapshots.push_back(std::move(s));
  }
  return tr;
}

WnvReduction wnv_reduce(const WnvConfig& config, const WnvLogistic& logistic) {
  if (!logistic.host_positive || !logistic.vector_positive || !logistic.host.solution || !logistic.vector.solution)
    throw ConfigError("wnv_reduce: needs lambda(G_1) > 0 and lambda(G_2) > 0");
  const Trajectory& h = logistic.host.solution->trajectory;
  const Trajectory& v = logistic.vector.solution->trajectory;
  for (const auto& s : h.snapshots)
    if (!(s.values.minCoeff() > 0.0)) throw NumericalError("wnv_reduce: host total is not strictly positive");
  for (const auto& s : v.snapshots)
    if (!(s.values.minCoeff() > 0.0)) throw NumericalError("wnv_reduce: vector total is not strictly positive");

  const double period = config.grid.period();
  auto data = std::make_shared<WnvReducedReaction::Data>();
  data->coef = config.coef;
  data->host_total = component_table(h, 0, period);
  data->vector_total = component_table(v, 0, period);
  const Trajectory& phi1 = logistic.host.verdict.bracket.lower_eigen.phi;
  const Trajectory& phi2 = logistic.vector.verdict.bracket.lower_eigen.phi;
  data->phi1 = component_table(phi1, 0, period);
  data->phi2 = component_table(phi2, 0, period);
  data->nodes = config.mesh.size();

  WnvReduction r{data,
                 {build_op(config.host, config.mesh), build_op(config.vector, config.mesh)},
                 config.grid,
                 config.options,
                 h,
                 v,
                 phi1,
                 phi2,
                 0.0,
                 0.0};

  // first sampled |sigma| at which L_sigma stops being cooperative
  double hmax = 0.0;
  for (const auto& s : h.snapshots) hmax = std::max(hmax, s.sup_norm());
  for (const auto& s : v.snapshots) hmax = std::max(hmax, s.sup_norm());
  const double step = hmax / 100.0;
  for (int j = 1; j <= 400 && r.sigma_violation == 0.0; ++j) {
    const double sg = step * j;
    for (double s : {sg, -sg}) {
      for (std::size_t k = 0; k < h.size() && r.sigma_violation == 0.0; ++k) {
        const auto& hk = h.snapshots[k].values;
        const auto& vk = v.snapshots[k].values;
        const auto& p1 = phi1.snapshots[k].values;
        const auto& p2 = phi2.snapshots[k].values;
        const bool bad = (hk - s * p1).minCoeff() <= 0.0 || (hk + s * p1).minCoeff() < 0.0 ||
                         (vk + s * p2).minCoeff() < 0.0 || (vk - s * p2).minCoeff() < 0.0;
        if (bad) r.sigma_violation = sg;
      }
    }
  }
  r.sigma0 = 0.5 * (r.sigma_violation > 0.0 ? r.sigma_violation : 400.0 * step);
  return r;
}

WnvReducedResult wnv_reduced_solve(const WnvReduction& reduction, const SpatialMesh& mesh, double sigma,
                                   const WnvOptions& options) {
  if (std::abs(sigma) > reduction.sigma0)
    throw ConfigError("wnv_reduced_solve: |sigma| exceeds the cooperativity window sigma0 = " +
                      std::to_string(reduction.sigma0));
  WnvReducedResult r;
  r.sigma = sigma;
  r.bracket = solve_gpe(reduction.linear_system(sigma), mesh, options.gpe);
  const double lam = r.bracket.lambda_estimate;
  std::ostringstream cert;
  if (std::abs(lam) <= options.gpe.tol_lambda) {
    r.threshold_case = ThresholdCase::critical;
    cert << "indeterminate: |lambda(L_sigma)| = " << std::abs(lam) << " <= " << options.gpe.tol_lambda;
    r.certificate = cert.str();
    return r;
  }
  if (lam < 0.0) {
    r.threshold_case = ThresholdCase::negative;
    cert << "no positive solution bounded away from zero: such a solution (H_i, V_i) gives "
            "rho = min(inf mu1 V_i / H, inf mu2 H_i / H) > 0 with L_sigma(H_i, V_i) - rho (H_i, V_i) >= 0 "
            "componentwise, forcing lambda(L_sigma) >= rho > 0; computed lambda_hi = "
         << r.bracket.lambda_hi << " (certified upper end " << r.bracket.certified_hi << ")";
    r.certificate = cert.str();
    return r;
  }

  r.threshold_case = ThresholdCase::positive;
  const NonlinearSystem clamped = reduction.reduced_system(sigma, true);
  Trajectory upper = reduction.upper_candidate(sigma);
  double sup_upper = 0.0;
  for (const auto& s : upper.snapshots) sup_upper = std::max(sup_upper, s.sup_norm());
  r.pair = auto_pair(clamped, r.bracket, upper, sup_upper);
  r.solution = monotone_iterate(clamped, *r.pair, options.reduced_tol, options.max_sweeps);

  // the clamp is inactive below the upper candidate, so the same pair serves the unclamped system
  const NonlinearSystem plain = reduction.reduced_system(sigma, false);
  OrderedPair p2 = *r.pair;
  p2.check.upper_residual = residual_range(plain, p2.upper);
  p2.check.upper_residual_ok = p2.check.upper_residual.max <= p2.check.slack;
  r.unclamped = monotone_iterate(plain, p2, options.reduced_tol, options.max_sweeps);

  r.kappa1 = r.kappa2 = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < upper.size(); ++k) {
    const auto& u = r.solution->trajectory.snapshots[k].values;
    r.kappa1 = std::min(r.kappa1, (upper.snapshots[k].values.col(0) - u.col(0)).minCoeff());
    r.kappa2 = std::min(r.kappa2, (upper.snapshots[k].values.col(1) - u.col(1)).minCoeff());
    r.clamp_difference = std::max(r.clamp_difference, sup_diff(u, r.unclamped->trajectory.snapshots[k].values));
  }
  r.exists = r.kappa1 > 0.0 && r.kappa2 > 0.0 && r.solution->trajectory.front().values.minCoeff() > 0.0;
  cert << "positive periodic solution between rho phi (rho = " << r.pair->rho << ") and the upper candidate";
  r.certificate = cert.str();
  return r;
}

std::string to_string(WnvCase c) {
  switch (c) {
    case WnvCase::endemic: return "endemic";
    case WnvCase::disease_free: return "disease-free";
    case WnvCase::host_extinct: return "host-extinct";
    case WnvCase::vector_extinct: return "vector-extinct";
    case WnvCase::total_extinction: return "total-extinction";
    case WnvCase::indeterminate: return "indeterminate";
  }
  return "?";
}

NonlinearSystem wnv_full_system(const WnvConfig& config) {
  const DispersalOperator h = build_op(config.host, config.mesh), v = build_op(config.vector, config.mesh);
  return NonlinearSystem({h, h, v, v}, std::make_shared<WnvReaction>(config.coef, config.mesh.size()), config.grid,
                         config.options);
}

WnvEvidence wnv_simulate_verify(const WnvConfig& config, const WnvLogistic& logistic, const WnvReducedResult* reduced,
                                const WnvVerifyOptions& options) {
  validate_wnv(config);
  const auto n = static_cast<Eigen::Index>(config.mesh.size());
  if (config.initial.rows() != n || config.initial.cols() != 4)
    throw ConfigError("wnv_simulate_verify: initial state must be N x 4");

  WnvEvidence ev;
  ev.limit = Eigen::MatrixXd::Zero(n, 4);
  const bool hp = logistic.host_positive, vp = logistic.vector_positive;
  if (hp && vp) {
    if (!reduced) throw ConfigError("wnv_simulate_verify: the reduced solve is needed when both totals persist");
    ev.limit.col(0) = logistic.host.solution->trajectory.front().values.col(0);
    ev.limit.col(2) = logistic.vector.solution->trajectory.front().values.col(0);
    switch (reduced->threshold_case) {
      case ThresholdCase::positive: {
        ev.predicted = WnvCase::endemic;
        const auto& u = reduced->solution->trajectory.front().values;
        ev.limit.col(0) -= u.col(0);
        ev.limit.col(1) = u.col(0);
        ev.limit.col(2) -= u.col(1);
        ev.limit.col(3) = u.col(1);
        break;
      }
      case ThresholdCase::negative: ev.predicted = WnvCase::disease_free; break;
      case ThresholdCase::critical:
        ev.predicted = WnvCase::indeterminate;
        ev.flags.push_back("lambda(L) is inside the dead zone; the disease-free limit is shown without a verdict");
        break;
    }
  } else if (vp) {
    ev.predicted = WnvCase::host_extinct;
    ev.limit.col(2) = logistic.vector.solution->trajectory.front().values.col(0);
  } else if (hp) {
    ev.predicted = WnvCase::vector_extinct;
    ev.limit.col(0) = logistic.host.solution->trajectory.front().values.col(0);
  } else {
    ev.predicted = WnvCase::total_extinction;
  }

  const NonlinearSystem full = wnv_full_system(config);
  const NonlinearSystem host_sys = logistic_system(species_problem(config, true));
  const NonlinearSystem vector_sys = logistic_system(species_problem(config, false));

  static const char* names[4] = {"H_u", "H_i", "V_u", "V_i"};
  ev.components.resize(4);
  for (int i = 0; i < 4; ++i) ev.components[static_cast<std::size_t>(i)].name = names[i];

  StateField u{config.initial, 0.0};
  StateField ht{u.values.col(0) + u.values.col(1), 0.0}, vt{u.values.col(2) + u.values.col(3), 0.0};
  double min_host = std::numeric_limits<double>::infinity();
  auto record = [&] {
    for (Eigen::Index i = 0; i < 4; ++i)
      ev.components[static_cast<std::size_t>(i)].distances.push_back((u.values.col(i) - ev.limit.col(i)).cwiseAbs().maxCoeff());
    if (hp) ev.host_total_distance.push_back((u.values.col(0) + u.values.col(1) - ev.limit.col(0) - ev.limit.col(1)).cwiseAbs().maxCoeff());
    if (vp) ev.vector_total_distance.push_back((u.values.col(2) + u.values.col(3) - ev.limit.col(2) - ev.limit.col(3)).cwiseAbs().maxCoeff());
    ev.host_conservation = std::max(ev.host_conservation, sup_diff(u.values.col(0) + u.values.col(1), ht.values));
    ev.vector_conservation = std::max(ev.vector_conservation, sup_diff(u.values.col(2) + u.values.col(3), vt.values));
    min_host = std::min(min_host, (u.values.col(0) + u.values.col(1)).minCoeff());
  };
  record();
  bool stopped = false;
  for (std::size_t p = 1; p <= options.periods; ++p) {
    Trajectory tr;
    try {
      tr = trajectory_nonlinear(full, u, 1);
    } catch (const NumericalError& e) {
      std::ostringstream os;
      os << "simulation stopped after " << p - 1 << " periods: " << e.what();
      ev.flags.push_back(os.str());
      stopped = true;
      break;
    }
    u = tr.back();
    u.time = 0.0;
    StateField h0 = ht, v0 = vt;
    ht = trajectory_nonlinear(host_sys, h0, 1).back();
    vt = trajectory_nonlinear(vector_sys, v0, 1).back();
    ht.time = vt.time = 0.0;
    record();
    ev.periods_completed = p;
    ev.final_period = std::move(tr);
  }

  const Eigen::MatrixXd mu = config.coef.mu1.sample(config.mesh.size(), config.grid);
  if (min_host < 1e-8 && mu.maxCoeff() > 0.0)
    ev.flags.push_back("host total fell below 1e-8 while incidence is active; the incidence guard was relevant");

  ev.pass = ev.predicted != WnvCase::indeterminate && !stopped;
  for (Eigen::Index i = 0; i < 4; ++i) {
    auto& c = ev.components[static_cast<std::size_t>(i)];
    c.final_distance = c.distances.back();
    const bool zero = ev.limit.col(i).cwiseAbs().maxCoeff() == 0.0;
    const bool ok = c.final_distance <= (zero ? options.zero_tol : options.pass_tol);
    c.verdict = ok ? "pass" : "inconclusive";
    ev.pass = ev.pass && ok;
  }
  return ev;
}

}  // namespace nlgpe
