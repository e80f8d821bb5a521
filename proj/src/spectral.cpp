#include "nlgpe/spectral.hpp"

#include "nlgpe/error.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <sstream>

namespace nlgpe {

namespace {

void require_positive(const StateField& v, const char* where) {
  if (!v.values.allFinite() || v.values.minCoeff() <= 0.0) {
    std::ostringstream os;
    os << where << ": iterate lost strict positivity (min " << v.values.minCoeff()
       << "); check the irreducibility of the coupling or refine the mesh";
    throw NumericalError(os.str());
  }
}

void normalize(StateField& v) {
  const double s = v.sup_norm();
  if (!(s > 0.0) || !std::isfinite(s)) throw NumericalError("power_bracket: iterate vanished or overflowed");
  v.values /= s;
}

}  // namespace

std::string to_string(BoundDirection d) { return d == BoundDirection::lower ? "lower" : "upper"; }

SpectralEstimate power_bracket(const LinearSystem& system, double tol, std::size_t max_iter, const StateField* start) {
  if (!(tol > 0.0)) throw ConfigError("power_bracket: tol must be positive");
  const double period = system.grid().period();
  SpectralEstimate est;

  StateField v;
  if (start) {
    v = *start;
    v.time = 0.0;
    if (v.nodes() != system.nodes() || v.components() != system.components())
      throw ConfigError("power_bracket: start state has the wrong shape");
    require_positive(v, "power_bracket start");
    normalize(v);
  } else {
    v = StateField::constant(system.nodes(), system.components(), 1.0);
    for (std::size_t j = 0; j <= system.components(); ++j) {
      v = period_map(system, v, &est.diagnostics);
      v.time = 0.0;
      normalize(v);
    }
    require_positive(v, "power_bracket");
  }

  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (std::size_t it = 1; it <= max_iter; ++it) {
    StateField w = period_map(system, v, &est.diagnostics);
    w.time = 0.0;
    const Eigen::ArrayXXd q = w.values.array() / v.values.array();
    const double q_lo = q.minCoeff(), q_hi = q.maxCoeff();
    if (!std::isfinite(q_lo) || !std::isfinite(q_hi) || q_lo <= 0.0)
      throw NumericalError("power_bracket: non-finite or non-positive Collatz-Wielandt ratio");
    lo = std::max(lo, std::log(q_lo) / period);
    hi = std::min(hi, std::log(q_hi) / period);
    est.history.emplace_back(lo, hi);
    est.iterations = it;
    est.iterate = v;
    est.image = w;
    if (hi - lo <= tol) {
      est.gap_flag = true;
      break;
    }
    v = std::move(w);
    normalize(v);
    require_positive(v, "power_bracket");
  }
  est.s_lo = lo;
  est.s_hi = hi;
  est.r_estimate = std::exp(est.s_estimate() * period);
  return est;
}

CertifiedBound certify_bound(const LinearSystem& system, const Trajectory& phi, BoundDirection direction) {
  const TimeGrid& grid = system.grid();
  const std::size_t steps = grid.steps();
  if (phi.size() != steps + 1) throw ConfigError("certify_bound: trajectory must hold one period of grid samples");
  if (std::abs(phi.front().time) > 1e-12 * grid.period()) throw ConfigError("certify_bound: trajectory must start at t = 0");
  for (const auto& s : phi.snapshots) {
    if (s.nodes() != system.nodes() || s.components() != system.components())
      throw ConfigError("certify_bound: trajectory shape does not match the system");
    if (!s.values.allFinite() || s.values.minCoeff() <= 0.0)
      throw NumericalError("certify_bound: candidate is not strictly positive at t = " + std::to_string(s.time));
  }

  CertifiedBound out;
  const Eigen::ArrayXXd pr = phi.back().values.array() / phi.front().values.array();
  if (direction == BoundDirection::lower) {
    out.period_ratio = pr.minCoeff();
    if (out.period_ratio < 1.0 - 1e-12)
      throw NumericalError("certify_bound: lower direction needs phi(T) >= phi(0); min ratio " +
                           std::to_string(out.period_ratio));
  } else {
    out.period_ratio = pr.maxCoeff();
    if (out.period_ratio > 1.0 + 1e-12)
      throw NumericalError("certify_bound: upper direction needs phi(T) <= phi(0); max ratio " +
                           std::to_string(out.period_ratio));
  }

  const double dt = grid.dt();
  out.min_ratio = std::numeric_limits<double>::infinity();
  out.max_ratio = -std::numeric_limits<double>::infinity();
  Eigen::MatrixXd action, deriv;
  for (std::size_t k = 0; k <= steps; ++k) {
    const auto& s = phi.snapshots;
    if (k == 0)
      deriv = (-3.0 * s[0].values + 4.0 * s[1].values - s[2].values) / (2.0 * dt);
    else if (k == steps)
      deriv = (3.0 * s[k].values - 4.0 * s[k - 1].values + s[k - 2].values) / (2.0 * dt);
    else
      deriv = (s[k + 1].values - s[k - 1].values) / (2.0 * dt);
    system.apply(grid.time(k), s[k].values, action);
    const Eigen::ArrayXXd ratio = (action - deriv).array() / s[k].values.array();
    out.min_ratio = std::min(out.min_ratio, ratio.minCoeff());
    out.max_ratio = std::max(out.max_ratio, ratio.maxCoeff());
    out.samples += static_cast<std::size_t>(ratio.size());
  }
  out.beta = direction == BoundDirection::lower ? out.min_ratio : out.max_ratio;
  return out;
}

EigenTrajectory eigen_trajectory(const LinearSystem& system, const StateField& v, BoundDirection direction) {
  StateField start = v;
  start.time = 0.0;
  require_positive(start, "eigen_trajectory");
  normalize(start);
  EigenTrajectory out;
  out.phi = trajectory_linear(system, start, 1);
  const double period = system.grid().period();
  const Eigen::ArrayXXd pr = out.phi.back().values.array() / out.phi.front().values.array();
  const double q = direction == BoundDirection::lower ? pr.minCoeff() : pr.maxCoeff();
  out.s = std::log(q) / period;
  double sup = 0.0;
  for (auto& snap : out.phi.snapshots) {
    snap.values *= std::exp(-out.s * snap.time);
    sup = std::max(sup, snap.sup_norm());
  }
  for (auto& snap : out.phi.snapshots) snap.values /= sup;
  return out;
}

Eigen::MatrixXd dense_period_matrix(const LinearSystem& system) {
  const auto n = static_cast<Eigen::Index>(system.nodes());
  const auto m = static_cast<Eigen::Index>(system.components());
  Eigen::MatrixXd out(n * m, n * m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index a = 0; a < n; ++a) {
      StateField e = StateField::constant(system.nodes(), system.components(), 0.0);
      e.values(a, i) = 1.0;
      const StateField img = period_map(system, e);
      for (Eigen::Index k = 0; k < m; ++k) out.block(k * n, i * n + a, n, 1) = img.values.col(k);
    }
  }
  return out;
}

double dense_spectral_bound(const LinearSystem& system) {
  const Eigen::MatrixXd p = dense_period_matrix(system);
  Eigen::EigenSolver<Eigen::MatrixXd> es(p, false);
  if (es.info() != Eigen::Success) throw NumericalError("dense_spectral_bound: eigensolver failed");
  const double rho = es.eigenvalues().cwiseAbs().maxCoeff();
  return std::log(rho) / system.grid().period();
}

LinearSystem SystemRecipe::build() const {
  std::vector<DispersalOperator> ops;
  ops.reserve(dispersal.size());
  for (const auto& d : dispersal)
    ops.push_back(assemble_dispersal(normalize_kernel(d.profile, mesh, d.policy), mesh, d.rate, d.mode));
  return LinearSystem::from_reaction_coupling(std::move(ops), coupling, grid, options);
}

ContinuityReport continuity_probe(const SystemRecipe& recipe, double delta, double tol,
                                  const SpectralEstimator& estimator) {
  if (!(delta > 0.0)) throw ConfigError("continuity_probe: delta must be positive");
  SpectralEstimator est = estimator;
  if (!est) est = [tol](const LinearSystem& s) { return power_bracket(s, tol, 20000).s_estimate(); };

  ContinuityReport report;
  report.baseline = est(recipe.build());

  auto probe = [&](const std::string& name, const std::function<SystemRecipe(double)>& perturb) {
    ContinuityEntry e;
    e.datum = name;
    e.delta = delta;
    e.ds = est(perturb(delta).build()) - report.baseline;
    e.ds_half = est(perturb(0.5 * delta).build()) - report.baseline;
    e.lipschitz = std::max(std::abs(e.ds), 2.0 * std::abs(e.ds_half)) / delta;
    return e;
  };

  const std::size_t m = recipe.coupling.components();
  for (double sign : {1.0, -1.0}) {
    auto e = probe(sign > 0 ? "diagonal+" : "diagonal-", [&](double h) {
      SystemRecipe r = recipe;
      r.coupling = r.coupling.with_diagonal_shift(sign * h);
      return r;
    });
    e.ok = std::abs(e.ds) <= delta + tol;
    std::ostringstream os;
    os << "|ds - shift| = " << std::abs(e.ds - sign * delta);
    e.note = os.str();
    report.entries.push_back(e);
  }
  if (m > 1) {
    auto e = probe("offdiagonal+", [&](double h) {
      SystemRecipe r = recipe;
      r.coupling = r.coupling.with_offdiagonal_shift(h);
      return r;
    });
    e.ok = e.ds >= -tol && e.ds_half >= -tol;
    report.entries.push_back(e);
  }
  auto two_point = [tol](ContinuityEntry& e) {
    e.ok = std::isfinite(e.ds) && std::abs(e.ds) <= 3.0 * std::abs(e.ds_half) + 2.0 * tol;
  };
  for (std::size_t i = 0; i < recipe.dispersal.size(); ++i) {
    if (recipe.dispersal[i].profile.family != KernelFamily::tabulated) {
      auto e = probe("kernel_width[" + std::to_string(i) + "]", [&](double h) {
        SystemRecipe r = recipe;
        auto& p = r.dispersal[i].profile;
        if (p.family == KernelFamily::rescaled)
          p.delta *= 1.0 + h;
        else
          p.width *= 1.0 + h;
        return r;
      });
      two_point(e);
      report.entries.push_back(e);
    }
    auto e = probe("rate[" + std::to_string(i) + "]", [&](double h) {
      SystemRecipe r = recipe;
      r.dispersal[i].rate += h;
      return r;
    });
    two_point(e);
    report.entries.push_back(e);
  }
  for (const auto& e : report.entries) report.ok = report.ok && e.ok;
  return report;
}

}  // namespace nlgpe
