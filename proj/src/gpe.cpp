#include "nlgpe/gpe.hpp"

#include "nlgpe/error.hpp"
#include "nlgpe/parallel.hpp"

#include <cmath>
#include <future>
#include <sstream>

namespace nlgpe {

ControlPair build_control_pair(const PeriodicMatrixField& field, const MonodromyResult& theta, double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("build_control_pair: epsilon must be positive");
  const auto n = static_cast<Eigen::Index>(theta.theta.size());
  if (static_cast<std::size_t>(n) != field.nodes()) throw ConfigError("build_control_pair: theta and field node counts differ");

  ControlPair p;
  p.epsilon = epsilon;
  p.theta_max = theta.theta_max;
  p.sigma_set.assign(static_cast<std::size_t>(n), false);
  p.lower_offset.resize(n);
  p.upper_offset.resize(n);
  p.theta_under.resize(n);
  p.theta_over.resize(n);
  const double tm = theta.theta_max;
  for (Eigen::Index a = 0; a < n; ++a) {
    const double th = theta.theta[a];
    if (th >= tm - epsilon) {
      p.sigma_set[static_cast<std::size_t>(a)] = true;
      ++p.sigma_count;
      p.lower_offset[a] = tm - 2.0 * epsilon - th;
      p.upper_offset[a] = epsilon + tm - th;
    } else {
      p.lower_offset[a] = -epsilon;
      p.upper_offset[a] = 2.0 * epsilon;
    }
    p.theta_under[a] = th + p.lower_offset[a];
    p.theta_over[a] = th + p.upper_offset[a];
    if (std::abs(p.upper_offset[a] - p.lower_offset[a] - 3.0 * epsilon) > 1e-14 * std::max(1.0, std::abs(tm)))
      throw NumericalError("build_control_pair: upper - lower differs from 3 epsilon");
    if (p.lower_offset[a] > 0.0 || p.upper_offset[a] < 0.0)
      throw NumericalError("build_control_pair: control fields do not sandwich L");
  }
  if (p.sigma_count == static_cast<std::size_t>(n) && tm - 2.0 * epsilon < theta.theta_min - epsilon) {
    std::ostringstream os;
    os << "epsilon = " << epsilon << " covers every node and theta_M - 2 epsilon is below every theta - epsilon";
    p.warnings.push_back(os.str());
  }
  p.lower_field = field.with_diagonal_offset(p.lower_offset);
  p.upper_field = field.with_diagonal_offset(p.upper_offset);
  return p;
}

namespace {

LinearSystem control_system(const LinearSystem& base, PeriodicMatrixField coupling, std::size_t substeps) {
  StepOptions opt = base.options();
  opt.substeps_per_period = substeps;
  return LinearSystem(base.dispersal(), std::move(coupling), base.grid(), opt);
}

bool intervals_meet(double a_lo, double a_hi, double b_lo, double b_hi, double slack) {
  return a_lo <= b_hi + slack && b_lo <= a_hi + slack;
}

}  // namespace

EigenBracket solve_gpe(const LinearSystem& system, const SpatialMesh& mesh, const GpeOptions& options) {
  if (!(options.tol_lambda > 0.0)) throw ConfigError("solve_gpe: tol_lambda must be positive");
  EigenBracket out;
  out.power_tol = options.power_tol;
  out.tol_lambda = options.tol_lambda;
  out.theta = theta_field(system.coupling(), mesh, system.grid(), options.floquet);
  out.diagnostics = out.theta.diagnostics;
  out.theta_max = out.theta.theta_max;
  out.theta_min = out.theta.theta_min;
  out.epsilon0 = options.epsilon0 > 0.0 ? options.epsilon0 : std::max(0.1, 0.05 * (out.theta_max - out.theta_min));

  // one substep count for every system of the run, sized for the widest controls
  const ControlPair widest = build_control_pair(system.coupling(), out.theta, out.epsilon0);
  std::size_t substeps = system.substeps_per_period();
  for (const auto* f : {&widest.lower_field, &widest.upper_field})
    substeps = std::max(substeps, LinearSystem(system.dispersal(), *f, system.grid(), system.options()).substeps_per_period());
  if (system.options().substeps_per_period > 0) substeps = system.substeps_per_period();
  out.substeps = substeps;

  const LinearSystem base = control_system(system, system.coupling(), substeps);
  out.unperturbed = power_bracket(base, options.power_tol, options.unperturbed_max_iter);

  StateField warm_lo = out.unperturbed.iterate, warm_hi = out.unperturbed.iterate;
  const double slack = 2.0 * options.power_tol;
  const bool concurrent = thread_count() > 1;
  for (std::size_t h = 0; h <= options.max_halvings; ++h) {
    const double eps = out.epsilon0 / std::pow(2.0, static_cast<double>(h));
    ControlPair pair = build_control_pair(system.coupling(), out.theta, eps);
    for (auto& w : pair.warnings) out.diagnostics.push_back(w);
    LinearSystem lower = control_system(system, pair.lower_field, substeps);
    LinearSystem upper = control_system(system, pair.upper_field, substeps);

    auto run = [&](const LinearSystem& s, const StateField& warm) {
      return power_bracket(s, options.power_tol, options.max_iter, &warm);
    };
    SpectralEstimate lo_est, hi_est;
    if (concurrent) {
      auto fut = std::async(std::launch::async, run, std::cref(upper), std::cref(warm_hi));
      lo_est = run(lower, warm_lo);
      hi_est = fut.get();
    } else {
      lo_est = run(lower, warm_lo);
      hi_est = run(upper, warm_hi);
    }
    for (const auto* e : {&lo_est, &hi_est}) {
      if (!e->gap_flag) {
        std::ostringstream os;
        os << "solve_gpe: power iteration on the " << (e == &lo_est ? "lower" : "upper")
           << " control system did not reach tol " << options.power_tol << " in " << e->iterations
           << " iterations at epsilon = " << eps << " (width " << e->width()
           << "); refine the mesh or time grid";
        throw NumericalError(os.str());
      }
    }

    EpsilonStage st;
    st.epsilon = eps;
    st.lambda_lo = lo_est.s_estimate();
    st.lambda_hi = hi_est.s_estimate();
    st.certified_lo = lo_est.s_lo;
    st.certified_hi = hi_est.s_hi;
    st.sigma_count = pair.sigma_count;
    st.iterations_lo = lo_est.iterations;
    st.iterations_hi = hi_est.iterations;
    st.width_lo = lo_est.width();
    st.width_hi = hi_est.width();
    st.sandwich = intervals_meet(st.lambda_lo, st.lambda_hi, out.unperturbed.s_lo, out.unperturbed.s_hi, slack);
    out.trace.push_back(st);

    warm_lo = lo_est.iterate;
    warm_hi = hi_est.iterate;
    const bool done = st.lambda_hi - st.lambda_lo <= options.tol_lambda;
    if (done || h == options.max_halvings) {
      out.lambda_lo = st.lambda_lo;
      out.lambda_hi = st.lambda_hi;
      out.certified_lo = st.certified_lo;
      out.certified_hi = st.certified_hi;
      out.converged = done;
      out.lower_eigen = eigen_trajectory(lower, lo_est.iterate, BoundDirection::lower);
      out.upper_eigen = eigen_trajectory(upper, hi_est.iterate, BoundDirection::upper);
      out.controls = {std::move(lower), std::move(upper)};
      break;
    }
  }

  const double lo = std::max(out.lambda_lo, out.unperturbed.s_lo);
  const double hi = std::min(out.lambda_hi, out.unperturbed.s_hi);
  if (lo <= hi) {
    out.lambda_estimate = 0.5 * (lo + hi);
  } else {
    out.lambda_estimate = 0.5 * (out.lambda_lo + out.lambda_hi);
    if (!intervals_meet(out.lambda_lo, out.lambda_hi, out.unperturbed.s_lo, out.unperturbed.s_hi, slack))
      out.diagnostics.push_back("solve_gpe: unperturbed bracket does not meet [lambda_lo, lambda_hi]");
  }
  return out;
}

CwReport characterize_cw(const LinearSystem& system, const EigenBracket& bracket, double tol) {
  if (bracket.lower_eigen.phi.size() == 0 || bracket.upper_eigen.phi.size() == 0)
    throw ConfigError("characterize_cw: bracket carries no eigen-trajectories");
  CwReport r;
  r.lower = certify_bound(system, bracket.lower_eigen.phi, BoundDirection::lower);
  r.upper = certify_bound(system, bracket.upper_eigen.phi, BoundDirection::upper);
  r.window_lo = r.lower.beta;
  r.window_hi = r.upper.beta;
  r.slack = 10.0 * tol;
  r.consistent = r.window_lo >= bracket.lambda_lo - r.slack && r.window_hi <= bracket.lambda_hi + r.slack &&
                 r.window_lo <= r.window_hi + r.slack;
  return r;
}

}  // namespace nlgpe
