#include "nlgpe/periodic.hpp"

#include "nlgpe/error.hpp"
#include "nlgpe/parallel.hpp"

#include <cmath>
#include <future>
#include <sstream>

namespace nlgpe {

namespace {

double sup_over(const Trajectory& tr) {
  double s = 0.0;
  for (const auto& snap : tr.snapshots) s = std::max(s, snap.sup_norm());
  return s;
}

Eigen::MatrixXd grid_derivative(const Trajectory& tr, std::size_t k, double dt) {
  const auto& s = tr.snapshots;
  const std::size_t last = s.size() - 1;
  if (k == 0) return (-3.0 * s[0].values + 4.0 * s[1].values - s[2].values) / (2.0 * dt);
  if (k == last) return (3.0 * s[k].values - 4.0 * s[k - 1].values + s[k - 2].values) / (2.0 * dt);
  return (s[k + 1].values - s[k - 1].values) / (2.0 * dt);
}

void require_one_period(const NonlinearSystem& system, const Trajectory& tr, const char* what) {
  if (tr.size() != system.grid().steps() + 1)
    throw ConfigError(std::string(what) + ": trajectory must hold one period of grid samples");
  for (const auto& s : tr.snapshots)
    if (s.nodes() != system.nodes() || s.components() != system.components())
      throw ConfigError(std::string(what) + ": trajectory shape does not match the system");
}

Trajectory sweep(const NonlinearSystem& system, const StateField& terminal) {
  StateField start = terminal;
  start.time = 0.0;
  return trajectory_nonlinear(system, start, 1);
}

double sup_diff(const StateField& a, const StateField& b) { return (a.values - b.values).cwiseAbs().maxCoeff(); }

}  // namespace

ResidualRange residual_range(const NonlinearSystem& system, const Trajectory& candidate,
                             const std::vector<Eigen::MatrixXd>* derivative) {
  require_one_period(system, candidate, "residual_range");
  const TimeGrid& grid = system.grid();
  ResidualRange r;
  Eigen::MatrixXd rhs;
  for (std::size_t k = 0; k < candidate.size(); ++k) {
    system.rhs(grid.time(k), candidate.snapshots[k].values, rhs);
    const Eigen::MatrixXd res = rhs - (derivative ? (*derivative)[k] : grid_derivative(candidate, k, grid.dt()));
    r.min = std::min(r.min, res.minCoeff());
    r.max = std::max(r.max, res.maxCoeff());
    r.samples += static_cast<std::size_t>(res.size());
  }
  return r;
}

Trajectory constant_trajectory(const StateField& state, const TimeGrid& grid) {
  Trajectory tr;
  for (std::size_t k = 0; k <= grid.steps(); ++k) tr.snapshots.push_back(StateField{state.values, grid.time(k)});
  return tr;
}

std::string PairCheck::describe() const {
  std::ostringstream os;
  os << "ordered=" << ordered << " lower(T)>=lower(0)=" << lower_periodic << " upper(T)<=upper(0)=" << upper_periodic
     << " lower residual min=" << lower_residual.min << " upper residual max=" << upper_residual.max
     << " slack=" << slack;
  return os.str();
}

PairCheck check_pair(const NonlinearSystem& system, const Trajectory& lower, const Trajectory& upper,
                     double residual_slack, const std::vector<Eigen::MatrixXd>* lower_derivative) {
  require_one_period(system, lower, "check_pair");
  require_one_period(system, upper, "check_pair");
  PairCheck c;
  c.slack = residual_slack >= 0.0 ? residual_slack : 1e-8 * std::max(1.0, sup_over(upper));
  c.ordered = true;
  for (std::size_t k = 0; k < lower.size(); ++k) {
    if (lower.snapshots[k].values.minCoeff() < -c.slack) c.ordered = false;
    if ((lower.snapshots[k].values - upper.snapshots[k].values).maxCoeff() > c.slack) c.ordered = false;
  }
  c.lower_periodic = (lower.front().values - lower.back().values).maxCoeff() <= c.slack;
  c.upper_periodic = (upper.back().values - upper.front().values).maxCoeff() <= c.slack;
  c.lower_residual = residual_range(system, lower, lower_derivative);
  c.upper_residual = residual_range(system, upper);
  c.lower_residual_ok = c.lower_residual.min >= -c.slack;
  c.upper_residual_ok = c.upper_residual.max <= c.slack;
  return c;
}

OrderedPair make_pair(const NonlinearSystem& system, Trajectory lower, Trajectory upper, double residual_slack) {
  OrderedPair p;
  p.check = check_pair(system, lower, upper, residual_slack);
  p.lower = std::move(lower);
  p.upper = std::move(upper);
  return p;
}

PeriodicSolution monotone_iterate(const NonlinearSystem& system, const OrderedPair& pair, double tol,
                                  std::size_t max_sweeps) {
  if (!(tol > 0.0)) throw ConfigError("monotone_iterate: tol must be positive");
  if (!pair.check.ok()) throw ConfigError("monotone_iterate: invalid ordered pair: " + pair.check.describe());
  const double scale = std::max(1.0, sup_over(pair.upper));
  const double slack = 1e-8 * scale;
  const bool concurrent = thread_count() > 1;

  PeriodicSolution sol;
  Trajectory lo = pair.lower, hi = pair.upper;
  bool done = false;
  for (std::size_t n = 1; n <= max_sweeps && !done; ++n) {
    Trajectory lo_next, hi_next;
    if (concurrent) {
      auto fut = std::async(std::launch::async, [&] { return sweep(system, hi.back()); });
      lo_next = sweep(system, lo.back());
      hi_next = fut.get();
    } else {
      lo_next = sweep(system, lo.back());
      hi_next = sweep(system, hi.back());
    }
    for (std::size_t k = 0; k < lo_next.size(); ++k) {
      const auto& a = lo_next.snapshots[k].values;
      const auto& b = hi_next.snapshots[k].values;
      std::ostringstream os;
      if ((lo.snapshots[k].values - a).maxCoeff() > slack)
        os << "lower sweep " << n << " decreased by " << (lo.snapshots[k].values - a).maxCoeff();
      else if ((b - hi.snapshots[k].values).maxCoeff() > slack)
        os << "upper sweep " << n << " increased by " << (b - hi.snapshots[k].values).maxCoeff();
      else if ((a - b).maxCoeff() > slack)
        os << "envelopes crossed at sweep " << n << " by " << (a - b).maxCoeff();
      if (!os.str().empty()) {
        os << " at t = " << lo_next.snapshots[k].time << " (slack " << slack << ")";
        throw NumericalError("monotone_iterate: " + os.str());
      }
    }
    SweepRecord rec;
    rec.sweep = n;
    rec.gap = sup_diff(hi_next.back(), lo_next.back());
    rec.lower_defect = sup_diff(lo_next.back(), lo_next.front());
    rec.upper_defect = sup_diff(hi_next.back(), hi_next.front());
    sol.history.push_back(rec);
    lo = std::move(lo_next);
    hi = std::move(hi_next);
    sol.iterations = n;
    done = rec.gap <= tol && rec.lower_defect <= tol && rec.upper_defect <= tol;
  }
  sol.gap = sol.history.empty() ? 0.0 : sol.history.back().gap;
  if (!done) {
    std::ostringstream os;
    os << "monotone_iterate: " << max_sweeps << " sweeps exceeded; envelope gap " << sol.gap << " (tol " << tol << ")";
    throw NumericalError(os.str());
  }
  StateField mid{0.5 * (lo.back().values + hi.back().values), 0.0};
  sol.trajectory = trajectory_nonlinear(system, mid, 1);
  sol.defect = sup_diff(sol.trajectory.back(), sol.trajectory.front());
  sol.lower_envelope = std::move(lo);
  sol.upper_envelope = std::move(hi);
  return sol;
}

OrderedPair auto_pair(const NonlinearSystem& system, const EigenBracket& linearization, Trajectory upper, double rho0,
                      double residual_slack) {
  if (!(linearization.lambda_lo > 0.0))
    throw ConfigError("auto_pair: needs lambda_lo > 0, got " + std::to_string(linearization.lambda_lo));
  if (linearization.controls.empty()) throw ConfigError("auto_pair: bracket carries no control systems");
  if (!(rho0 > 0.0)) throw ConfigError("auto_pair: rho0 must be positive");
  require_one_period(system, upper, "auto_pair");

  const double slack = residual_slack >= 0.0 ? residual_slack : 1e-8 * std::max(1.0, sup_over(upper));
  const ResidualRange ur = residual_range(system, upper);
  if (ur.max > slack)
    throw NumericalError("auto_pair: upper candidate residual " + std::to_string(ur.max) + " exceeds slack");

  const LinearSystem& ctrl = linearization.controls.front();
  const EigenTrajectory& et = linearization.lower_eigen;
  const TimeGrid& grid = system.grid();
  // phi = e^{-s t} Psi(t) v solves phi_t = (K + L_lower(t) - s) phi
  std::vector<Eigen::MatrixXd> dphi(et.phi.size());
  for (std::size_t k = 0; k < et.phi.size(); ++k) {
    ctrl.apply(grid.time(k), et.phi.snapshots[k].values, dphi[k]);
    dphi[k] -= et.s * et.phi.snapshots[k].values;
  }

  auto scaled = [&](double rho, Trajectory& tr, std::vector<Eigen::MatrixXd>& d) {
    tr = et.phi;
    for (auto& s : tr.snapshots) s.values *= rho;
    d = dphi;
    for (auto& m : d) m *= rho;
  };
  auto admissible = [&](double rho) {
    Trajectory tr;
    std::vector<Eigen::MatrixXd> d;
    scaled(rho, tr, d);
    for (std::size_t k = 0; k < tr.size(); ++k)
      if ((tr.snapshots[k].values - upper.snapshots[k].values).maxCoeff() >= 0.0) return false;
    return residual_range(system, tr, &d).min > 0.0;
  };

  double pass = 0.0, fail = rho0;
  if (admissible(rho0)) {
    pass = rho0;
  } else {
    double rho = rho0;
    for (int i = 0; i < 80 && pass == 0.0; ++i) {
      rho *= 0.5;
      if (admissible(rho))
        pass = rho;
      else
        fail = rho;
    }
    if (pass == 0.0)
      throw NumericalError("auto_pair: no rho in (0, rho0] gives a strict lower solution at this resolution");
    for (int i = 0; i < 30; ++i) {
      const double mid = 0.5 * (pass + fail);
      if (admissible(mid))
        pass = mid;
      else
        fail = mid;
    }
  }

  OrderedPair p;
  p.rho = pass;
  std::vector<Eigen::MatrixXd> d;
  scaled(pass, p.lower, d);
  p.check = check_pair(system, p.lower, upper, slack, &d);
  p.upper = std::move(upper);
  return p;
}

std::string to_string(ThresholdCase c) {
  switch (c) {
    case ThresholdCase::positive: return "positive";
    case ThresholdCase::negative: return "negative";
    case ThresholdCase::critical: return "indeterminate-critical";
  }
  return "?";
}

ThresholdVerdict classify_threshold(const NonlinearSystem& system, const SpatialMesh& mesh, const GpeOptions& options,
                                    const StateBox* box) {
  ThresholdVerdict v;
  if (box) {
    v.reaction = validate_reaction(system.reaction(), system.nodes(), system.grid(), *box);
    if (!v.reaction->vanishes_at_zero) throw ConfigError("classify_threshold: f(x,t,0) != 0");
    if (!v.reaction->cooperative) throw ConfigError("classify_threshold: reaction is not cooperative on the box");
    if (!v.reaction->irreducible_somewhere) v.evidence.push_back("reaction Jacobian reducible at every sample of some state");
    StateBox inner = *box;
    inner.lo = inner.lo.cwiseMax(1e-3 * inner.hi);
    v.subhomogeneity =
        validate_subhomogeneity(system.reaction(), system.nodes(), system.grid(), inner, {0.25, 0.5, 0.75});
    v.evidence.push_back("subhomogeneity: " + to_string(v.subhomogeneity->classification));
  }
  v.tol_lambda = options.tol_lambda;
  v.bracket = solve_gpe(system.linearization_at_zero(), mesh, options);
  v.lambda = v.bracket.lambda_estimate;
  if (std::abs(v.lambda) <= options.tol_lambda) {
    v.threshold_case = ThresholdCase::critical;
    v.predicted = "indeterminate";
  } else if (v.lambda > 0.0) {
    v.threshold_case = ThresholdCase::positive;
    v.predicted = "converge-to-U";
  } else {
    v.threshold_case = ThresholdCase::negative;
    v.sigma = -0.25 * v.bracket.lambda_hi;
    v.predicted = "exponential-decay";
  }
  return v;
}

ConvergenceEvidence verify_convergence(const NonlinearSystem& system, const ThresholdVerdict& verdict,
                                       const PeriodicSolution* solution, const std::vector<StateField>& initial,
                                       std::size_t periods, double pass_tol) {
  if (verdict.threshold_case == ThresholdCase::positive && !solution)
    throw ConfigError("verify_convergence: the positive case needs a periodic solution");
  if (periods < 2) throw ConfigError("verify_convergence: need at least two periods");
  const Eigen::MatrixXd target = verdict.threshold_case == ThresholdCase::positive
                                     ? solution->trajectory.front().values
                                     : Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(system.nodes()),
                                                             static_cast<Eigen::Index>(system.components()));
  const double period = system.grid().period();
  const double floor =
      std::max(1e-12 * std::max(1.0, target.cwiseAbs().maxCoeff()), solution ? 10.0 * (solution->gap + solution->defect) : 0.0);

  ConvergenceEvidence ev;
  ev.runs.resize(initial.size());
  parallel_for(initial.size(), [&](std::size_t r) {
    EvidenceRun run;
    StateField u = initial[r];
    u.time = 0.0;
    run.distances.push_back((u.values - target).cwiseAbs().maxCoeff());
    for (std::size_t n = 1; n <= periods; ++n) {
      u = sweep(system, u).back();
      run.distances.push_back((u.values - target).cwiseAbs().maxCoeff());
    }
    run.final_distance = run.distances.back();

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t cnt = 0;
    for (std::size_t n = periods / 2; n <= periods; ++n) {
      const double d = run.distances[n];
      if (!(d > 1e-290)) continue;
      const double x = static_cast<double>(n) * period, y = std::log(d);
      sx += x, sy += y, sxx += x * x, sxy += x * y;
      ++cnt;
    }
    if (cnt >= 2) {
      const double den = static_cast<double>(cnt) * sxx - sx * sx;
      run.fitted_slope = den != 0.0 ? (static_cast<double>(cnt) * sxy - sx * sy) / den : 0.0;
    }

    run.monotone_tail = true;
    for (std::size_t n = system.components(); n < periods; ++n) {
      if (run.distances[n] <= floor) break;
      if (run.distances[n + 1] > run.distances[n] * (1.0 + 1e-9) + 1e-300) run.monotone_tail = false;
    }

    bool pass = false;
    switch (verdict.threshold_case) {
      case ThresholdCase::positive: pass = run.final_distance <= pass_tol; break;
      case ThresholdCase::negative:
        pass = cnt >= 2 && run.fitted_slope <= -verdict.sigma + 0.05 * std::abs(verdict.sigma);
        break;
      case ThresholdCase::critical: pass = false; break;
    }
    run.verdict = pass ? "pass" : "inconclusive";
    ev.runs[r] = std::move(run);
  });
  ev.all_pass = !ev.runs.empty();
  for (const auto& r : ev.runs) ev.all_pass = ev.all_pass && r.verdict == "pass";
  return ev;
}

NonlinearSystem logistic_system(const LogisticProblem& problem) {
  const auto& d = problem.dispersal;
  std::vector<DispersalOperator> ops{
      assemble_dispersal(normalize_kernel(d.profile, problem.mesh, d.policy), problem.mesh, d.rate, d.mode)};
  auto f = std::make_shared<LogisticReaction>(problem.growth, problem.crowding, problem.mesh.size());
  return NonlinearSystem(std::move(ops), std::move(f), problem.grid, problem.options);
}

bool logistic_condition_b(const LogisticProblem& problem, double level) {
  const auto& d = problem.dispersal;
  const DispersalOperator op =
      assemble_dispersal(normalize_kernel(d.profile, problem.mesh, d.policy), problem.mesh, d.rate, d.mode);
  const Eigen::VectorXd row = op.scatter.rowwise().sum() - op.removal;
  const std::size_t n = problem.mesh.size();
  const Eigen::MatrixXd r = problem.growth.sample(n, problem.grid);
  const Eigen::MatrixXd c = problem.crowding.sample(n, problem.grid);
  for (Eigen::Index k = 0; k < r.cols(); ++k)
    for (Eigen::Index a = 0; a < r.rows(); ++a)
      if (row[a] + r(a, k) - c(a, k) * level > 0.0) return false;
  return true;
}

LogisticResult logistic_solve(const LogisticProblem& problem, const LogisticOptions& options) {
  LogisticResult res;
  const std::size_t n = problem.mesh.size();
  const NonlinearSystem system = logistic_system(problem);
  const KernelSpec spec = normalize_kernel(problem.dispersal.profile, problem.mesh, problem.dispersal.policy);

  const Eigen::MatrixXd r = problem.growth.sample(n, problem.grid);
  const Eigen::MatrixXd c = problem.crowding.sample(n, problem.grid);
  if (c.minCoeff() <= 0.0) throw ConfigError("logistic_solve: crowding c must be positive");
  const double ratio = (r.array() / c.array()).maxCoeff();
  const double level_a = ratio > 0.0 ? ratio * (1.0 + options.upper_margin) : 1.0;

  res.condition_a = problem.dispersal.mode == BoundaryMode::dirichlet_type || spec.symmetric(1e-12);
  double level_b = options.upper_b;
  if (level_b <= 0.0) {
    level_b = level_a;
    for (int j = 0; j < 60 && !logistic_condition_b(problem, level_b); ++j) level_b *= 2.0;
  }
  res.condition_b = logistic_condition_b(problem, level_b);

  switch (options.path) {
    case LogisticPath::automatic:
      if (res.condition_a) {
        res.condition = "A", res.upper_level = level_a;
      } else if (res.condition_b) {
        res.condition = "B", res.upper_level = level_b;
      } else {
        throw ConfigError("logistic_solve: neither condition (A) nor condition (B) holds at the samples");
      }
      break;
    case LogisticPath::condition_a:
      if (!res.condition_a) throw ConfigError("logistic_solve: condition (A) does not hold (asymmetric Neumann kernel)");
      res.condition = "A", res.upper_level = level_a;
      break;
    case LogisticPath::condition_b:
      if (!res.condition_b)
        throw ConfigError("logistic_solve: condition (B) fails at M = " + std::to_string(level_b));
      res.condition = "B", res.upper_level = level_b;
      break;
  }

  StateBox box{Eigen::VectorXd::Constant(1, 1e-3 * res.upper_level), Eigen::VectorXd::Constant(1, res.upper_level)};
  res.verdict = classify_threshold(system, problem.mesh, options.gpe, &box);
  if (res.verdict.threshold_case == ThresholdCase::positive) {
    Trajectory upper = constant_trajectory(StateField::constant(n, 1, res.upper_level), problem.grid);
    res.pair = auto_pair(system, res.verdict.bracket, std::move(upper), res.upper_level);
    res.solution = monotone_iterate(system, *res.pair, options.tol, options.max_sweeps);
  }
  return res;
}

}  // namespace nlgpe
