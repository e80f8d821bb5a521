#include "nlgpe/cli.hpp"

#include "nlgpe/config.hpp"
#include "nlgpe/error.hpp"
#include "nlgpe/floquet.hpp"
#include "nlgpe/gpe.hpp"
#include "nlgpe/parallel.hpp"
#include "nlgpe/periodic.hpp"
#include "nlgpe/spectral.hpp"
#include "nlgpe/wnv.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>

namespace nlgpe {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "nlgpe 1.0.0";

struct Run {
  const CliOptions& opt;
  RunConfig cfg;
  json summary;
  std::vector<std::string> outputs;

  fs::path path(const std::string& name) {
    outputs.push_back(name);
    return opt.out / name;
  }
  void csv(const std::string& name, const Eigen::MatrixXd& data, const std::vector<std::string>& header) {
    write_csv(path(name), data, header);
  }
};

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot write " + p.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + p.string());
}

json tolerances(const RunConfig& c) {
  const auto& s = c.solver;
  return json{{"tol_lambda", s.gpe.tol_lambda},   {"power_tol", s.gpe.power_tol},
              {"epsilon0", s.gpe.epsilon0},       {"max_halvings", s.gpe.max_halvings},
              {"max_iter", s.gpe.max_iter},       {"substep_rule", s.step.substep_rule},
              {"substeps", s.step.substeps_per_period}, {"periodic_tol", s.periodic_tol},
              {"max_sweeps", s.max_sweeps}};
}

/// Node coordinates followed by the given columns.
Eigen::MatrixXd with_coords(const SpatialMesh& mesh, const Eigen::MatrixXd& cols) {
  Eigen::MatrixXd out(cols.rows(), cols.cols() + 2);
  for (Eigen::Index a = 0; a < cols.rows(); ++a) {
    out(a, 0) = mesh.node(static_cast<std::size_t>(a)).x;
    out(a, 1) = mesh.node(static_cast<std::size_t>(a)).y;
  }
  out.rightCols(cols.cols()) = cols;
  return out;
}

std::vector<std::string> coord_header(std::size_t m, const std::string& prefix = "u") {
  std::vector<std::string> h{"x", "y"};
  for (std::size_t i = 0; i < m; ++i) h.push_back(prefix + std::to_string(i));
  return h;
}

/// Long format: t, x, y, components.
Eigen::MatrixXd trajectory_table(const SpatialMesh& mesh, const Trajectory& tr) {
  const auto n = static_cast<Eigen::Index>(mesh.size());
  const Eigen::Index m = tr.front().values.cols();
  Eigen::MatrixXd out(n * static_cast<Eigen::Index>(tr.size()), m + 3);
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const auto r0 = static_cast<Eigen::Index>(k) * n;
    out.block(r0, 0, n, 1).setConstant(tr.snapshots[k].time);
    out.block(r0, 1, n, m + 2) = with_coords(mesh, tr.snapshots[k].values);
  }
  return out;
}

std::vector<std::string> traj_header(std::size_t m) {
  std::vector<std::string> h{"t"};
  for (auto& s : coord_header(m)) h.push_back(s);
  return h;
}

json bracket_json(const EigenBracket& b) {
  json trace = json::array();
  for (const auto& s : b.trace)
    trace.push_back({{"epsilon", s.epsilon},
                     {"lambda_lo", s.lambda_lo},
                     {"lambda_hi", s.lambda_hi},
                     {"gap", s.lambda_hi - s.lambda_lo},
                     {"certified_lo", s.certified_lo},
                     {"certified_hi", s.certified_hi},
                     {"sigma_count", s.sigma_count},
                     {"iterations_lo", s.iterations_lo},
                     {"iterations_hi", s.iterations_hi},
                     {"sandwich", s.sandwich}});
  return json{{"lambda_lo", b.lambda_lo},
              {"lambda_hi", b.lambda_hi},
              {"lambda_estimate", b.lambda_estimate},
              {"certified_lo", b.certified_lo},
              {"certified_hi", b.certified_hi},
              {"width", b.width()},
              {"theta_max", b.theta_max},
              {"theta_min", b.theta_min},
              {"epsilon0", b.epsilon0},
              {"final_epsilon", b.final_epsilon()},
              {"substeps", b.substeps},
              {"converged", b.converged},
              {"unperturbed", {{"s_lo", b.unperturbed.s_lo}, {"s_hi", b.unperturbed.s_hi}, {"gap_flag", b.unperturbed.gap_flag}}},
              {"epsilon_trace", trace},
              {"diagnostics", b.diagnostics}};
}

json verdict_json(const ThresholdVerdict& v) {
  json j{{"case", to_string(v.threshold_case)},
         {"lambda", v.lambda},
         {"tol_lambda", v.tol_lambda},
         {"sigma", v.sigma},
         {"predicted", v.predicted},
         {"evidence", v.evidence},
         {"bracket", bracket_json(v.bracket)}};
  if (v.reaction)
    j["reaction"] = {{"vanishes_at_zero", v.reaction->vanishes_at_zero},
                     {"cooperative", v.reaction->cooperative},
                     {"irreducible_somewhere", v.reaction->irreducible_somewhere}};
  return j;
}

json solution_json(const PeriodicSolution& s) {
  return json{{"iterations", s.iterations}, {"gap", s.gap}, {"defect", s.defect}};
}

Eigen::MatrixXd sweep_table(const PeriodicSolution& s) {
  Eigen::MatrixXd h(static_cast<Eigen::Index>(s.history.size()), 4);
  for (std::size_t i = 0; i < s.history.size(); ++i) {
    const auto& r = s.history[i];
    h.row(static_cast<Eigen::Index>(i)) << static_cast<double>(r.sweep), r.gap, r.lower_defect, r.upper_defect;
  }
  return h;
}

const std::vector<std::string> kSweepHeader{"sweep", "gap", "lower_defect", "upper_defect"};

json evidence_json(const ConvergenceEvidence& e) {
  json runs = json::array();
  for (const auto& r : e.runs)
    runs.push_back({{"final_distance", r.final_distance},
                    {"fitted_slope", r.fitted_slope},
                    {"monotone_tail", r.monotone_tail},
                    {"verdict", r.verdict}});
  return json{{"runs", runs}, {"all_pass", e.all_pass}};
}

Eigen::MatrixXd distance_table(const ConvergenceEvidence& e) {
  std::size_t len = 0;
  for (const auto& r : e.runs) len = std::max(len, r.distances.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(e.runs.size()) + 1,
                                                std::nan(""));
  for (std::size_t p = 0; p < len; ++p) d(static_cast<Eigen::Index>(p), 0) = static_cast<double>(p);
  for (std::size_t r = 0; r < e.runs.size(); ++r)
    for (std::size_t p = 0; p < e.runs[r].distances.size(); ++p)
      d(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(r) + 1) = e.runs[r].distances[p];
  return d;
}

std::vector<std::string> distance_header(std::size_t runs) {
  std::vector<std::string> h{"period"};
  for (std::size_t r = 0; r < runs; ++r) h.push_back("run" + std::to_string(r));
  return h;
}

std::vector<StateField> initial_states(const RunConfig& c) {
  std::vector<StateField> out;
  for (const auto& m : c.simulate.initial) out.push_back(StateField{m, 0.0});
  if (out.empty()) out.push_back(StateField::constant(c.need_mesh().size(), c.components, 1.0));
  return out;
}

// ---------------------------------------------------------------------------

void cmd_theta(Run& r) {
  const RunConfig& c = r.cfg;
  const LinearSystem sys = c.linear_system();
  const MonodromyResult th = theta_field(sys.coupling(), c.need_mesh(), c.need_grid(), c.solver.gpe.floquet);
  r.csv("theta.csv", with_coords(c.need_mesh(), th.theta), {"x", "y", "theta"});
  const Point& p = c.need_mesh().node(th.argmax);
  std::size_t floored = 0, warned = 0;
  for (bool b : th.floored) floored += b;
  for (bool b : th.perron_warning) warned += b;
  r.summary["result"] = {{"theta_max", th.theta_max}, {"theta_min", th.theta_min}, {"argmax", {p.x, p.y}},
                         {"essential_radius", essential_radius(th)}, {"floored_nodes", floored},
                         {"perron_warnings", warned}};
}

void cmd_spectral(Run& r) {
  const RunConfig& c = r.cfg;
  const LinearSystem sys = c.linear_system();
  const SpectralEstimate e = power_bracket(sys, c.solver.gpe.power_tol, c.solver.gpe.max_iter);
  r.csv("iterate.csv", with_coords(c.need_mesh(), e.iterate.values), coord_header(sys.components()));
  r.summary["result"] = {{"s_lo", e.s_lo}, {"s_hi", e.s_hi}, {"iterations", e.iterations}, {"gap_flag", e.gap_flag},
                         {"r_estimate", e.r_estimate}};
}

void cmd_gpe(Run& r) {
  const RunConfig& c = r.cfg;
  const LinearSystem sys = c.linear_system();
  const EigenBracket b = solve_gpe(sys, c.need_mesh(), c.solver.gpe);
  const CwReport cw = characterize_cw(sys, b, c.solver.gpe.tol_lambda);
  json res = bracket_json(b);
  res["cw"] = {{"window_lo", cw.window_lo}, {"window_hi", cw.window_hi}, {"consistent", cw.consistent}};
  r.summary["result"] = res;
  Eigen::MatrixXd tr(static_cast<Eigen::Index>(b.trace.size()), 5);
  for (std::size_t i = 0; i < b.trace.size(); ++i) {
    const auto& s = b.trace[i];
    tr.row(static_cast<Eigen::Index>(i)) << s.epsilon, s.lambda_lo, s.lambda_hi, s.certified_lo, s.certified_hi;
  }
  r.csv("epsilon_trace.csv", tr, {"epsilon", "lambda_lo", "lambda_hi", "certified_lo", "certified_hi"});
  r.csv("eigenfunction.csv", trajectory_table(c.need_mesh(), b.lower_eigen.phi), traj_header(sys.components()));
}

void cmd_logistic(Run& r, bool with_evidence) {
  const RunConfig& c = r.cfg;
  const LogisticProblem p = c.logistic_problem();
  const LogisticResult res = logistic_solve(p, c.logistic_options());
  json out{{"verdict", verdict_json(res.verdict)},
           {"condition", res.condition},
           {"condition_a", res.condition_a},
           {"condition_b", res.condition_b},
           {"upper_level", res.upper_level}};
  if (res.solution) {
    out["solution"] = solution_json(*res.solution);
    out["solution"]["rho"] = res.pair->rho;
    r.csv("solution.csv", trajectory_table(c.need_mesh(), res.solution->trajectory), traj_header(1));
    r.csv("gap_history.csv", sweep_table(*res.solution), kSweepHeader);
  }
  if (with_evidence) {
    const ConvergenceEvidence ev = verify_convergence(logistic_system(p), res.verdict, res.solution ? &*res.solution : nullptr,
                                                      initial_states(c), c.simulate.periods, c.simulate.pass_tol);
    out["convergence"] = evidence_json(ev);
    r.csv("distances.csv", distance_table(ev), distance_header(ev.runs.size()));
  }
  r.summary["result"] = out;
}

/// Positive case of a non-logistic reaction: constant upper level from the solver section.
std::optional<PeriodicSolution> generic_periodic(Run& r, const NonlinearSystem& sys, const ThresholdVerdict& v, json& out) {
  const RunConfig& c = r.cfg;
  if (v.threshold_case != ThresholdCase::positive) return std::nullopt;
  if (!(c.solver.upper_level > 0.0)) throw ConfigError("solver.upper_level must be positive for this reaction");
  const Trajectory upper =
      constant_trajectory(StateField::constant(sys.nodes(), sys.components(), c.solver.upper_level), c.need_grid());
  const OrderedPair pair = auto_pair(sys, v.bracket, upper, c.solver.upper_level);
  const PeriodicSolution s = monotone_iterate(sys, pair, c.solver.periodic_tol, c.solver.max_sweeps);
  out["solution"] = solution_json(s);
  out["solution"]["rho"] = pair.rho;
  r.csv("solution.csv", trajectory_table(c.need_mesh(), s.trajectory), traj_header(sys.components()));
  r.csv("gap_history.csv", sweep_table(s), kSweepHeader);
  return s;
}

void cmd_periodic(Run& r, bool classify) {
  const RunConfig& c = r.cfg;
  if (c.reaction_type == "logistic") return cmd_logistic(r, classify);
  const NonlinearSystem sys = c.nonlinear_system();
  const ThresholdVerdict v = classify_threshold(sys, c.need_mesh(), c.solver.gpe);
  json out{{"verdict", verdict_json(v)}};
  const std::optional<PeriodicSolution> s = generic_periodic(r, sys, v, out);
  if (classify) {
    const ConvergenceEvidence ev =
        verify_convergence(sys, v, s ? &*s : nullptr, initial_states(c), c.simulate.periods, c.simulate.pass_tol);
    out["convergence"] = evidence_json(ev);
    r.csv("distances.csv", distance_table(ev), distance_header(ev.runs.size()));
  }
  r.summary["result"] = out;
}

void cmd_simulate(Run& r) {
  const RunConfig& c = r.cfg;
  if (c.simulate.initial.empty()) throw ConfigError("simulate.initial is required");
  StateField u{c.simulate.initial.front(), 0.0};
  const std::size_t m = u.components();
  std::optional<LinearSystem> lin;
  std::optional<NonlinearSystem> nl;
  if (c.reaction) nl.emplace(c.nonlinear_system());
  else lin.emplace(c.linear_system());
  json periods = json::array();
  auto record = [&](std::size_t p) {
    json row{{"period", p}, {"sup_norm", u.sup_norm()}};
    json mn = json::array(), mx = json::array();
    for (Eigen::Index i = 0; i < u.values.cols(); ++i) {
      mn.push_back(u.values.col(i).minCoeff());
      mx.push_back(u.values.col(i).maxCoeff());
    }
    row["min"] = mn;
    row["max"] = mx;
    periods.push_back(row);
    if (p % c.simulate.stride == 0) {
      std::ostringstream name;
      name << "snapshot_" << std::setw(5) << std::setfill('0') << p << ".csv";
      r.csv(name.str(), with_coords(c.need_mesh(), u.values), coord_header(m));
    }
  };
  record(0);
  for (std::size_t p = 1; p <= c.simulate.periods; ++p) {
    u = nl ? trajectory_nonlinear(*nl, u, 1).back() : trajectory_linear(*lin, u, 1).back();
    u.time = 0.0;
    record(p);
  }
  r.summary["result"] = {{"periods", c.simulate.periods}, {"stride", c.simulate.stride}, {"trajectory", periods}};
}

void cmd_wnv(Run& r) {
  const RunConfig& c = r.cfg;
  if (!c.wnv) throw ConfigError("config: missing wnv section");
  const WnvConfig& w = *c.wnv;
  const WnvSettings& ws = c.wnv_settings;
  const WnvLogistic lg = wnv_logistic_pair(w, ws.options);
  json out{{"lambda_g1", {{"value", lg.lambda_g1}, {"bracket", bracket_json(lg.host.verdict.bracket)}}},
           {"lambda_g2", {{"value", lg.lambda_g2}, {"bracket", bracket_json(lg.vector.verdict.bracket)}}},
           {"host_persists", lg.host_positive},
           {"vector_persists", lg.vector_positive}};
  std::optional<WnvReduction> red;
  std::optional<WnvReducedResult> rr;
  if (lg.host_positive && lg.vector_positive) {
    red.emplace(wnv_reduce(w, lg));
    rr.emplace(wnv_reduced_solve(*red, w.mesh, ws.sigma, ws.options));
    json l{{"value", rr->bracket.lambda_estimate},
           {"sigma", rr->sigma},
           {"sigma0", red->sigma0},
           {"case", to_string(rr->threshold_case)},
           {"certificate", rr->certificate},
           {"bracket", bracket_json(rr->bracket)}};
    if (rr->solution) {
      l["solution"] = solution_json(*rr->solution);
      l["kappa1"] = rr->kappa1;
      l["kappa2"] = rr->kappa2;
      l["clamp_difference"] = rr->clamp_difference;
      l["exists"] = rr->exists;
    }
    out["lambda_L"] = l;
  }
  const WnvEvidence ev = wnv_simulate_verify(w, lg, rr ? &*rr : nullptr, ws.verify);
  out["case"] = to_string(ev.predicted);
  out["pass"] = ev.pass;
  out["flags"] = ev.flags;
  out["periods_completed"] = ev.periods_completed;
  out["host_conservation"] = ev.host_conservation;
  out["vector_conservation"] = ev.vector_conservation;
  json comps = json::array();
  for (const auto& k : ev.components)
    comps.push_back({{"name", k.name}, {"final_distance", k.final_distance}, {"verdict", k.verdict}});
  out["components"] = comps;
  r.summary["result"] = out;

  const auto np = static_cast<Eigen::Index>(ev.components.front().distances.size());
  Eigen::MatrixXd tr(np, 5);
  for (Eigen::Index p = 0; p < np; ++p) {
    tr(p, 0) = static_cast<double>(p);
    for (std::size_t i = 0; i < 4; ++i) tr(p, static_cast<Eigen::Index>(i) + 1) = ev.components[i].distances[static_cast<std::size_t>(p)];
  }
  r.csv("traces.csv", tr, {"period", "dist_Hu", "dist_Hi", "dist_Vu", "dist_Vi"});

  // profiles over one period: totals from the logistic solutions, infected parts from the reduced solution
  const Trajectory& fin = ev.final_period;
  Trajectory prof;
  for (std::size_t k = 0; k <= w.grid.steps(); ++k) {
    StateField s{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(w.mesh.size()), 4), w.grid.time(k)};
    if (lg.host.solution) s.values.col(0) = lg.host.solution->trajectory.snapshots[k].values.col(0);
    if (lg.vector.solution) s.values.col(2) = lg.vector.solution->trajectory.snapshots[k].values.col(0);
    if (rr && rr->solution) {
      s.values.col(1) = rr->solution->trajectory.snapshots[k].values.col(0);
      s.values.col(3) = rr->solution->trajectory.snapshots[k].values.col(1);
    }
    prof.snapshots.push_back(std::move(s));
  }
  r.csv("profiles.csv", trajectory_table(w.mesh, prof), {"t", "x", "y", "H", "Hi", "V", "Vi"});
  r.csv("simulated_final_period.csv", trajectory_table(w.mesh, fin), {"t", "x", "y", "Hu", "Hi", "Vu", "Vi"});
}

// ---------------------------------------------------------------------------
// selftest: small closed-form cases

struct Check {
  std::string name;
  double value = 0.0;
  double expected = 0.0;
  double tol = 0.0;
  bool pass() const { return std::abs(value - expected) <= tol; }
};

Check check_constant_scalar() {
  const SpatialMesh mesh = build_mesh(1, Box{{{0.0, 1.0}}}, {20});
  const TimeGrid grid(1.0, 8);
  PeriodicMatrixField b(1, mesh.size());
  b(0, 0) = PeriodicScalarField::constant(0.3);
  const SystemRecipe rec{mesh, grid, {DispersalRecipe{KernelProfile::gaussian(0.2), 1.0, BoundaryMode::neumann_type}}, b, {}};
  const EigenBracket br = solve_gpe(rec.build(), mesh);
  return {"gpe constant scalar neumann", br.lambda_estimate, 0.3, 1e-8};
}

Check check_theta_average() {
  const SpatialMesh mesh = build_mesh(1, Box{{{0.0, 1.0}}}, {4});
  const TimeGrid grid(1.0, 16);
  PeriodicMatrixField b(1, mesh.size());
  b(0, 0) = PeriodicScalarField::function([](std::size_t, double t) { return 0.5 + std::sin(2.0 * M_PI * t); }, "0.5 + sin");
  const MonodromyResult th = theta_field(b, mesh, grid, FloquetOptions{0.01, 0});
  return {"theta equals time average", th.theta_max, 0.5, 1e-8};
}

Check check_theta_matrix() {
  const SpatialMesh mesh = build_mesh(1, Box{{{0.0, 1.0}}}, {2});
  const TimeGrid grid(1.0, 16);
  PeriodicMatrixField b(2, mesh.size());
  b(0, 0) = PeriodicScalarField::constant(-1.0);
  b(0, 1) = PeriodicScalarField::constant(2.0);
  b(1, 0) = PeriodicScalarField::constant(0.5);
  b(1, 1) = PeriodicScalarField::constant(-2.0);
  const MonodromyResult th = theta_field(b, mesh, grid, FloquetOptions{0.01, 0});
  const double expected = 0.5 * (-3.0 + std::sqrt(1.0 + 4.0));
  return {"theta of constant matrix", th.theta_max, expected, 1e-8};
}

Check check_logistic_constant() {
  const SpatialMesh mesh = build_mesh(1, Box{{{0.0, 1.0}}}, {10});
  const TimeGrid grid(1.0, 8);
  const LogisticProblem p{mesh, grid, DispersalRecipe{KernelProfile::gaussian(0.2), 1.0, BoundaryMode::neumann_type},
                          PeriodicScalarField::constant(1.0), PeriodicScalarField::constant(2.0), {}};
  const LogisticResult res = logistic_solve(p);
  double err = 0.0;
  if (res.solution)
    for (const auto& s : res.solution->trajectory.snapshots) err = std::max(err, (s.values.array() - 0.5).abs().maxCoeff());
  return {"logistic constant r/c", res.solution ? 0.5 + err : 0.0, 0.5, 1e-6};
}

Check check_comparison(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const SpatialMesh mesh = build_mesh(1, Box{{{0.0, 1.0}}}, {10});
  const TimeGrid grid(1.0, 8);
  PeriodicMatrixField b(2, mesh.size());
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < 2; ++k) {
      const double c0 = i == k ? u(rng) - 0.5 : u(rng), c1 = 0.5 * u(rng) * (i == k ? 1.0 : c0);
      b(i, k) = PeriodicScalarField::function([c0, c1](std::size_t, double t) { return c0 + c1 * std::sin(2.0 * M_PI * t); },
                                              "random");
    }
  const DispersalRecipe d{KernelProfile::gaussian(0.1 + 0.2 * u(rng)), u(rng), BoundaryMode::neumann_type};
  const LinearSystem sys = SystemRecipe{mesh, grid, {d, d}, b, {}}.build();
  StateField lo{Eigen::MatrixXd(mesh.size(), 2), 0.0}, hi{Eigen::MatrixXd(mesh.size(), 2), 0.0};
  for (Eigen::Index a = 0; a < lo.values.size(); ++a) {
    lo.values.data()[a] = u(rng);
    hi.values.data()[a] = lo.values.data()[a] + u(rng);
  }
  double worst = 0.0;
  for (int p = 0; p < 3; ++p) {
    lo = period_map(sys, lo);
    hi = period_map(sys, hi);
    worst = std::min(worst, (hi.values - lo.values).minCoeff());
  }
  return {"comparison principle (seeded)", worst, 0.0, 1e-8};
}

Check check_wnv_lambda() {
  const SpatialMesh mesh = build_mesh(1, Box{{{0.0, 1.0}}}, {8});
  const TimeGrid grid(1.0, 8);
  auto C = [](double v) { return PeriodicScalarField::constant(v); };
  const DispersalRecipe d{KernelProfile::gaussian(0.2), 1.0, BoundaryMode::neumann_type};
  const WnvConfig cfg{mesh, grid, d, d, WnvCoefficients{C(1), C(2), C(0.2), C(0.5), C(1), C(1), C(2), C(2), C(0.1)},
                      Eigen::MatrixXd::Constant(8, 4, 0.2), {}};
  const WnvLogistic lg = wnv_logistic_pair(cfg);
  const WnvReduction red = wnv_reduce(cfg, lg);
  const WnvReducedResult rr = wnv_reduced_solve(red, mesh, 0.0);
  const double h = 0.8, v = 1.5, a = 0.2 + 0.1 + h, b = 0.5 + v, tr = -a - b, det = a * b - 4.0 * v / h;
  return {"wnv lambda closed form", rr.bracket.lambda_estimate, 0.5 * (tr + std::sqrt(tr * tr - 4.0 * det)), 1e-6};
}

void cmd_selftest(Run& r, std::uint64_t seed) {
  std::vector<std::function<Check()>> suite{check_constant_scalar, check_theta_average, check_theta_matrix,
                                            check_logistic_constant, [seed] { return check_comparison(seed); },
                                            check_wnv_lambda};
  json checks = json::array();
  bool all = true;
  for (const auto& f : suite) {
    const Check c = f();
    all = all && c.pass();
    std::printf("%s %s value=%.12g expected=%.12g tol=%.1e\n", c.pass() ? "PASS" : "FAIL", c.name.c_str(), c.value,
                c.expected, c.tol);
    checks.push_back({{"name", c.name}, {"value", c.value}, {"expected", c.expected}, {"tol", c.tol}, {"pass", c.pass()}});
  }
  r.summary["result"] = {{"checks", checks}, {"all_pass", all}};
}

}  // namespace

const std::vector<std::string>& cli_commands() {
  static const std::vector<std::string> c{"theta",    "spectral-bound", "gpe", "periodic-solve", "classify",
                                          "simulate", "logistic",       "wnv", "selftest"};
  return c;
}

int run_command(const CliOptions& opt, std::string* message) {
  const auto t0 = std::chrono::steady_clock::now();
  auto say = [&](const std::string& s) {
    if (message) *message = s;
  };
  Run run{opt, {}, json::object(), {}};
  int code = exit_ok;
  std::string hash = "none";
  try {
    if (std::find(cli_commands().begin(), cli_commands().end(), opt.command) == cli_commands().end())
      throw ConfigError("unknown command '" + opt.command + "'");
    set_thread_count(std::max<std::size_t>(1, opt.threads));
    std::error_code ec;
    fs::create_directories(opt.out, ec);
    if (ec) throw IoError("cannot create output directory " + opt.out.string() + ": " + ec.message());

    const std::uint64_t seed = opt.seed.value_or(0);
    if (opt.command == "selftest" && opt.config.empty()) {
      run.cfg.solver.seed = seed;
    } else {
      if (opt.config.empty()) throw ConfigError("--config is required for " + opt.command);
      run.cfg = load_config(opt.config);
      if (opt.tol) {
        if (!(*opt.tol > 0.0)) throw ConfigError("--tol must be positive");
        run.cfg.solver.gpe.tol_lambda = *opt.tol;
        run.cfg.wnv_settings.options.gpe.tol_lambda = *opt.tol;
      }
      if (opt.seed) run.cfg.solver.seed = *opt.seed;
      hash = hex64(run.cfg.hash);
    }
    run.summary["command"] = opt.command;
    run.summary["config_hash"] = hash;
    run.summary["tolerances"] = tolerances(run.cfg);
    run.summary["seed"] = run.cfg.solver.seed;

    const std::string& c = opt.command;
    if (c == "theta") cmd_theta(run);
    else if (c == "spectral-bound") cmd_spectral(run);
    else if (c == "gpe") cmd_gpe(run);
    else if (c == "periodic-solve") cmd_periodic(run, false);
    else if (c == "classify") cmd_periodic(run, true);
    else if (c == "simulate") cmd_simulate(run);
    else if (c == "logistic") cmd_logistic(run, true);
    else if (c == "wnv") cmd_wnv(run);
    else cmd_selftest(run, run.cfg.solver.seed);

    if (c == "selftest" && !run.summary["result"]["all_pass"].get<bool>()) code = exit_failed_check;
    write_json(run.path("summary.json"), run.summary);
    say(c + " finished; results in " + opt.out.string());
  } catch (const ConfigError& e) {
    code = exit_config;
    say(std::string("config error: ") + e.what());
  } catch (const NumericalError& e) {
    code = exit_numerical;
    say(std::string("numerical failure: ") + e.what());
    try {
      write_json(run.path("diagnostics.json"),
                 json{{"command", opt.command}, {"config_hash", hash}, {"error", e.what()}, {"partial", run.summary}});
    } catch (const IoError&) {
    }
  } catch (const IoError& e) {
    code = exit_io;
    say(std::string("i/o error: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    code = exit_config;
    say(std::string("config error: ") + e.what());
  }

  if (code != exit_io) {
    try {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      json rec{{"command", opt.command},    {"config_hash", hash},     {"version", kVersion},
               {"exit_code", code},         {"wall_clock_seconds", secs}, {"threads", opt.threads}};
      run.outputs.push_back("run_record.json");
      rec["outputs"] = run.outputs;
      write_json(opt.out / "run_record.json", rec);
    } catch (const IoError& e) {
      code = exit_io;
      say(std::string("i/o error: ") + e.what());
    }
  }
  return code;
}

}  // namespace nlgpe
