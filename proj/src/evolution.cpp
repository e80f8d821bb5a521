#include "nlgpe/evolution.hpp"

#include "nlgpe/error.hpp"

#include <cmath>
#include <sstream>

namespace nlgpe {

namespace {

constexpr double kBlowUp = 1e12;

void guard(const Eigen::MatrixXd& v, double t) {
  if (!v.allFinite()) {
    std::ostringstream os;
    os << "stepper: non-finite state at t = " << t;
    throw NumericalError(os.str());
  }
  const double norm = v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
  if (norm > kBlowUp) {
    std::ostringstream os;
    os << "stepper: blow-up guard, ||u||_inf = " << norm << " at t = " << t;
    throw NumericalError(os.str());
  }
}

bool is_integer(double q) { return std::abs(q - std::round(q)) <= 1e-9 * std::max(1.0, std::abs(q)); }

}  // namespace

StateField StateField::constant(std::size_t nodes, std::size_t components, double c, double time) {
  StateField s;
  s.values = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(nodes), static_cast<Eigen::Index>(components), c);
  s.time = time;
  return s;
}

void StepDiagnostics::merge(const StepDiagnostics& other) {
  clamped += other.clamped;
  positivity_violations += other.positivity_violations;
  most_negative = std::min(most_negative, other.most_negative);
  messages.insert(messages.end(), other.messages.begin(), other.messages.end());
}

void clamp_output(StateField& out, bool input_nonnegative, StepDiagnostics* diagnostics) {
  const double ctol = 1e-12 * out.sup_norm();
  std::size_t clamped = 0, violations = 0;
  double most_negative = 0.0;
  for (Eigen::Index j = 0; j < out.values.cols(); ++j) {
    for (Eigen::Index a = 0; a < out.values.rows(); ++a) {
      double& v = out.values(a, j);
      if (v >= 0.0) continue;
      most_negative = std::min(most_negative, v);
      if (v >= -ctol) {
        v = 0.0;
        ++clamped;
      } else if (input_nonnegative) {
        ++violations;
      }
    }
  }
  if (diagnostics) {
    diagnostics->clamped += clamped;
    diagnostics->positivity_violations += violations;
    diagnostics->most_negative = std::min(diagnostics->most_negative, most_negative);
    if (violations > 0) {
      std::ostringstream os;
      os << "positivity violation: " << violations << " entries below -" << ctol << " (min " << most_negative
         << ") at t = " << out.time;
      diagnostics->messages.push_back(os.str());
    }
  }
}

LinearSystem::LinearSystem(std::vector<DispersalOperator> dispersal, PeriodicMatrixField coupling, TimeGrid grid,
                           StepOptions options)
    : dispersal_(std::move(dispersal)), coupling_(std::move(coupling)), grid_(grid), options_(options) {
  if (dispersal_.size() != coupling_.components())
    throw ConfigError("linear system: " + std::to_string(dispersal_.size()) + " dispersal operators for " +
                      std::to_string(coupling_.components()) + " components");
  for (const auto& op : dispersal_)
    if (op.size() != coupling_.nodes()) throw ConfigError("linear system: operator size != coupling node count");
  if (!(options_.substep_rule > 0.0)) throw ConfigError("linear system: substep rule must be positive");

  double scatter = 0.0;
  for (const auto& op : dispersal_) scatter = std::max(scatter, op.scatter_norm());
  norm_ = scatter + coupling_.norm(grid_);
  if (!std::isfinite(norm_)) throw NumericalError("linear system: non-finite coefficients");

  const std::size_t m_steps = grid_.steps();
  if (options_.substeps_per_period > 0) {
    substeps_ = ((options_.substeps_per_period + m_steps - 1) / m_steps) * m_steps;
  } else {
    const double k = std::ceil(norm_ * grid_.dt() / options_.substep_rule);
    substeps_ = m_steps * static_cast<std::size_t>(std::max(1.0, k));
  }
  build_cache();
}

LinearSystem LinearSystem::from_reaction_coupling(std::vector<DispersalOperator> dispersal,
                                                  const PeriodicMatrixField& b, TimeGrid grid, StepOptions options) {
  if (dispersal.size() != b.components()) throw ConfigError("linear system: component count mismatch");
  PeriodicMatrixField l = b;
  for (std::size_t i = 0; i < b.components(); ++i) l(i, i) = l(i, i).with_node_offset(-dispersal[i].removal);
  return LinearSystem(std::move(dispersal), std::move(l), grid, options);
}

LinearSystem LinearSystem::with_coupling(PeriodicMatrixField coupling) const {
  return LinearSystem(dispersal_, std::move(coupling), grid_, options_);
}

LinearSystem LinearSystem::with_substeps(std::size_t substeps_per_period) const {
  StepOptions opt = options_;
  opt.substeps_per_period = substeps_per_period;
  return LinearSystem(dispersal_, coupling_, grid_, opt);
}

void LinearSystem::sample_coupling(double t, Eigen::MatrixXd& coeff) const {
  const std::size_t m = components();
  coeff.resize(static_cast<Eigen::Index>(nodes()), static_cast<Eigen::Index>(m * m));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < m; ++k) coupling_(i, k).sample_at(t, coeff.col(static_cast<Eigen::Index>(i * m + k)));
  if (!coeff.allFinite()) throw NumericalError("linear system: non-finite coefficient sample at t = " + std::to_string(t));
}

void LinearSystem::build_cache() {
  auto cache = std::make_shared<std::vector<Eigen::MatrixXd>>();
  if (coupling_.time_independent()) {
    cache->resize(1);
    sample_coupling(0.0, cache->front());
  } else {
    cache->resize(2 * substeps_);
    const double half = 0.5 * base_dt();
    for (std::size_t j = 0; j < cache->size(); ++j) sample_coupling(static_cast<double>(j) * half, (*cache)[j]);
  }
  cache_ = std::move(cache);
}

void LinearSystem::apply_with(const Eigen::MatrixXd& coeff, const Eigen::MatrixXd& v, Eigen::MatrixXd& out) const {
  const auto m = static_cast<Eigen::Index>(components());
  out.resize(v.rows(), m);
  for (Eigen::Index i = 0; i < m; ++i) {
    out.col(i).noalias() = dispersal_[static_cast<std::size_t>(i)].scatter * v.col(i);
    for (Eigen::Index k = 0; k < m; ++k) out.col(i).array() += coeff.col(i * m + k).array() * v.col(k).array();
  }
}

void LinearSystem::apply(double t, const Eigen::MatrixXd& v, Eigen::MatrixXd& out) const {
  Eigen::MatrixXd coeff;
  sample_coupling(t, coeff);
  apply_with(coeff, v, out);
}

void LinearSystem::apply_cached(std::size_t half_step, const Eigen::MatrixXd& v, Eigen::MatrixXd& out) const {
  const auto& cache = *cache_;
  apply_with(cache.size() == 1 ? cache.front() : cache[half_step % cache.size()], v, out);
}

StateField step_linear(const LinearSystem& system, const StateField& state, double t0, double t1,
                       StepDiagnostics* diagnostics) {
  if (!(t1 > t0)) throw ConfigError("step_linear: need t1 > t0");
  if (state.nodes() != system.nodes() || state.components() != system.components())
    throw ConfigError("step_linear: state shape does not match the system");
  const bool nonneg = state.values.size() == 0 || state.values.minCoeff() >= 0.0;

  Eigen::MatrixXd v = state.values, k1, k2, k3, k4, tmp;
  const double h = system.base_dt();
  const double q0 = t0 / h, q = (t1 - t0) / h;
  if (is_integer(q0) && is_integer(q) && std::llround(q) >= 1) {
    const auto n = static_cast<long long>(system.substeps_per_period());
    const long long j0 = std::llround(q0), count = std::llround(q);
    for (long long s = 0; s < count; ++s) {
      const auto idx = static_cast<std::size_t>((((j0 + s) % n) + n) % n);
      const std::size_t half = 2 * idx;
      system.apply_cached(half, v, k1);
      tmp = v + 0.5 * h * k1;
      system.apply_cached(half + 1, tmp, k2);
      tmp = v + 0.5 * h * k2;
      system.apply_cached(half + 1, tmp, k3);
      tmp = v + h * k3;
      system.apply_cached(half + 2, tmp, k4);
      v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      guard(v, t0 + static_cast<double>(s + 1) * h);
    }
  } else {
    const auto count = static_cast<long long>(std::max(1.0, std::ceil(q - 1e-9)));
    const double dt = (t1 - t0) / static_cast<double>(count);
    for (long long s = 0; s < count; ++s) {
      const double t = t0 + static_cast<double>(s) * dt;
      system.apply(t, v, k1);
      tmp = v + 0.5 * dt * k1;
      system.apply(t + 0.5 * dt, tmp, k2);
      tmp = v + 0.5 * dt * k2;
      system.apply(t + 0.5 * dt, tmp, k3);
      tmp = v + dt * k3;
      system.apply(t + dt, tmp, k4);
      v += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      guard(v, t + dt);
    }
  }
  StateField out{std::move(v), t1};
  clamp_output(out, nonneg, diagnostics);
  return out;
}

StateField period_map(const LinearSystem& system, const StateField& state, StepDiagnostics* diagnostics) {
  if (!state.values.allFinite()) throw ConfigError("period_map: non-finite state");
  return step_linear(system, state, 0.0, system.grid().period(), diagnostics);
}

NonlinearSystem::NonlinearSystem(std::vector<DispersalOperator> dispersal, ReactionPtr reaction, TimeGrid grid,
                                 StepOptions options)
    : dispersal_(std::move(dispersal)), reaction_(std::move(reaction)), grid_(grid), options_(options) {
  if (!reaction_) throw ConfigError("nonlinear system: missing reaction");
  if (dispersal_.size() != reaction_->components())
    throw ConfigError("nonlinear system: dispersal operator count != reaction components");
  for (const auto& op : dispersal_) {
    if (op.size() != dispersal_.front().size()) throw ConfigError("nonlinear system: operator sizes differ");
    dispersal_norm_ = std::max(dispersal_norm_, op.scatter_norm() + op.removal.maxCoeff());
  }
}

void NonlinearSystem::rhs(double t, const Eigen::MatrixXd& u, Eigen::MatrixXd& out) const {
  reaction_->evaluate(t, u, out);
  for (Eigen::Index i = 0; i < u.cols(); ++i) {
    const auto& op = dispersal_[static_cast<std::size_t>(i)];
    out.col(i).noalias() += op.scatter * u.col(i);
    out.col(i).array() -= op.removal.array() * u.col(i).array();
  }
}

LinearSystem NonlinearSystem::linearization_at_zero() const {
  return LinearSystem::from_reaction_coupling(dispersal_, reaction_->jacobian_at_zero(), grid_, options_);
}

StateField step_nonlinear(const NonlinearSystem& system, const StateField& state, double t0, double t1,
                          StepDiagnostics* diagnostics) {
  if (!(t1 > t0)) throw ConfigError("step_nonlinear: need t1 > t0");
  if (state.nodes() != system.nodes() || state.components() != system.components())
    throw ConfigError("step_nonlinear: state shape does not match the system");
  const double scale = std::max(1.0, state.sup_norm());
  if (state.values.minCoeff() < -1e-12 * scale) throw ConfigError("step_nonlinear: initial state must be nonnegative");

  Eigen::MatrixXd u = state.values.cwiseMax(0.0), k1, k2, k3, k4, tmp;
  const double total = system.dispersal_norm() + system.reaction().jacobian_norm(t0, u);
  const auto count = static_cast<long long>(
      std::max(1.0, std::ceil((t1 - t0) * total / system.options().substep_rule - 1e-9)));
  if (static_cast<double>(count) > static_cast<double>(system.options().max_substeps)) {
    std::ostringstream os;
    os << "step_nonlinear: " << count << " substeps needed on [" << t0 << ", " << t1 << "] (Jacobian norm " << total
       << "); the system is too stiff for the explicit stepper";
    throw NumericalError(os.str());
  }
  const double dt = (t1 - t0) / static_cast<double>(count);
  for (long long s = 0; s < count; ++s) {
    const double t = t0 + static_cast<double>(s) * dt;
    system.rhs(t, u, k1);
    tmp = u + 0.5 * dt * k1;
    system.rhs(t + 0.5 * dt, tmp, k2);
    tmp = u + 0.5 * dt * k2;
    system.rhs(t + 0.5 * dt, tmp, k3);
    tmp = u + dt * k3;
    system.rhs(t + dt, tmp, k4);
    u += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    guard(u, t + dt);
  }
  StateField out{std::move(u), t1};
  clamp_output(out, true, diagnostics);
  return out;
}

Trajectory trajectory_linear(const LinearSystem& system, const StateField& state, std::size_t periods,
                             StepDiagnostics* diagnostics) {
  const TimeGrid& g = system.grid();
  Trajectory tr;
  const std::size_t steps = periods * g.steps();
  tr.snapshots.reserve(steps + 1);
  tr.snapshots.push_back(state);
  for (std::size_t k = 0; k < steps; ++k) {
    const double ta = state.time + static_cast<double>(k) * g.dt();
    const double tb = state.time + static_cast<double>(k + 1) * g.dt();
    tr.snapshots.push_back(step_linear(system, tr.snapshots.back(), ta, tb, diagnostics));
  }
  return tr;
}

Trajectory trajectory_nonlinear(const NonlinearSystem& system, const StateField& state, std::size_t periods,
                                StepDiagnostics* diagnostics) {
  const TimeGrid& g = system.grid();
  Trajectory tr;
  const std::size_t steps = periods * g.steps();
  tr.snapshots.reserve(steps + 1);
  tr.snapshots.push_back(state);
  for (std::size_t k = 0; k < steps; ++k) {
    const double ta = state.time + static_cast<double>(k) * g.dt();
    const double tb = state.time + static_cast<double>(k + 1) * g.dt();
    tr.snapshots.push_back(step_nonlinear(system, tr.snapshots.back(), ta, tb, diagnostics));
  }
  return tr;
}

}  // namespace nlgpe
