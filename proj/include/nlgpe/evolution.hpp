#pragma once

#include "nlgpe/fields.hpp"
#include "nlgpe/mesh.hpp"
#include "nlgpe/reaction.hpp"

#include <Eigen/Dense>

#include <memory>
#include <string>
#include <vector>

namespace nlgpe {

/// u(x,t) at one time: values(a, i) is component i at node a.
struct StateField {
  Eigen::MatrixXd values;
  double time = 0.0;

  std::size_t nodes() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t components() const { return static_cast<std::size_t>(values.cols()); }
  double sup_norm() const { return values.size() ? values.cwiseAbs().maxCoeff() : 0.0; }
  double min() const { return values.minCoeff(); }

  static StateField constant(std::size_t nodes, std::size_t components, double c, double time = 0.0);
};

/// Snapshots at t0 + k * grid.dt(), k = 0..K.
struct Trajectory {
  std::vector<StateField> snapshots;

  const StateField& front() const { return snapshots.front(); }
  const StateField& back() const { return snapshots.back(); }
  std::size_t size() const { return snapshots.size(); }
};

struct StepOptions {
  /// Substeps satisfy (operator norm) * dt <= substep_rule.
  double substep_rule = 0.1;
  /// Fixed substep count per period for linear systems; 0 = use the rule.
  /// Rounded up to a multiple of the grid step count.
  std::size_t substeps_per_period = 0;
  /// Nonlinear steps needing more substeps than this throw NumericalError.
  std::size_t max_substeps = 200000;
};

/// Sign diagnostics collected by the steppers.
struct StepDiagnostics {
  std::size_t clamped = 0;                ///< entries in [-ctol, 0) set to 0
  std::size_t positivity_violations = 0;  ///< entries below -ctol from nonnegative input
  double most_negative = 0.0;
  std::vector<std::string> messages;

  void merge(const StepDiagnostics& other);
};

/// v_t = K_i v_i + sum_k l_ik(x,t) v_k, with l_ii already containing -d_i*(x).
class LinearSystem {
 public:
  LinearSystem(std::vector<DispersalOperator> dispersal, PeriodicMatrixField coupling, TimeGrid grid,
               StepOptions options = {});

  /// Builds L = B - diag(d_i*) from reaction-part coefficients b_ik.
  static LinearSystem from_reaction_coupling(std::vector<DispersalOperator> dispersal,
                                             const PeriodicMatrixField& b, TimeGrid grid, StepOptions options = {});

  std::size_t components() const { return coupling_.components(); }
  std::size_t nodes() const { return coupling_.nodes(); }
  const TimeGrid& grid() const { return grid_; }
  const std::vector<DispersalOperator>& dispersal() const { return dispersal_; }
  const PeriodicMatrixField& coupling() const { return coupling_; }
  const StepOptions& options() const { return options_; }

  /// max_i ||K_i||_inf + max over samples of ||L(x,t)||_inf.
  double operator_norm() const { return norm_; }
  std::size_t substeps_per_period() const { return substeps_; }
  double base_dt() const { return grid_.period() / static_cast<double>(substeps_); }

  /// Same dispersal and grid, different coupling.
  LinearSystem with_coupling(PeriodicMatrixField coupling) const;
  /// Same system with a fixed substep count per period.
  LinearSystem with_substeps(std::size_t substeps_per_period) const;

  /// out = K v + L(t) v (the operator without the time derivative).
  void apply(double t, const Eigen::MatrixXd& v, Eigen::MatrixXd& out) const;
  /// Same, using cached coefficients at half-step index j (time j * base_dt() / 2).
  void apply_cached(std::size_t half_step, const Eigen::MatrixXd& v, Eigen::MatrixXd& out) const;

 private:
  void apply_with(const Eigen::MatrixXd& coeff, const Eigen::MatrixXd& v, Eigen::MatrixXd& out) const;
  void sample_coupling(double t, Eigen::MatrixXd& coeff) const;
  void build_cache();

  std::vector<DispersalOperator> dispersal_;
  PeriodicMatrixField coupling_;
  TimeGrid grid_;
  StepOptions options_;
  double norm_ = 0.0;
  std::size_t substeps_ = 0;
  // coefficient samples (N x m^2) at the 2 * substeps_ half-step times of one period
  std::shared_ptr<const std::vector<Eigen::MatrixXd>> cache_;
};

/// u_t = K_i u_i - d_i*(x) u_i + f_i(x,t,u).
class NonlinearSystem {
 public:
  NonlinearSystem(std::vector<DispersalOperator> dispersal, ReactionPtr reaction, TimeGrid grid,
                  StepOptions options = {});

  std::size_t components() const { return reaction_->components(); }
  std::size_t nodes() const { return dispersal_.front().size(); }
  const TimeGrid& grid() const { return grid_; }
  const std::vector<DispersalOperator>& dispersal() const { return dispersal_; }
  const Reaction& reaction() const { return *reaction_; }
  const ReactionPtr& reaction_ptr() const { return reaction_; }
  const StepOptions& options() const { return options_; }

  /// max_i (||K_i||_inf + max d_i*).
  double dispersal_norm() const { return dispersal_norm_; }

  /// Right-hand side K u - d* u + f(t,u).
  void rhs(double t, const Eigen::MatrixXd& u, Eigen::MatrixXd& out) const;
  /// Linearization at zero: L = Df(x,t,0) - diag(d*).
  LinearSystem linearization_at_zero() const;

 private:
  std::vector<DispersalOperator> dispersal_;
  ReactionPtr reaction_;
  TimeGrid grid_;
  StepOptions options_;
  double dispersal_norm_ = 0.0;
};

StateField step_linear(const LinearSystem& system, const StateField& state, double t0, double t1,
                       StepDiagnostics* diagnostics = nullptr);

/// Phi(T,0) state.
StateField period_map(const LinearSystem& system, const StateField& state, StepDiagnostics* diagnostics = nullptr);

StateField step_nonlinear(const NonlinearSystem& system, const StateField& state, double t0, double t1,
                          StepDiagnostics* diagnostics = nullptr);

/// Snapshots at every grid time over `periods` periods starting at state.time.
Trajectory trajectory_linear(const LinearSystem& system, const StateField& state, std::size_t periods = 1,
                             StepDiagnostics* diagnostics = nullptr);
Trajectory trajectory_nonlinear(const NonlinearSystem& system, const StateField& state, std::size_t periods = 1,
                                StepDiagnostics* diagnostics = nullptr);

/// Applies the clamp-and-report contract to a stepper output.
void clamp_output(StateField& out, bool input_nonnegative, StepDiagnostics* diagnostics);

}  // namespace nlgpe
