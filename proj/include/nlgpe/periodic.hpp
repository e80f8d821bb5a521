#pragma once

#include "nlgpe/evolution.hpp"
#include "nlgpe/gpe.hpp"
#include "nlgpe/reaction.hpp"
#include "nlgpe/spectral.hpp"

#include <Eigen/Dense>

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace nlgpe {

/// Range of rhs(t_k, U_k) - dU/dt(t_k) over every grid sample of a candidate.
struct ResidualRange {
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();
  std::size_t samples = 0;
};

/// The time derivative is taken by centered differences on the grid
/// (second-order one-sided at the ends) unless supplied per snapshot.
ResidualRange residual_range(const NonlinearSystem& system, const Trajectory& candidate,
                             const std::vector<Eigen::MatrixXd>* derivative = nullptr);

/// M + 1 copies of `state` at the grid times of one period.
Trajectory constant_trajectory(const StateField& state, const TimeGrid& grid);

struct PairCheck {
  double slack = 0.0;
  bool ordered = false;         ///< lower <= upper at every sample
  bool lower_periodic = false;  ///< lower(T) >= lower(0)
  bool upper_periodic = false;  ///< upper(T) <= upper(0)
  ResidualRange lower_residual;
  ResidualRange upper_residual;
  bool lower_residual_ok = false;  ///< residual >= -slack
  bool upper_residual_ok = false;  ///< residual <= slack

  bool ok() const { return ordered && lower_periodic && upper_periodic && lower_residual_ok && upper_residual_ok; }
  std::string describe() const;
};

/// Lower and upper solutions over one period, with their validation.
struct OrderedPair {
  Trajectory lower;
  Trajectory upper;
  PairCheck check;
  double rho = 0.0;  ///< scaling found by auto_pair, 0 otherwise
};

/// residual_slack < 0 selects 1e-8 * max(1, sup upper). The lower
/// candidate's time derivative may be supplied per snapshot.
PairCheck check_pair(const NonlinearSystem& system, const Trajectory& lower, const Trajectory& upper,
                     double residual_slack = -1.0, const std::vector<Eigen::MatrixXd>* lower_derivative = nullptr);

OrderedPair make_pair(const NonlinearSystem& system, Trajectory lower, Trajectory upper, double residual_slack = -1.0);

struct SweepRecord {
  std::size_t sweep = 0;
  double gap = 0.0;           ///< sup |upper - lower| at t = T
  double lower_defect = 0.0;  ///< sup |P(lower) - lower|
  double upper_defect = 0.0;
};

struct PeriodicSolution {
  Trajectory trajectory;  ///< one period from the midpoint of the final envelopes
  Trajectory lower_envelope;
  Trajectory upper_envelope;
  double defect = 0.0;  ///< sup |U(T) - U(0)|
  double gap = 0.0;
  std::size_t iterations = 0;
  std::vector<SweepRecord> history;
};

/// Sweeps v <- P(v) from lower(T) and from upper(T), where P integrates the
/// nonlinear system over one period on the grid. Every sweep is checked for
/// monotonicity and order at all grid samples with slack 1e-8 * scale.
PeriodicSolution monotone_iterate(const NonlinearSystem& system, const OrderedPair& pair, double tol,
                                  std::size_t max_sweeps);

/// Lower solution rho * phi from the lower-control eigen-trajectory of the
/// linearization at zero, with rho the largest value <= rho0 (found by halving
/// then bisection) whose residual is strictly positive at every sample and
/// which stays below `upper`.
OrderedPair auto_pair(const NonlinearSystem& system, const EigenBracket& linearization, Trajectory upper,
                      double rho0 = 1.0, double residual_slack = -1.0);

enum class ThresholdCase { positive, negative, critical };

std::string to_string(ThresholdCase c);

struct ThresholdVerdict {
  EigenBracket bracket;
  ThresholdCase threshold_case = ThresholdCase::critical;
  double lambda = 0.0;
  double tol_lambda = 0.0;
  /// Decay rate -lambda_hi / 4 in the negative case, 0 otherwise.
  double sigma = 0.0;
  std::string predicted;
  std::optional<ReactionReport> reaction;
  std::optional<SubhomogeneityReport> subhomogeneity;
  std::vector<std::string> evidence;
};

/// Classifies by the generalized principal eigenvalue of the linearization at
/// zero with a dead zone |lambda| <= tol_lambda. When a box is given the
/// reaction is validated on it first.
ThresholdVerdict classify_threshold(const NonlinearSystem& system, const SpatialMesh& mesh, const GpeOptions& options,
                                    const StateBox* box = nullptr);

struct EvidenceRun {
  std::vector<double> distances;  ///< sup |u(nT) - target|, n = 0..periods
  double fitted_slope = 0.0;      ///< least-squares slope of ln distance vs t over the tail
  bool monotone_tail = false;
  double final_distance = 0.0;
  std::string verdict;  ///< "pass" or "inconclusive"
};

struct ConvergenceEvidence {
  std::vector<EvidenceRun> runs;
  bool all_pass = false;
};

/// Simulates each initial state for `periods` periods and records the
/// Poincare distances to U(., 0) (positive case) or to 0.
ConvergenceEvidence verify_convergence(const NonlinearSystem& system, const ThresholdVerdict& verdict,
                                       const PeriodicSolution* solution, const std::vector<StateField>& initial,
                                       std::size_t periods, double pass_tol = 1e-4);

struct LogisticProblem {
  SpatialMesh mesh;
  TimeGrid grid;
  DispersalRecipe dispersal;
  PeriodicScalarField growth;    ///< r(x,t)
  PeriodicScalarField crowding;  ///< c(x,t) > 0
  StepOptions options;
};

enum class LogisticPath { automatic, condition_a, condition_b };

struct LogisticOptions {
  GpeOptions gpe;
  LogisticPath path = LogisticPath::automatic;
  double upper_margin = 0.1;
  /// Upper level for the (B) path; 0 searches M_A * 2^j.
  double upper_b = 0.0;
  double tol = 1e-6;
  std::size_t max_sweeps = 5000;
};

struct LogisticResult {
  ThresholdVerdict verdict;
  std::optional<PeriodicSolution> solution;
  std::optional<OrderedPair> pair;
  bool condition_a = false;
  bool condition_b = false;
  std::string condition;  ///< "A" or "B"
  double upper_level = 0.0;
};

NonlinearSystem logistic_system(const LogisticProblem& problem);

/// Checks d sum_b J(a,b) w_b - d*(a) + r(a,t) - c(a,t) M <= 0 at every sample.
bool logistic_condition_b(const LogisticProblem& problem, double level);

LogisticResult logistic_solve(const LogisticProblem& problem, const LogisticOptions& options = {});

}  // namespace nlgpe
