#pragma once

#include "nlgpe/evolution.hpp"
#include "nlgpe/fields.hpp"
#include "nlgpe/floquet.hpp"
#include "nlgpe/mesh.hpp"
#include "nlgpe/spectral.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace nlgpe {

/// Lower and upper control fields at one epsilon.
struct ControlPair {
  double epsilon = 0.0;
  double theta_max = 0.0;
  std::vector<bool> sigma_set;  ///< theta(x) >= theta_M - epsilon
  std::size_t sigma_count = 0;
  PeriodicMatrixField lower_field;
  PeriodicMatrixField upper_field;
  /// Diagonal offsets added to L at each node.
  Eigen::VectorXd lower_offset;
  Eigen::VectorXd upper_offset;
  /// theta of the control fields implied by the shift identity.
  Eigen::VectorXd theta_under;
  Eigen::VectorXd theta_over;
  std::vector<std::string> warnings;
};

ControlPair build_control_pair(const PeriodicMatrixField& field, const MonodromyResult& theta, double epsilon);

struct GpeOptions {
  double tol_lambda = 1e-3;
  /// 0 selects max(0.1, 0.05 (theta_M - theta_min)).
  double epsilon0 = 0.0;
  std::size_t max_halvings = 12;
  double power_tol = 1e-8;
  std::size_t max_iter = 20000;
  /// Iteration cap for the unperturbed system, which may have no spectral gap.
  std::size_t unperturbed_max_iter = 3000;
  FloquetOptions floquet;
};

struct EpsilonStage {
  double epsilon = 0.0;
  double lambda_lo = 0.0;
  double lambda_hi = 0.0;
  /// Outer Collatz-Wielandt endpoints: lower s_lo of the lower control, upper s_hi of the upper control.
  double certified_lo = 0.0;
  double certified_hi = 0.0;
  std::size_t sigma_count = 0;
  std::size_t iterations_lo = 0;
  std::size_t iterations_hi = 0;
  /// Bracket widths of the two power solves.
  double width_lo = 0.0;
  double width_hi = 0.0;
  /// [lambda_lo, lambda_hi] meets the unperturbed bracket (slack 2 power_tol).
  bool sandwich = true;
};

/// lambda_lo and lambda_hi are the power estimates of the principal
/// eigenvalues of the lower and upper control systems at the final epsilon.
struct EigenBracket {
  double lambda_lo = 0.0;
  double lambda_hi = 0.0;
  double certified_lo = 0.0;
  double certified_hi = 0.0;
  double lambda_estimate = 0.0;
  double theta_max = 0.0;
  double theta_min = 0.0;
  double epsilon0 = 0.0;
  double power_tol = 0.0;
  double tol_lambda = 0.0;
  std::size_t substeps = 0;
  bool converged = false;
  std::vector<EpsilonStage> trace;
  SpectralEstimate unperturbed;
  /// Eigen-trajectories of the final lower and upper control systems.
  EigenTrajectory lower_eigen;
  EigenTrajectory upper_eigen;
  /// Final control systems (shared substep count).
  std::vector<LinearSystem> controls;
  MonodromyResult theta;
  std::vector<std::string> diagnostics;

  double final_epsilon() const { return trace.empty() ? 0.0 : trace.back().epsilon; }
  double width() const { return lambda_hi - lambda_lo; }
};

EigenBracket solve_gpe(const LinearSystem& system, const SpatialMesh& mesh, const GpeOptions& options = {});

struct CwReport {
  CertifiedBound lower;
  CertifiedBound upper;
  double window_lo = 0.0;
  double window_hi = 0.0;
  double slack = 0.0;
  /// window_lo >= lambda_lo - slack, window_hi <= lambda_hi + slack,
  /// window_lo <= window_hi + slack.
  bool consistent = false;
};

/// Runs certify_bound on the original system with the lower control
/// eigen-trajectory (lower direction) and the upper one (upper direction).
CwReport characterize_cw(const LinearSystem& system, const EigenBracket& bracket, double tol);

}  // namespace nlgpe
