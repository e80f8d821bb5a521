#pragma once

#include "nlgpe/evolution.hpp"
#include "nlgpe/fields.hpp"
#include "nlgpe/mesh.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace nlgpe {

/// Collatz-Wielandt bracket on s = ln r(Phi(T,0)) / T.
struct SpectralEstimate {
  double s_lo = 0.0;
  double s_hi = 0.0;
  std::size_t iterations = 0;
  /// Last normalized iterate v (strictly positive) and its image Phi v.
  StateField iterate;
  StateField image;
  /// s_hi - s_lo <= tol was reached.
  bool gap_flag = false;
  double r_estimate = 0.0;
  /// Running best (s_lo, s_hi) after each iteration.
  std::vector<std::pair<double, double>> history;
  StepDiagnostics diagnostics;

  double s_estimate() const { return 0.5 * (s_lo + s_hi); }
  double width() const { return s_hi - s_lo; }
};

/// Power iteration on the period map with sup-norm normalization. Starts from
/// `start` if given (must be strictly positive), else from the all-ones state.
SpectralEstimate power_bracket(const LinearSystem& system, double tol, std::size_t max_iter,
                               const StateField* start = nullptr);

enum class BoundDirection { lower, upper };

std::string to_string(BoundDirection d);

struct CertifiedBound {
  double beta = 0.0;
  double min_ratio = 0.0;  ///< min over samples of (L phi)/phi
  double max_ratio = 0.0;
  /// min (lower) or max (upper) over nodes of phi(x,T)/phi(x,0).
  double period_ratio = 1.0;
  std::size_t samples = 0;
};

/// beta = min (lower) or max (upper) of (L phi)/phi over the trajectory's
/// grid samples, where L phi = K phi + L(t) phi - phi_t and phi_t is taken by
/// centered differences (second-order one-sided at the two ends). The
/// trajectory must start at t = 0 and cover one period on the system grid.
CertifiedBound certify_bound(const LinearSystem& system, const Trajectory& phi, BoundDirection direction);

/// phi(t) = e^{-s t} Phi(t,0) v over one period, with s chosen from the
/// trajectory itself so that phi(T) >= phi(0) (lower) or phi(T) <= phi(0)
/// (upper), and scaled to sup norm 1 over all samples.
struct EigenTrajectory {
  Trajectory phi;
  double s = 0.0;
};

EigenTrajectory eigen_trajectory(const LinearSystem& system, const StateField& v, BoundDirection direction);

/// Dense (N m) x (N m) matrix of the discrete period map, built column by
/// column. Index of (node a, component i) is i * N + a.
Eigen::MatrixXd dense_period_matrix(const LinearSystem& system);

/// ln rho(dense period matrix) / T.
double dense_spectral_bound(const LinearSystem& system);

/// Ingredients of a linear system before assembly, so that kernels and rates
/// can be perturbed.
struct DispersalRecipe {
  KernelProfile profile;
  double rate = 1.0;
  BoundaryMode mode = BoundaryMode::neumann_type;
  TabulatedPolicy policy = TabulatedPolicy::reject;
};

struct SystemRecipe {
  SpatialMesh mesh;
  TimeGrid grid;
  std::vector<DispersalRecipe> dispersal;
  /// Reaction-part coupling b_ik; the removal is subtracted on assembly.
  PeriodicMatrixField coupling;
  StepOptions options;

  LinearSystem build() const;
};

struct ContinuityEntry {
  std::string datum;
  double delta = 0.0;
  double ds = 0.0;       ///< s(perturbed by delta) - s
  double ds_half = 0.0;  ///< s(perturbed by delta/2) - s
  double lipschitz = 0.0;
  bool ok = true;
  std::string note;
};

struct ContinuityReport {
  double baseline = 0.0;
  std::vector<ContinuityEntry> entries;
  bool ok = true;
};

using SpectralEstimator = std::function<double(const LinearSystem&)>;

/// Perturbs the diagonal of b by +-delta, every off-diagonal by +delta (m > 1),
/// each analytic kernel width by a factor (1 + delta) and each rate by +delta,
/// and records the change in s at delta and delta/2.
ContinuityReport continuity_probe(const SystemRecipe& recipe, double delta, double tol,
                                  const SpectralEstimator& estimator = {});

}  // namespace nlgpe
