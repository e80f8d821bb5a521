#pragma once

#include "nlgpe/fields.hpp"
#include "nlgpe/mesh.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace nlgpe {

struct FloquetOptions {
  /// Substeps are chosen so that ||L||_inf * dt <= substep_rule.
  double substep_rule = 0.1;
  /// Fixed substep count per period; overrides the rule when nonzero.
  std::size_t substeps = 0;
};

/// Per-node monodromy matrices of phi' = L(x,t) phi and the derived
/// theta(x) = ln rho(Gamma_x(T,0)) / T.
struct MonodromyResult {
  double period = 0.0;
  std::vector<Eigen::MatrixXd> monodromy;
  Eigen::VectorXd theta;
  double theta_max = 0.0;
  double theta_min = 0.0;
  std::size_t argmax = 0;
  /// theta clamped at ln(1e-300)/T because the spectral radius underflowed.
  std::vector<bool> floored;
  /// Dominant eigenvalue had an imaginary part above tolerance.
  std::vector<bool> perron_warning;
  std::vector<std::string> diagnostics;
};

/// Gamma_x(T,0) at one node by classical RK4.
Eigen::MatrixXd monodromy(const PeriodicMatrixField& field, std::size_t node, const TimeGrid& grid,
                          const FloquetOptions& options = {}, std::vector<std::string>* diagnostics = nullptr);

MonodromyResult theta_field(const PeriodicMatrixField& field, const SpatialMesh& mesh, const TimeGrid& grid,
                            const FloquetOptions& options = {});

/// max_x rho(Gamma_x(T,0)) = exp(theta_M T).
double essential_radius(const MonodromyResult& result);

}  // namespace nlgpe
