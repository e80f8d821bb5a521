#pragma once

#include "nlgpe/evolution.hpp"
#include "nlgpe/gpe.hpp"
#include "nlgpe/periodic.hpp"
#include "nlgpe/reaction.hpp"
#include "nlgpe/spectral.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace nlgpe {

/// Below this total host density the standard incidence terms are set to 0.
constexpr double kIncidenceFloor = 1e-300;

struct WnvCoefficients {
  PeriodicScalarField a1, a2, b1, b2, c1, c2, mu1, mu2, gamma;
};

/// Components are ordered (H_u, H_i, V_u, V_i).
struct WnvConfig {
  SpatialMesh mesh;
  TimeGrid grid;
  DispersalRecipe host;
  DispersalRecipe vector;
  WnvCoefficients coef;
  /// N x 4 initial state for simulations.
  Eigen::MatrixXd initial;
  StepOptions options;
};

/// Checks a_k, c_k > 0, b_k, mu_k, gamma >= 0 at all samples and mu_k > 0 for
/// every grid time at some common node. Throws ConfigError.
void validate_wnv(const WnvConfig& config);

/// The full four-component model with standard incidence.
class WnvReaction final : public Reaction {
 public:
  WnvReaction(WnvCoefficients coef, std::size_t nodes);

  std::size_t components() const override { return 4; }
  std::string name() const override { return "wnv"; }
  void evaluate(double t, const Eigen::MatrixXd& u, Eigen::MatrixXd& out) const override;
  Eigen::MatrixXd jacobian(std::size_t node, double t, const Eigen::VectorXd& u) const override;
  /// Linear part only: the incidence terms have no derivative at H = 0.
  PeriodicMatrixField jacobian_at_zero() const override;

 private:
  void local(std::size_t node, double t, const double* u, double* f, Eigen::MatrixXd* jac) const;
  WnvCoefficients coef_;
  std::size_t nodes_;
};

/// Infected-compartment system for (H_i, V_i) around the host and vector
/// totals, perturbed by sigma along phi_1, phi_2. With clamp the factors
/// (H + sigma phi_1 - H_i) and (V + sigma phi_2 - V_i) take their positive part.
class WnvReducedReaction final : public Reaction {
 public:
  struct Data {
    WnvCoefficients coef;
    PeriodicScalarField host_total, vector_total;  ///< the periodic H and V
    PeriodicScalarField phi1, phi2;
    std::size_t nodes = 0;
  };

  WnvReducedReaction(std::shared_ptr<const Data> data, double sigma, bool clamp);

  std::size_t components() const override { return 2; }
  std::string name() const override { return clamp_ ? "wnv-reduced-clamped" : "wnv-reduced"; }
  void evaluate(double t, const Eigen::MatrixXd& u, Eigen::MatrixXd& out) const override;
  Eigen::MatrixXd jacobian(std::size_t node, double t, const Eigen::VectorXd& u) const override;
  PeriodicMatrixField jacobian_at_zero() const override;

 private:
  std::shared_ptr<const Data> data_;
  double sigma_;
  bool clamp_;
};

struct WnvOptions {
  GpeOptions gpe;
  double logistic_tol = 1e-9;
  double reduced_tol = 1e-8;
  std::size_t max_sweeps = 20000;
  double upper_margin = 0.1;
};

struct WnvLogistic {
  LogisticResult host;
  LogisticResult vector;
  double lambda_g1 = 0.0;
  double lambda_g2 = 0.0;
  bool host_positive = false;
  bool vector_positive = false;
};

WnvLogistic wnv_logistic_pair(const WnvConfig& config, const WnvOptions& options = {});

struct WnvReduction {
  std::shared_ptr<const WnvReducedReaction::Data> data;
  std::vector<DispersalOperator> dispersal;  ///< host, vector
  TimeGrid grid;
  StepOptions options;
  /// Host and vector totals over one period.
  Trajectory host_total;
  Trajectory vector_total;
  /// Eigen-trajectories of the lower controls of the two logistic linearizations.
  Trajectory phi1;
  Trajectory phi2;
  double sigma0 = 0.0;
  double sigma_violation = 0.0;  ///< first sampled |sigma| breaking cooperativity (0 if none)

  /// l_ik^sigma including -d_i*.
  PeriodicMatrixField coupling(double sigma) const;
  LinearSystem linear_system(double sigma) const;
  NonlinearSystem reduced_system(double sigma, bool clamp) const;
  /// (H + sigma phi_1, V + sigma phi_2) on the grid.
  Trajectory upper_candidate(double sigma) const;
};

/// Needs both logistic problems in the positive case.
WnvReduction wnv_reduce(const WnvConfig& config, const WnvLogistic& logistic);

struct WnvReducedResult {
  double sigma = 0.0;
  EigenBracket bracket;
  ThresholdCase threshold_case = ThresholdCase::critical;
  bool exists = false;
  std::optional<OrderedPair> pair;
  std::optional<PeriodicSolution> solution;  ///< clamped system
  std::optional<PeriodicSolution> unclamped;
  double clamp_difference = 0.0;  ///< sup |clamped - unclamped| over the period
  /// min over samples of (H + sigma phi_1 - H_i) and (V + sigma phi_2 - V_i).
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  std::string certificate;
};

WnvReducedResult wnv_reduced_solve(const WnvReduction& reduction, const SpatialMesh& mesh, double sigma,
                                   const WnvOptions& options = {});

enum class WnvCase { endemic, disease_free, host_extinct, vector_extinct, total_extinction, indeterminate };

std::string to_string(WnvCase c);

struct WnvComponentTrace {
  std::string name;
  std::vector<double> distances;  ///< sup over nodes of |u(nT) - limit(0)|
  double final_distance = 0.0;
  std::string verdict;  ///< "pass" or "inconclusive"
};

struct WnvEvidence {
  WnvCase predicted = WnvCase::indeterminate;
  Eigen::MatrixXd limit;  ///< N x 4 predicted limit at t = 0
  std::vector<WnvComponentTrace> components;
  std::vector<double> host_total_distance;    ///< sup |H(nT) - H_total(0)|
  std::vector<double> vector_total_distance;
  /// sup over periods of |(H_u + H_i) - H| with H simulated from its own logistic equation.
  double host_conservation = 0.0;
  double vector_conservation = 0.0;
  /// Last fully simulated period.
  Trajectory final_period;
  std::size_t periods_completed = 0;
  std::vector<std::string> flags;
  bool pass = false;
};

struct WnvVerifyOptions {
  std::size_t periods = 200;
  double pass_tol = 1e-3;
  double zero_tol = 1e-6;
};

NonlinearSystem wnv_full_system(const WnvConfig& config);

/// Simulates the full model and compares period samples with the limit
/// predicted from the signs of lambda(G_1), lambda(G_2) and lambda(L).
WnvEvidence wnv_simulate_verify(const WnvConfig& config, const WnvLogistic& logistic,
                                const WnvReducedResult* reduced, const WnvVerifyOptions& options = {});

}  // namespace nlgpe
