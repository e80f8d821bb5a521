#pragma once

#include "nlgpe/fields.hpp"

#include <Eigen/Dense>

#include <memory>
#include <string>
#include <vector>

namespace nlgpe {

/// Reaction terms f(x,t,u) of a nonlinear nonlocal system.
///
/// States are N x m matrices: row a holds the m components at node a.
class Reaction {
 public:
  virtual ~Reaction() = default;

  virtual std::size_t components() const = 0;
  virtual std::string name() const = 0;

  /// out(a, i) = f_i(x_a, t, u(a, :)).
  virtual void evaluate(double t, const Eigen::MatrixXd& u, Eigen::MatrixXd& out) const = 0;
  /// d f_i / d u_k at node a.
  virtual Eigen::MatrixXd jacobian(std::size_t node, double t, const Eigen::VectorXd& u) const = 0;
  /// b_ik(x,t) = d f_i / d u_k (x,t,0) as an analytic field.
  virtual PeriodicMatrixField jacobian_at_zero() const = 0;

  /// Max over nodes of the row-sum norm of the Jacobian at state u.
  double jacobian_norm(double t, const Eigen::MatrixXd& u) const;
};

using ReactionPtr = std::shared_ptr<const Reaction>;

/// Scalar f(x,t,u) = u (r(x,t) - c(x,t) u).
class LogisticReaction final : public Reaction {
 public:
  LogisticReaction(PeriodicScalarField growth, PeriodicScalarField crowding, std::size_t nodes);

  std::size_t components() const override { return 1; }
  std::string name() const override { return "logistic"; }
  void evaluate(double t, const Eigen::MatrixXd& u, Eigen::MatrixXd& out) const override;
  Eigen::MatrixXd jacobian(std::size_t node, double t, const Eigen::VectorXd& u) const override;
  PeriodicMatrixField jacobian_at_zero() const override;

  const PeriodicScalarField& growth() const { return growth_; }
  const PeriodicScalarField& crowding() const { return crowding_; }

 private:
  PeriodicScalarField growth_;
  PeriodicScalarField crowding_;
  std::size_t nodes_;
};

/// f_i(x,t,u) = sum_k B_ik(x,t) u_k - u_i sum_k C_ik(x,t) u_k.
/// With C = 0 this is the linear reaction B u.
class QuadraticReaction final : public Reaction {
 public:
  QuadraticReaction(PeriodicMatrixField linear, PeriodicMatrixField quadratic);

  std::size_t components() const override { return linear_.components(); }
  std::string name() const override { return "quadratic"; }
  void evaluate(double t, const Eigen::MatrixXd& u, Eigen::MatrixXd& out) const override;
  Eigen::MatrixXd jacobian(std::size_t node, double t, const Eigen::VectorXd& u) const override;
  PeriodicMatrixField jacobian_at_zero() const override { return linear_; }

 private:
  PeriodicMatrixField linear_;
  PeriodicMatrixField quadratic_;
};

/// Component-wise box [lo, hi] of states used by the sampled validators.
struct StateBox {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

struct ReactionReport {
  double max_abs_f_at_zero = 0.0;      ///< f(x,t,0) = 0 check
  double min_offdiagonal_jacobian = 0.0;
  bool vanishes_at_zero = true;
  bool cooperative = true;
  /// Jacobian irreducible at some (x0,t0) for every sampled state of the box.
  bool irreducible_somewhere = true;
};

/// Samples f on the (node, grid time, box lattice) set.
ReactionReport validate_reaction(const Reaction& f, std::size_t nodes, const TimeGrid& grid, const StateBox& box,
                                 std::size_t levels = 4);

enum class Subhomogeneity { none, sub, strict, strong };

std::string to_string(Subhomogeneity s);

struct SubhomogeneityReport {
  double min_gap = 0.0;                 ///< min over samples and components of f(rho u) - rho f(u)
  Eigen::VectorXd min_gap_per_component;
  Subhomogeneity classification = Subhomogeneity::none;
  std::size_t samples = 0;
};

/// Evaluates f(x,t,rho u) - rho f(x,t,u) over nodes x grid times x box lattice x rhos.
/// strong: every component of every gap > 0; strict: every gap vector >= 0 and
/// nonzero; sub: every gap >= 0 up to rounding.
SubhomogeneityReport validate_subhomogeneity(const Reaction& f, std::size_t nodes, const TimeGrid& grid,
                                             const StateBox& box, const std::vector<double>& rhos,
                                             std::size_t levels = 4);

}  // namespace nlgpe
