#pragma once

#include "nlgpe/expression.hpp"
#include "nlgpe/mesh.hpp"

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace nlgpe {

/// Uniform grid {k T / M : k = 0..M-1} over one period.
class TimeGrid {
 public:
  TimeGrid(double period, std::size_t steps);

  double period() const { return period_; }
  std::size_t steps() const { return steps_; }
  double dt() const { return period_ / static_cast<double>(steps_); }
  double time(std::size_t k) const { return static_cast<double>(k) * dt(); }
  std::vector<double> times() const;

 private:
  double period_;
  std::size_t steps_;
};

/// A scalar function of (node, t), T-periodic in t.
///
/// The underlying source is shared and immutable; a field additionally
/// carries a constant shift and an optional per-node offset, which is how the
/// control constructions and perturbations are expressed without copying the
/// source.
class PeriodicScalarField {
 public:
  class Source {
   public:
    virtual ~Source() = default;
    virtual double at(std::size_t node, double t) const = 0;
    virtual std::string describe() const = 0;
    /// True when the value does not depend on t.
    virtual bool time_independent() const { return false; }
  };

  PeriodicScalarField();  // the zero field

  static PeriodicScalarField constant(double c);
  static PeriodicScalarField expression(const Expression& expr, const SpatialMesh& mesh);
  static PeriodicScalarField function(std::function<double(std::size_t, double)> fn, std::string description,
                                      bool time_independent = false);
  /// N x M samples on the grid; evaluated off-grid by periodic cubic interpolation in t.
  static PeriodicScalarField table(Eigen::MatrixXd samples, double period);
  /// Per-node values, constant in time.
  static PeriodicScalarField spatial(Eigen::VectorXd values);

  double at(std::size_t node, double t) const {
    double v = source_->at(node, t) + shift_;
    if (offset_.size() > 0) v += offset_[static_cast<Eigen::Index>(node)];
    return v;
  }

  /// N x M matrix of values at (node a, grid time k).
  Eigen::MatrixXd sample(std::size_t nodes, const TimeGrid& grid) const;
  /// Values at all nodes at time t.
  void sample_at(double t, Eigen::Ref<Eigen::VectorXd> out) const;

  PeriodicScalarField shifted(double c) const;
  PeriodicScalarField with_node_offset(const Eigen::VectorXd& offset) const;

  bool time_independent() const { return source_->time_independent(); }
  std::string describe() const;

 private:
  explicit PeriodicScalarField(std::shared_ptr<const Source> source);

  std::shared_ptr<const Source> source_;
  double shift_ = 0.0;
  Eigen::VectorXd offset_;
};

/// L(x,t) = (l_ik(x,t)), an m x m array of periodic scalar fields over N nodes.
class PeriodicMatrixField {
 public:
  PeriodicMatrixField() = default;
  PeriodicMatrixField(std::size_t components, std::size_t nodes);

  std::size_t components() const { return m_; }
  std::size_t nodes() const { return nodes_; }

  PeriodicScalarField& operator()(std::size_t i, std::size_t k) { return entries_[i * m_ + k]; }
  const PeriodicScalarField& operator()(std::size_t i, std::size_t k) const { return entries_[i * m_ + k]; }

  Eigen::MatrixXd at(std::size_t node, double t) const;

  /// Adds offset(a) to every diagonal entry at node a.
  PeriodicMatrixField with_diagonal_offset(const Eigen::VectorXd& offset) const;
  /// Adds c to every diagonal entry.
  PeriodicMatrixField with_diagonal_shift(double c) const;
  /// Adds c to every off-diagonal entry.
  PeriodicMatrixField with_offdiagonal_shift(double c) const;

  /// Max over grid samples of the row-sum norm ||L(x_a, t_k)||_inf at node a.
  double node_norm(std::size_t node, const TimeGrid& grid) const;
  double norm(const TimeGrid& grid) const;

  bool time_independent() const;

 private:
  std::size_t m_ = 0;
  std::size_t nodes_ = 0;
  std::vector<PeriodicScalarField> entries_;
};

/// Outcome of checking cooperativity (every off-diagonal sample >= 0) and
/// irreducibility of the space-time averaged matrix.
struct StructureReport {
  double min_offdiagonal = 0.0;
  Eigen::MatrixXd averaged;
  bool cooperative = true;
  bool irreducible = true;
  /// L(x0,t0) is irreducible at some sample, which already implies irreducibility of the average.
  bool pointwise_irreducible_somewhere = false;
};

StructureReport validate_L1_L2(const PeriodicMatrixField& field, const SpatialMesh& mesh, const TimeGrid& grid);

/// Strong connectivity of the graph with an edge i->k whenever |a(i,k)| > threshold, i != k.
bool is_irreducible(const Eigen::MatrixXd& a, double threshold = 1e-12);

}  // namespace nlgpe
