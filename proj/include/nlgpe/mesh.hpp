#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace nlgpe {

/// A point of the spatial domain. One-dimensional meshes leave y at zero.
struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Axis-aligned box [lo_k, hi_k] per axis.
struct Box {
  std::vector<std::array<double, 2>> axes;

  double measure() const;
};

/// Uniform midpoint-rule discretization of an interval or rectangle.
/// Node index runs x-fastest: a = i + nx * j.
class SpatialMesh {
 public:
  SpatialMesh(int dimension, Box bounds, std::vector<std::size_t> resolution);

  int dimension() const { return dimension_; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<Point>& nodes() const { return nodes_; }
  const Point& node(std::size_t a) const { return nodes_[a]; }
  const Eigen::VectorXd& weights() const { return weights_; }
  const Box& bounds() const { return bounds_; }
  const std::vector<std::size_t>& resolution() const { return resolution_; }
  /// |Omega|.
  double measure() const { return bounds_.measure(); }
  /// Largest cell width over the axes.
  double spacing() const;

 private:
  int dimension_;
  Box bounds_;
  std::vector<std::size_t> resolution_;
  std::vector<Point> nodes_;
  Eigen::VectorXd weights_;
};

SpatialMesh build_mesh(int dimension, const Box& bounds, const std::vector<std::size_t>& resolution);

enum class KernelFamily { gaussian, tent, rescaled, tabulated };

/// Compactly supported unit-ball profiles used by the rescaled family.
enum class BaseProfile { tent, epanechnikov };

/// Raw description of a dispersal kernel before it is bound to a mesh.
///   gaussian:  width = standard deviation
///   tent:      width = support radius
///   rescaled:  J(x,y) = delta^-N J*((x-y)/delta) with J* = base
///   tabulated: table(a,b) = J(x_a, x_b)
struct KernelProfile {
  KernelFamily family = KernelFamily::gaussian;
  double width = 0.1;
  double delta = 0.1;
  BaseProfile base = BaseProfile::tent;
  Eigen::MatrixXd table;

  static KernelProfile gaussian(double sigma);
  static KernelProfile tent(double radius);
  static KernelProfile rescaled(double delta, BaseProfile base);
  static KernelProfile tabulated(Eigen::MatrixXd table);

  /// Full-space profile J(z), z = x - y. Only for the analytic families.
  double evaluate(double zx, double zy, int dimension) const;
};

/// What normalize_kernel does with a tabulated kernel whose quadrature row
/// sums exceed one.
enum class TabulatedPolicy { reject, rescale };

/// A kernel bound to a mesh: values(a,b) = J(x_a, x_b).
struct KernelSpec {
  KernelProfile profile;
  Eigen::MatrixXd values;
  double scale = 1.0;  ///< factor applied to a tabulated table; 1 for analytic families

  bool symmetric(double tol = 1e-14) const;
};

KernelSpec normalize_kernel(const KernelProfile& raw, const SpatialMesh& mesh,
                            TabulatedPolicy policy = TabulatedPolicy::reject);

enum class BoundaryMode { dirichlet_type, neumann_type };

std::string to_string(BoundaryMode mode);
BoundaryMode boundary_mode_from_string(const std::string& s);

/// Discrete u -> d * int_Omega J(x,y) u(y) dy - d*(x) u(x), stored as its
/// scatter part K(a,b) = d J(x_a,x_b) w_b and the removal vector d*(x_a).
struct DispersalOperator {
  Eigen::MatrixXd scatter;
  Eigen::VectorXd removal;
  double rate = 0.0;
  BoundaryMode mode = BoundaryMode::neumann_type;

  std::size_t size() const { return static_cast<std::size_t>(removal.size()); }
  /// scatter * u - removal .* u
  Eigen::VectorXd apply(const Eigen::VectorXd& u) const;
  /// Max row sum of the scatter matrix.
  double scatter_norm() const;
};

DispersalOperator assemble_dispersal(const KernelSpec& kernel, const SpatialMesh& mesh, double rate,
                                     BoundaryMode mode);

}  // namespace nlgpe
