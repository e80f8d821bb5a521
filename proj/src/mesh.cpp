#include "nlgpe/mesh.hpp"

#include "nlgpe/error.hpp"

#include <cmath>
#include <numbers>

namespace nlgpe {

double Box::measure() const {
  double m = 1.0;
  for (const auto& ax : axes) m *= ax[1] - ax[0];
  return m;
}

SpatialMesh::SpatialMesh(int dimension, Box bounds, std::vector<std::size_t> resolution)
    : dimension_(dimension), bounds_(std::move(bounds)), resolution_(std::move(resolution)) {
  if (dimension_ != 1 && dimension_ != 2)
    throw ConfigError("mesh: dimension must be 1 or 2, got " + std::to_string(dimension_));
  if (bounds_.axes.size() != static_cast<std::size_t>(dimension_) ||
      resolution_.size() != static_cast<std::size_t>(dimension_))
    throw ConfigError("mesh: bounds/resolution must have one entry per axis");
  for (int k = 0; k < dimension_; ++k) {
    if (!(bounds_.axes[k][1] > bounds_.axes[k][0]))
      throw ConfigError("mesh: non-positive box extent on axis " + std::to_string(k));
    if (resolution_[k] < 2) throw ConfigError("mesh: resolution must be >= 2 per axis");
  }

  const std::size_t nx = resolution_[0];
  const std::size_t ny = dimension_ == 2 ? resolution_[1] : 1;
  const double hx = (bounds_.axes[0][1] - bounds_.axes[0][0]) / static_cast<double>(nx);
  const double hy =
      dimension_ == 2 ? (bounds_.axes[1][1] - bounds_.axes[1][0]) / static_cast<double>(ny) : 1.0;
  nodes_.reserve(nx * ny);
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      Point p;
      p.x = bounds_.axes[0][0] + (static_cast<double>(i) + 0.5) * hx;
      if (dimension_ == 2) p.y = bounds_.axes[1][0] + (static_cast<double>(j) + 0.5) * hy;
      nodes_.push_back(p);
    }
  }
  weights_ = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(nodes_.size()), hx * hy);
}

double SpatialMesh::spacing() const {
  double h = 0.0;
  for (int k = 0; k < dimension_; ++k)
    h = std::max(h, (bounds_.axes[k][1] - bounds_.axes[k][0]) / static_cast<double>(resolution_[k]));
  return h;
}

SpatialMesh build_mesh(int dimension, const Box& bounds, const std::vector<std::size_t>& resolution) {
  return SpatialMesh(dimension, bounds, resolution);
}

KernelProfile KernelProfile::gaussian(double sigma) {
  if (!(sigma > 0)) throw ConfigError("kernel: gaussian width must be positive");
  KernelProfile p;
  p.family = KernelFamily::gaussian;
  p.width = sigma;
  return p;
}

KernelProfile KernelProfile::tent(double radius) {
  if (!(radius > 0)) throw ConfigError("kernel: tent radius must be positive");
  KernelProfile p;
  p.family = KernelFamily::tent;
  p.width = radius;
  return p;
}

KernelProfile KernelProfile::rescaled(double delta, BaseProfile base) {
  if (!(delta > 0)) throw ConfigError("kernel: rescaled delta must be positive");
  KernelProfile p;
  p.family = KernelFamily::rescaled;
  p.delta = delta;
  p.base = base;
  return p;
}

KernelProfile KernelProfile::tabulated(Eigen::MatrixXd table) {
  KernelProfile p;
  p.family = KernelFamily::tabulated;
  p.table = std::move(table);
  return p;
}

namespace {

// Unit-ball profiles with unit mass over R^N.
double base_profile(BaseProfile base, double r, int dimension) {
  if (r >= 1.0) return 0.0;
  constexpr double pi = std::numbers::pi;
  switch (base) {
    case BaseProfile::tent:
      return dimension == 1 ? 1.0 - r : 3.0 / pi * (1.0 - r);
    case BaseProfile::epanechnikov:
      return dimension == 1 ? 0.75 * (1.0 - r * r) : 2.0 / pi * (1.0 - r * r);
  }
  return 0.0;
}

}  // namespace

double KernelProfile::evaluate(double zx, double zy, int dimension) const {
  const double r2 = zx * zx + (dimension == 2 ? zy * zy : 0.0);
  const double r = std::sqrt(r2);
  const double n = static_cast<double>(dimension);
  switch (family) {
    case KernelFamily::gaussian: {
      const double s2 = width * width;
      return std::pow(2.0 * std::numbers::pi * s2, -0.5 * n) * std::exp(-0.5 * r2 / s2);
    }
    case KernelFamily::tent:
      return std::pow(width, -n) * base_profile(BaseProfile::tent, r / width, dimension);
    case KernelFamily::rescaled:
      return std::pow(delta, -n) * base_profile(base, r / delta, dimension);
    case KernelFamily::tabulated:
      break;
  }
  throw ConfigError("kernel: tabulated kernels have no analytic profile");
}

bool KernelSpec::symmetric(double tol) const {
  const double scale_ref = std::max(1.0, values.cwiseAbs().maxCoeff());
  return (values - values.transpose()).cwiseAbs().maxCoeff() <= tol * scale_ref;
}

KernelSpec normalize_kernel(const KernelProfile& raw, const SpatialMesh& mesh, TabulatedPolicy policy) {
  const auto n = static_cast<Eigen::Index>(mesh.size());
  KernelSpec spec;
  spec.profile = raw;
  if (raw.family == KernelFamily::tabulated) {
    if (raw.table.rows() != n || raw.table.cols() != n)
      throw ConfigError("kernel: tabulated kernel must be " + std::to_string(n) + "x" +
                        std::to_string(n));
    spec.values = raw.table;
  } else {
    spec.values.resize(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
      const Point& p = mesh.node(static_cast<std::size_t>(a));
      for (Eigen::Index b = 0; b < n; ++b) {
        const Point& q = mesh.node(static_cast<std::size_t>(b));
        spec.values(a, b) = raw.evaluate(p.x - q.x, p.y - q.y, mesh.dimension());
      }
    }
  }

  for (Eigen::Index a = 0; a < n; ++a) {
    if (!(spec.values(a, a) > 0.0))
      throw ConfigError("kernel: J(x,x) must be positive (node " + std::to_string(a) + ")");
    for (Eigen::Index b = 0; b < n; ++b) {
      if (!std::isfinite(spec.values(a, b)) || spec.values(a, b) < 0.0)
        throw ConfigError("kernel: negative or non-finite entry at (" + std::to_string(a) + "," +
                          std::to_string(b) + ")");
    }
  }

  if (raw.family == KernelFamily::tabulated) {
    const double max_row = (spec.values * mesh.weights()).maxCoeff();
    if (max_row > 1.0 + 1e-10) {
      if (policy == TabulatedPolicy::reject)
        throw ConfigError("kernel: tabulated kernel has quadrature row sum " +
                          std::to_string(max_row) + " > 1");
      spec.scale = 1.0 / max_row;
      spec.values *= spec.scale;
    }
  }
  return spec;
}

std::string to_string(BoundaryMode mode) {
  return mode == BoundaryMode::dirichlet_type ? "dirichlet" : "neumann";
}

BoundaryMode boundary_mode_from_string(const std::string& s) {
  if (s == "dirichlet" || s == "dirichlet_type") return BoundaryMode::dirichlet_type;
  if (s == "neumann" || s == "neumann_type") return BoundaryMode::neumann_type;
  throw ConfigError("unknown boundary mode '" + s + "'");
}

Eigen::VectorXd DispersalOperator::apply(const Eigen::VectorXd& u) const {
  return scatter * u - removal.cwiseProduct(u);
}

double DispersalOperator::scatter_norm() const { return scatter.rowwise().sum().maxCoeff(); }

DispersalOperator assemble_dispersal(const KernelSpec& kernel, const SpatialMesh& mesh, double rate,
                                     BoundaryMode mode) {
  const auto n = static_cast<Eigen::Index>(mesh.size());
  if (kernel.values.rows() != n || kernel.values.cols() != n)
    throw ConfigError("dispersal: kernel size does not match mesh");
  if (!(rate > 0.0)) throw ConfigError("dispersal: rate must be positive");
  DispersalOperator op;
  op.rate = rate;
  op.mode = mode;
  op.scatter = rate * kernel.values * mesh.weights().asDiagonal();
  if (mode == BoundaryMode::dirichlet_type) {
    op.removal = Eigen::VectorXd::Constant(n, rate);
  } else {
    // j(x_a) = sum_b J(x_b, x_a) w_b
    op.removal = rate * (kernel.values.transpose() * mesh.weights());
  }
  return op;
}

}  // namespace nlgpe
