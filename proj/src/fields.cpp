#include "nlgpe/fields.hpp"

#include "nlgpe/error.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace nlgpe {

TimeGrid::TimeGrid(double period, std::size_t steps) : period_(period), steps_(steps) {
  if (!(period > 0.0) || !std::isfinite(period)) throw ConfigError("time grid: period must be positive");
  if (steps < 4) throw ConfigError("time grid: need at least 4 steps per period");
}

std::vector<double> TimeGrid::times() const {
  std::vector<double> ts(steps_);
  for (std::size_t k = 0; k < steps_; ++k) ts[k] = time(k);
  return ts;
}

namespace {

class ConstantSource final : public PeriodicScalarField::Source {
 public:
  explicit ConstantSource(double c) : c_(c) {}
  double at(std::size_t, double) const override { return c_; }
  std::string describe() const override {
    std::ostringstream os;
    os << "const " << c_;
    return os.str();
  }
  bool time_independent() const override { return true; }

 private:
  double c_;
};

class ExpressionSource final : public PeriodicScalarField::Source {
 public:
  ExpressionSource(Expression e, std::vector<Point> nodes) : e_(std::move(e)), nodes_(std::move(nodes)) {}
  double at(std::size_t node, double t) const override {
    const Point& p = nodes_[node];
    return e_(p.x, p.y, t);
  }
  std::string describe() const override { return "expr " + e_.text(); }
  bool time_independent() const override { return !e_.depends_on_time(); }

 private:
  Expression e_;
  std::vector<Point> nodes_;
};

class FunctionSource final : public PeriodicScalarField::Source {
 public:
  FunctionSource(std::function<double(std::size_t, double)> fn, std::string desc, bool ti)
      : fn_(std::move(fn)), desc_(std::move(desc)), ti_(ti) {}
  double at(std::size_t node, double t) const override { return fn_(node, t); }
  std::string describe() const override { return desc_; }
  bool time_independent() const override { return ti_; }

 private:
  std::function<double(std::size_t, double)> fn_;
  std::string desc_;
  bool ti_;
};

// Periodic four-point Lagrange interpolation; exact at the grid times.
class TableSource final : public PeriodicScalarField::Source {
 public:
  TableSource(Eigen::MatrixXd samples, double period) : s_(std::move(samples)), period_(period) {
    if (s_.cols() < 4) throw ConfigError("table field: need at least 4 time samples");
  }
  double at(std::size_t node, double t) const override {
    const auto m = s_.cols();
    const double h = period_ / static_cast<double>(m);
    double tau = std::fmod(t, period_);
    if (tau < 0) tau += period_;
    const double pos = tau / h;
    auto k = static_cast<Eigen::Index>(std::floor(pos));
    const double r = pos - static_cast<double>(k);
    const auto a = static_cast<Eigen::Index>(node);
    auto v = [&](Eigen::Index j) { return s_(a, ((j % m) + m) % m); };
    if (r < 1e-12) return v(k);
    if (r > 1.0 - 1e-12) return v(k + 1);
    const double f0 = v(k - 1), f1 = v(k), f2 = v(k + 1), f3 = v(k + 2);
    // nodes at -1, 0, 1, 2
    return f0 * (-(r) * (r - 1) * (r - 2) / 6.0) + f1 * ((r + 1) * (r - 1) * (r - 2) / 2.0) +
           f2 * (-(r + 1) * r * (r - 2) / 2.0) + f3 * ((r + 1) * r * (r - 1) / 6.0);
  }
  std::string describe() const override {
    return "table " + std::to_string(s_.rows()) + "x" + std::to_string(s_.cols());
  }

 private:
  Eigen::MatrixXd s_;
  double period_;
};

class SpatialSource final : public PeriodicScalarField::Source {
 public:
  explicit SpatialSource(Eigen::VectorXd v) : v_(std::move(v)) {}
  double at(std::size_t node, double) const override { return v_[static_cast<Eigen::Index>(node)]; }
  std::string describe() const override { return "spatial " + std::to_string(v_.size()); }
  bool time_independent() const override { return true; }

 private:
  Eigen::VectorXd v_;
};

}  // namespace

PeriodicScalarField::PeriodicScalarField() : source_(std::make_shared<ConstantSource>(0.0)) {}

PeriodicScalarField::PeriodicScalarField(std::shared_ptr<const Source> source) : source_(std::move(source)) {}

PeriodicScalarField PeriodicScalarField::constant(double c) {
  if (!std::isfinite(c)) throw ConfigError("field: non-finite constant");
  return PeriodicScalarField(std::make_shared<ConstantSource>(c));
}

PeriodicScalarField PeriodicScalarField::expression(const Expression& expr, const SpatialMesh& mesh) {
  return PeriodicScalarField(std::make_shared<ExpressionSource>(expr, mesh.nodes()));
}

PeriodicScalarField PeriodicScalarField::function(std::function<double(std::size_t, double)> fn,
                                                  std::string description, bool time_independent) {
  return PeriodicScalarField(
      std::make_shared<FunctionSource>(std::move(fn), std::move(description), time_independent));
}

PeriodicScalarField PeriodicScalarField::table(Eigen::MatrixXd samples, double period) {
  if (!samples.allFinite()) throw ConfigError("table field: non-finite entries");
  return PeriodicScalarField(std::make_shared<TableSource>(std::move(samples), period));
}

PeriodicScalarField PeriodicScalarField::spatial(Eigen::VectorXd values) {
  if (!values.allFinite()) throw ConfigError("spatial field: non-finite entries");
  return PeriodicScalarField(std::make_shared<SpatialSource>(std::move(values)));
}

Eigen::MatrixXd PeriodicScalarField::sample(std::size_t nodes, const TimeGrid& grid) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(nodes), static_cast<Eigen::Index>(grid.steps()));
  for (std::size_t k = 0; k < grid.steps(); ++k) {
    const double t = grid.time(k);
    for (std::size_t a = 0; a < nodes; ++a)
      out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(k)) = at(a, t);
  }
  return out;
}

void PeriodicScalarField::sample_at(double t, Eigen::Ref<Eigen::VectorXd> out) const {
  for (Eigen::Index a = 0; a < out.size(); ++a) out[a] = at(static_cast<std::size_t>(a), t);
}

PeriodicScalarField PeriodicScalarField::shifted(double c) const {
  PeriodicScalarField f = *this;
  f.shift_ += c;
  return f;
}

PeriodicScalarField PeriodicScalarField::with_node_offset(const Eigen::VectorXd& offset) const {
  PeriodicScalarField f = *this;
  if (f.offset_.size() == 0)
    f.offset_ = offset;
  else
    f.offset_ += offset;
  return f;
}

std::string PeriodicScalarField::describe() const {
  std::ostringstream os;
  os << source_->describe();
  if (shift_ != 0.0) os << " + " << shift_;
  if (offset_.size() > 0) os << " + node offset";
  return os.str();
}

PeriodicMatrixField::PeriodicMatrixField(std::size_t components, std::size_t nodes)
    : m_(components), nodes_(nodes), entries_(components * components) {
  if (components == 0) throw ConfigError("matrix field: need at least one component");
}

Eigen::MatrixXd PeriodicMatrixField::at(std::size_t node, double t) const {
  Eigen::MatrixXd l(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(m_));
  for (std::size_t i = 0; i < m_; ++i)
    for (std::size_t k = 0; k < m_; ++k)
      l(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = (*this)(i, k).at(node, t);
  return l;
}

PeriodicMatrixField PeriodicMatrixField::with_diagonal_offset(const Eigen::VectorXd& offset) const {
  if (static_cast<std::size_t>(offset.size()) != nodes_)
    throw ConfigError("matrix field: diagonal offset has wrong length");
  PeriodicMatrixField f = *this;
  for (std::size_t i = 0; i < m_; ++i) f(i, i) = f(i, i).with_node_offset(offset);
  return f;
}

PeriodicMatrixField PeriodicMatrixField::with_diagonal_shift(double c) const {
  PeriodicMatrixField f = *this;
  for (std::size_t i = 0; i < m_; ++i) f(i, i) = f(i, i).shifted(c);
  return f;
}

PeriodicMatrixField PeriodicMatrixField::with_offdiagonal_shift(double c) const {
  PeriodicMatrixField f = *this;
  for (std::size_t i = 0; i < m_; ++i)
    for (std::size_t k = 0; k < m_; ++k)
      if (i != k) f(i, k) = f(i, k).shifted(c);
  return f;
}

double PeriodicMatrixField::node_norm(std::size_t node, const TimeGrid& grid) const {
  double best = 0.0;
  for (std::size_t k = 0; k < grid.steps(); ++k)
    best = std::max(best, at(node, grid.time(k)).cwiseAbs().rowwise().sum().maxCoeff());
  return best;
}

double PeriodicMatrixField::norm(const TimeGrid& grid) const {
  double best = 0.0;
  for (std::size_t a = 0; a < nodes_; ++a) best = std::max(best, node_norm(a, grid));
  return best;
}

bool PeriodicMatrixField::time_independent() const {
  for (const auto& e : entries_)
    if (!e.time_independent()) return false;
  return true;
}

bool is_irreducible(const Eigen::MatrixXd& a, double threshold) {
  const auto m = a.rows();
  if (m <= 1) return true;
  auto reaches_all = [&](bool transpose) {
    std::vector<bool> seen(static_cast<std::size_t>(m), false);
    std::vector<Eigen::Index> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
      const Eigen::Index i = stack.back();
      stack.pop_back();
      for (Eigen::Index k = 0; k < m; ++k) {
        if (k == i || seen[static_cast<std::size_t>(k)]) continue;
        const double w = transpose ? a(k, i) : a(i, k);
        if (w > threshold) {
          seen[static_cast<std::size_t>(k)] = true;
          stack.push_back(k);
        }
      }
    }
    for (bool s : seen)
      if (!s) return false;
    return true;
  };
  return reaches_all(false) && reaches_all(true);
}

StructureReport validate_L1_L2(const PeriodicMatrixField& field, const SpatialMesh& mesh, const TimeGrid& grid) {
  const std::size_t m = field.components();
  const std::size_t n = field.nodes();
  if (n != mesh.size()) throw ConfigError("validate: field and mesh node counts differ");
  StructureReport rep;
  rep.averaged = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  rep.min_offdiagonal = m > 1 ? std::numeric_limits<double>::infinity() : 0.0;
  const double dt = grid.dt();
  for (std::size_t k = 0; k < grid.steps(); ++k) {
    const double t = grid.time(k);
    for (std::size_t a = 0; a < n; ++a) {
      const Eigen::MatrixXd l = field.at(a, t);
      rep.averaged += mesh.weights()[static_cast<Eigen::Index>(a)] * dt * l;
      for (Eigen::Index i = 0; i < l.rows(); ++i)
        for (Eigen::Index j = 0; j < l.cols(); ++j)
          if (i != j) rep.min_offdiagonal = std::min(rep.min_offdiagonal, l(i, j));
      if (!rep.pointwise_irreducible_somewhere && is_irreducible(l))
        rep.pointwise_irreducible_somewhere = true;
    }
  }
  rep.averaged /= mesh.measure() * grid.period();
  rep.cooperative = rep.min_offdiagonal >= 0.0;
  rep.irreducible = is_irreducible(rep.averaged);
  return rep;
}

}  // namespace nlgpe
