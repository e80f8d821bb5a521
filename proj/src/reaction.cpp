#include "nlgpe/reaction.hpp"

#include "nlgpe/error.hpp"

#include <cmath>
#include <limits>

namespace nlgpe {

double Reaction::jacobian_norm(double t, const Eigen::MatrixXd& u) const {
  double best = 0.0;
  for (Eigen::Index a = 0; a < u.rows(); ++a) {
    const Eigen::VectorXd ua = u.row(a).transpose();
    best = std::max(best, jacobian(static_cast<std::size_t>(a), t, ua).cwiseAbs().rowwise().sum().maxCoeff());
  }
  return best;
}

LogisticReaction::LogisticReaction(PeriodicScalarField growth, PeriodicScalarField crowding, std::size_t nodes)
    : growth_(std::move(growth)), crowding_(std::move(crowding)), nodes_(nodes) {}

void LogisticReaction::evaluate(double t, const Eigen::MatrixXd& u, Eigen::MatrixXd& out) const {
  out.resize(u.rows(), 1);
  for (Eigen::Index a = 0; a < u.rows(); ++a) {
    const auto node = static_cast<std::size_t>(a);
    const double v = u(a, 0);
    out(a, 0) = v * (growth_.at(node, t) - crowding_.at(node, t) * v);
  }
}

Eigen::MatrixXd LogisticReaction::jacobian(std::size_t node, double t, const Eigen::VectorXd& u) const {
  Eigen::MatrixXd j(1, 1);
  j(0, 0) = growth_.at(node, t) - 2.0 * crowding_.at(node, t) * u[0];
  return j;
}

PeriodicMatrixField LogisticReaction::jacobian_at_zero() const {
  PeriodicMatrixField b(1, nodes_);
  b(0, 0) = growth_;
  return b;
}

QuadraticReaction::QuadraticReaction(PeriodicMatrixField linear, PeriodicMatrixField quadratic)
    : linear_(std::move(linear)), quadratic_(std::move(quadratic)) {
  if (linear_.components() != quadratic_.components() || linear_.nodes() != quadratic_.nodes())
    throw ConfigError("quadratic reaction: linear and quadratic parts have different shapes");
}

void QuadraticReaction::evaluate(double t, const Eigen::MatrixXd& u, Eigen::MatrixXd& out) const {
  const auto m = static_cast<Eigen::Index>(components());
  out.resize(u.rows(), m);
  for (Eigen::Index a = 0; a < u.rows(); ++a) {
    const auto node = static_cast<std::size_t>(a);
    for (Eigen::Index i = 0; i < m; ++i) {
      double lin = 0.0, quad = 0.0;
      for (Eigen::Index k = 0; k < m; ++k) {
        const auto ii = static_cast<std::size_t>(i), kk = static_cast<std::size_t>(k);
        lin += linear_(ii, kk).at(node, t) * u(a, k);
        quad += quadratic_(ii, kk).at(node, t) * u(a, k);
      }
      out(a, i) = lin - u(a, i) * quad;
    }
  }
}

Eigen::MatrixXd QuadraticReaction::jacobian(std::size_t node, double t, const Eigen::VectorXd& u) const {
  const Eigen::MatrixXd b = linear_.at(node, t);
  const Eigen::MatrixXd c = quadratic_.at(node, t);
  Eigen::MatrixXd j = b;
  const Eigen::VectorXd cu = c * u;
  for (Eigen::Index i = 0; i < j.rows(); ++i) {
    for (Eigen::Index k = 0; k < j.cols(); ++k) j(i, k) -= u[i] * c(i, k);
    j(i, i) -= cu[i];
  }
  return j;
}

namespace {

// Visits every point of a levels^m lattice over the box.
template <class F>
void for_each_lattice_point(const StateBox& box, std::size_t levels, F&& visit) {
  const auto m = box.lo.size();
  if (box.hi.size() != m || m == 0) throw ConfigError("state box: lo/hi sizes differ or are empty");
  for (Eigen::Index i = 0; i < m; ++i)
    if (!(box.hi[i] >= box.lo[i])) throw ConfigError("state box: empty box");
  levels = std::max<std::size_t>(levels, 1);
  std::vector<std::size_t> idx(static_cast<std::size_t>(m), 0);
  Eigen::VectorXd u(m);
  for (;;) {
    for (Eigen::Index i = 0; i < m; ++i) {
      const double s = levels == 1 ? 0.5 : static_cast<double>(idx[static_cast<std::size_t>(i)]) /
                                               static_cast<double>(levels - 1);
      u[i] = box.lo[i] + s * (box.hi[i] - box.lo[i]);
    }
    visit(u);
    std::size_t d = 0;
    while (d < idx.size() && ++idx[d] == levels) idx[d++] = 0;
    if (d == idx.size()) break;
  }
}

}  // namespace

ReactionReport validate_reaction(const Reaction& f, std::size_t nodes, const TimeGrid& grid, const StateBox& box,
                                 std::size_t levels) {
  const auto m = static_cast<Eigen::Index>(f.components());
  if (box.lo.size() != m) throw ConfigError("validate_reaction: box dimension != component count");
  ReactionReport rep;
  rep.min_offdiagonal_jacobian = m > 1 ? std::numeric_limits<double>::infinity() : 0.0;
  Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nodes), m), out;
  std::vector<bool> node_time_irreducible(nodes * grid.steps(), true);
  for (std::size_t k = 0; k < grid.steps(); ++k) {
    const double t = grid.time(k);
    f.evaluate(t, zero, out);
    rep.max_abs_f_at_zero = std::max(rep.max_abs_f_at_zero, out.cwiseAbs().maxCoeff());
  }
  for_each_lattice_point(box, levels, [&](const Eigen::VectorXd& u) {
    for (std::size_t k = 0; k < grid.steps(); ++k) {
      for (std::size_t a = 0; a < nodes; ++a) {
        const Eigen::MatrixXd j = f.jacobian(a, grid.time(k), u);
        for (Eigen::Index i = 0; i < m; ++i)
          for (Eigen::Index q = 0; q < m; ++q)
            if (i != q) rep.min_offdiagonal_jacobian = std::min(rep.min_offdiagonal_jacobian, j(i, q));
        if (!is_irreducible(j)) node_time_irreducible[k * nodes + a] = false;
      }
    }
  });
  rep.vanishes_at_zero = rep.max_abs_f_at_zero <= 1e-14;
  rep.cooperative = rep.min_offdiagonal_jacobian >= 0.0;
  rep.irreducible_somewhere = false;
  for (bool b : node_time_irreducible) rep.irreducible_somewhere = rep.irreducible_somewhere || b;
  return rep;
}

std::string to_string(Subhomogeneity s) {
  switch (s) {
    case Subhomogeneity::none: return "none";
    case Subhomogeneity::sub: return "subhomogeneous";
    case Subhomogeneity::strict: return "strictly subhomogeneous";
    case Subhomogeneity::strong: return "strongly subhomogeneous";
  }
  return "none";
}

SubhomogeneityReport validate_subhomogeneity(const Reaction& f, std::size_t nodes, const TimeGrid& grid,
                                             const StateBox& box, const std::vector<double>& rhos,
                                             std::size_t levels) {
  const auto m = static_cast<Eigen::Index>(f.components());
  if (box.lo.size() != m) throw ConfigError("validate_subhomogeneity: box dimension != component count");
  for (Eigen::Index i = 0; i < m; ++i)
    if (!(box.lo[i] > 0.0)) throw ConfigError("validate_subhomogeneity: box must lie in the open positive orthant");
  if (rhos.empty()) throw ConfigError("validate_subhomogeneity: no rho samples");
  for (double r : rhos)
    if (!(r > 0.0 && r < 1.0)) throw ConfigError("validate_subhomogeneity: rho must lie in (0,1)");

  SubhomogeneityReport rep;
  rep.min_gap = std::numeric_limits<double>::infinity();
  rep.min_gap_per_component = Eigen::VectorXd::Constant(m, std::numeric_limits<double>::infinity());
  bool all_sub = true, all_strict = true, all_strong = true;
  const auto n = static_cast<Eigen::Index>(nodes);
  Eigen::MatrixXd u(n, m), fu, fru;
  for_each_lattice_point(box, levels, [&](const Eigen::VectorXd& level) {
    for (Eigen::Index a = 0; a < n; ++a) u.row(a) = level.transpose();
    for (std::size_t k = 0; k < grid.steps(); ++k) {
      const double t = grid.time(k);
      f.evaluate(t, u, fu);
      for (double rho : rhos) {
        f.evaluate(t, rho * u, fru);
        for (Eigen::Index a = 0; a < n; ++a) {
          bool any_positive = false;
          for (Eigen::Index i = 0; i < m; ++i) {
            const double gap = fru(a, i) - rho * fu(a, i);
            const double zero_tol = 1e-13 * (1.0 + std::abs(fru(a, i)) + std::abs(fu(a, i)));
            rep.min_gap = std::min(rep.min_gap, gap);
            rep.min_gap_per_component[i] = std::min(rep.min_gap_per_component[i], gap);
            if (gap < -zero_tol) all_sub = false;
            if (gap > zero_tol)
              any_positive = true;
            else
              all_strong = false;
          }
          if (!any_positive) all_strict = false;
          ++rep.samples;
        }
      }
    }
  });
  if (!all_sub)
    rep.classification = Subhomogeneity::none;
  else if (all_strong)
    rep.classification = Subhomogeneity::strong;
  else if (all_strict)
    rep.classification = Subhomogeneity::strict;
  else
    rep.classification = Subhomogeneity::sub;
  return rep;
}

}  // namespace nlgpe
