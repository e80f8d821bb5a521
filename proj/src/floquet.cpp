#include "nlgpe/floquet.hpp"

#include "nlgpe/error.hpp"
#include "nlgpe/parallel.hpp"

#include <cmath>
#include <sstream>

namespace nlgpe {

namespace {

std::size_t substep_count(const PeriodicMatrixField& field, std::size_t node, const TimeGrid& grid,
                          const FloquetOptions& opt) {
  if (opt.substeps > 0) return opt.substeps;
  const double norm = field.node_norm(node, grid);
  const double per_grid = std::ceil(norm * grid.dt() / opt.substep_rule);
  return grid.steps() * static_cast<std::size_t>(std::max(1.0, per_grid));
}

}  // namespace

Eigen::MatrixXd monodromy(const PeriodicMatrixField& field, std::size_t node, const TimeGrid& grid,
                          const FloquetOptions& options, std::vector<std::string>* diagnostics) {
  const auto m = static_cast<Eigen::Index>(field.components());
  const std::size_t n = substep_count(field, node, grid, options);
  const double h = grid.period() / static_cast<double>(n);

  auto coeff = [&](double t) {
    Eigen::MatrixXd l = field.at(node, t);
    if (!l.allFinite())
      throw NumericalError("monodromy: non-finite coefficient at node " + std::to_string(node) +
                           ", t = " + std::to_string(t));
    return l;
  };

  Eigen::MatrixXd y = Eigen::MatrixXd::Identity(m, m);
  Eigen::MatrixXd l0 = coeff(0.0);
  for (std::size_t s = 0; s < n; ++s) {
    const double t = static_cast<double>(s) * h;
    const Eigen::MatrixXd lh = coeff(t + 0.5 * h);
    const Eigen::MatrixXd l1 = coeff(t + h);
    const Eigen::MatrixXd k1 = l0 * y;
    const Eigen::MatrixXd k2 = lh * (y + 0.5 * h * k1);
    const Eigen::MatrixXd k3 = lh * (y + 0.5 * h * k2);
    const Eigen::MatrixXd k4 = l1 * (y + h * k3);
    y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    l0 = l1;
  }

  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index k = 0; k < m; ++k) {
      if (y(i, k) < -1e-12 && diagnostics) {
        std::ostringstream os;
        os << "monodromy: negative entry " << y(i, k) << " at node " << node << " (" << i << "," << k << ")";
        diagnostics->push_back(os.str());
      } else if (y(i, k) < 0.0 && y(i, k) >= -1e-12) {
        y(i, k) = 0.0;
      }
    }
  }
  return y;
}

MonodromyResult theta_field(const PeriodicMatrixField& field, const SpatialMesh& mesh, const TimeGrid& grid,
                            const FloquetOptions& options) {
  const std::size_t n = mesh.size();
  if (field.nodes() != n) throw ConfigError("theta_field: field and mesh node counts differ");
  MonodromyResult res;
  res.period = grid.period();
  res.monodromy.resize(n);
  res.theta.resize(static_cast<Eigen::Index>(n));
  res.floored.assign(n, false);
  res.perron_warning.assign(n, false);
  std::vector<std::vector<std::string>> diag(n);
  std::vector<char> floored(n, 0), warn(n, 0);

  const double floor_value = std::log(1e-300) / grid.period();
  parallel_for(n, [&](std::size_t a) {
    try {
      res.monodromy[a] = monodromy(field, a, grid, options, &diag[a]);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " [node " + std::to_string(a) + "]");
    }
    const Eigen::MatrixXd& g = res.monodromy[a];
    double rho = 0.0;
    if (g.rows() == 1) {
      rho = std::abs(g(0, 0));
    } else {
      Eigen::EigenSolver<Eigen::MatrixXd> es(g, false);
      const auto ev = es.eigenvalues();
      Eigen::Index best = 0;
      for (Eigen::Index i = 1; i < ev.size(); ++i)
        if (std::abs(ev[i]) > std::abs(ev[best])) best = i;
      rho = std::abs(ev[best]);
      if (std::abs(ev[best].imag()) > 1e-8 * std::max(1.0, rho)) warn[a] = 1;
    }
    if (rho < 1e-300) {
      floored[a] = 1;
      res.theta[static_cast<Eigen::Index>(a)] = floor_value;
    } else {
      res.theta[static_cast<Eigen::Index>(a)] = std::log(rho) / grid.period();
    }
  });

  for (std::size_t a = 0; a < n; ++a) {
    res.floored[a] = floored[a] != 0;
    res.perron_warning[a] = warn[a] != 0;
    for (auto& d : diag[a]) res.diagnostics.push_back(std::move(d));
    if (warn[a]) res.diagnostics.push_back("theta: complex dominant Floquet multiplier at node " + std::to_string(a));
  }
  Eigen::Index arg = 0;
  res.theta_max = res.theta.maxCoeff(&arg);
  res.theta_min = res.theta.minCoeff();
  res.argmax = static_cast<std::size_t>(arg);
  return res;
}

double essential_radius(const MonodromyResult& result) { return std::exp(result.theta_max * result.period); }

}  // namespace nlgpe
