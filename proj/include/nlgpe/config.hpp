#pragma once

#include "nlgpe/evolution.hpp"
#include "nlgpe/fields.hpp"
#include "nlgpe/gpe.hpp"
#include "nlgpe/mesh.hpp"
#include "nlgpe/spectral.hpp"
#include "nlgpe/wnv.hpp"

#include <json.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nlgpe {

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& bytes);
std::string hex64(std::uint64_t v);

/// Comma-separated numbers, one row per line. Lines starting with '#' and a
/// non-numeric first line are skipped. Throws IoError.
Eigen::MatrixXd read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const Eigen::MatrixXd& data,
               const std::vector<std::string>& header = {});

struct SolverSettings {
  GpeOptions gpe;
  StepOptions step;
  double periodic_tol = 1e-6;
  std::size_t max_sweeps = 5000;
  double upper_margin = 0.1;
  /// Constant upper level for periodic-solve with a non-logistic reaction.
  double upper_level = 0.0;
  std::uint64_t seed = 0;
};

struct SimulateSettings {
  /// N x m initial states; several are used by classify as separate runs.
  std::vector<Eigen::MatrixXd> initial;
  std::size_t periods = 50;
  std::size_t stride = 1;
  double pass_tol = 1e-4;
};

struct WnvSettings {
  double sigma = 0.0;
  WnvVerifyOptions verify;
  WnvOptions options;
};

/// Parsed run configuration. The mesh and grid are optional only because
/// selftest runs without a file.
struct RunConfig {
  nlohmann::json raw;
  std::filesystem::path base_dir;
  std::uint64_t hash = 0;

  std::optional<SpatialMesh> mesh;
  std::optional<TimeGrid> grid;
  std::size_t components = 0;
  std::vector<DispersalRecipe> dispersal;
  /// Reaction-part coupling b_ik (removal not included).
  std::optional<PeriodicMatrixField> coupling;
  std::string reaction_type = "none";  ///< none, logistic, quadratic
  ReactionPtr reaction;
  std::optional<PeriodicScalarField> growth;
  std::optional<PeriodicScalarField> crowding;

  SolverSettings solver;
  SimulateSettings simulate;
  std::optional<WnvConfig> wnv;
  WnvSettings wnv_settings;

  const SpatialMesh& need_mesh() const;
  const TimeGrid& need_grid() const;
  /// From the coupling section, or the reaction's Jacobian at zero.
  SystemRecipe linear_recipe() const;
  LinearSystem linear_system() const;
  NonlinearSystem nonlinear_system() const;
  LogisticProblem logistic_problem() const;
  LogisticOptions logistic_options() const;
};

/// Throws ConfigError on schema violations and IoError on unreadable tables.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = ".",
                       std::uint64_t hash = 0);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace nlgpe
