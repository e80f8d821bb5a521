#include "nlgpe/config.hpp"

#include "nlgpe/error.hpp"
#include "nlgpe/expression.hpp"
#include "nlgpe/reaction.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace nlgpe {

using nlohmann::json;

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

Eigen::MatrixXd read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t", used) != std::string::npos) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;
      }
      throw IoError(path.string() + ": non-numeric row '" + line + "'");
    }
    first = false;
    if (!rows.empty() && row.size() != rows.front().size()) throw IoError(path.string() + ": ragged rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError(path.string() + ": no data");
  Eigen::MatrixXd m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

void write_csv(const std::filesystem::path& path, const Eigen::MatrixXd& data, const std::vector<std::string>& header) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  if (!header.empty()) out << '\n';
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.cols(); ++j) out << (j ? "," : "") << data(i, j);
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

namespace {

struct Ctx {
  std::filesystem::path base;
  std::map<std::string, double> constants;
  const SpatialMesh* mesh = nullptr;
  const TimeGrid* grid = nullptr;
};

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

const json& need(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) fail(where, std::string("missing '") + key + "'");
  return j.at(key);
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  return j.get<double>();
}

double get_or(const json& j, const char* key, double def, const std::string& where) {
  return j.contains(key) ? number(j.at(key), where + "." + key) : def;
}

std::size_t count_or(const json& j, const char* key, std::size_t def, const std::string& where) {
  if (!j.contains(key)) return def;
  const json& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) fail(where + "." + key, "expected a nonnegative integer");
  return v.get<std::size_t>();
}

void only_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : keys) ok = ok || it.key() == k;
    if (!ok) fail(where, "unknown key '" + it.key() + "'");
  }
}

Eigen::MatrixXd table_file(const json& j, const Ctx& c, const std::string& where) {
  if (!j.is_string()) fail(where, "expected a CSV path");
  return read_csv(c.base / j.get<std::string>());
}

PeriodicScalarField field(const json& j, const Ctx& c, const std::string& where) {
  if (j.is_number()) return PeriodicScalarField::constant(j.get<double>());
  if (!j.is_object() || j.size() != 1) fail(where, "a field is a number or one of {const}, {expr}, {table}");
  if (j.contains("const")) return PeriodicScalarField::constant(number(j.at("const"), where + ".const"));
  if (j.contains("expr")) {
    if (!j.at("expr").is_string()) fail(where + ".expr", "expected a string");
    try {
      return PeriodicScalarField::expression(Expression::parse(j.at("expr").get<std::string>(), c.constants), *c.mesh);
    } catch (const ConfigError& e) {
      fail(where + ".expr", e.what());
    }
  }
  if (j.contains("table")) {
    Eigen::MatrixXd t = table_file(j.at("table"), c, where + ".table");
    if (t.rows() != static_cast<Eigen::Index>(c.mesh->size()) ||
        t.cols() != static_cast<Eigen::Index>(c.grid->steps()))
      fail(where + ".table", "expected " + std::to_string(c.mesh->size()) + " x " + std::to_string(c.grid->steps()) +
                                   " samples, got " + std::to_string(t.rows()) + " x " + std::to_string(t.cols()));
    return PeriodicScalarField::table(std::move(t), c.grid->period());
  }
  fail(where, "unknown field form");
}

PeriodicMatrixField matrix_field(const json& j, std::size_t m, const Ctx& c, const std::string& where) {
  if (!j.is_array() || j.size() != m) fail(where, "expected " + std::to_string(m) + " rows");
  PeriodicMatrixField out(m, c.mesh->size());
  for (std::size_t i = 0; i < m; ++i) {
    if (!j[i].is_array() || j[i].size() != m) fail(where, "row " + std::to_string(i) + " needs " + std::to_string(m) + " entries");
    for (std::size_t k = 0; k < m; ++k)
      out(i, k) = field(j[i][k], c, where + "[" + std::to_string(i) + "][" + std::to_string(k) + "]");
  }
  return out;
}

KernelProfile kernel(const json& j, const Ctx& c, const std::string& where, TabulatedPolicy& policy) {
  only_keys(j, {"family", "width", "delta", "base", "table", "policy"}, where);
  if (!need(j, "family", where).is_string()) fail(where + ".family", "expected a string");
  const std::string fam = j.at("family").get<std::string>();
  if (fam == "gaussian") return KernelProfile::gaussian(number(need(j, "width", where), where + ".width"));
  if (fam == "tent") return KernelProfile::tent(number(need(j, "width", where), where + ".width"));
  if (fam == "rescaled") {
    const std::string base = j.value("base", std::string("tent"));
    BaseProfile b;
    if (base == "tent") b = BaseProfile::tent;
    else if (base == "epanechnikov") b = BaseProfile::epanechnikov;
    else fail(where + ".base", "unknown base profile '" + base + "'");
    return KernelProfile::rescaled(number(need(j, "delta", where), where + ".delta"), b);
  }
  if (fam == "tabulated") {
    const std::string p = j.value("policy", std::string("reject"));
    if (p == "reject") policy = TabulatedPolicy::reject;
    else if (p == "rescale") policy = TabulatedPolicy::rescale;
    else fail(where + ".policy", "expected reject or rescale");
    Eigen::MatrixXd t = table_file(need(j, "table", where), c, where + ".table");
    const auto n = static_cast<Eigen::Index>(c.mesh->size());
    if (t.rows() != n || t.cols() != n) fail(where + ".table", "expected an N x N table with N = " + std::to_string(n));
    return KernelProfile::tabulated(std::move(t));
  }
  fail(where + ".family", "unknown kernel family '" + fam + "'");
}

DispersalRecipe dispersal(const json& j, const Ctx& c, const std::string& where) {
  only_keys(j, {"kernel", "rate", "boundary"}, where);
  DispersalRecipe r;
  r.profile = kernel(need(j, "kernel", where), c, where + ".kernel", r.policy);
  r.rate = get_or(j, "rate", 1.0, where);
  if (!(r.rate > 0.0)) fail(where + ".rate", "must be positive");
  if (j.contains("boundary")) {
    if (!j.at("boundary").is_string()) fail(where + ".boundary", "expected a string");
    try {
      r.mode = boundary_mode_from_string(j.at("boundary").get<std::string>());
    } catch (const ConfigError& e) {
      fail(where + ".boundary", e.what());
    }
  }
  return r;
}

std::vector<DispersalRecipe> dispersal_list(const json& j, std::size_t m, const Ctx& c, const std::string& where) {
  std::vector<DispersalRecipe> out;
  if (j.is_object()) {
    out.assign(m, dispersal(j, c, where));
  } else if (j.is_array() && j.size() == m) {
    for (std::size_t i = 0; i < m; ++i) out.push_back(dispersal(j[i], c, where + "[" + std::to_string(i) + "]"));
  } else {
    fail(where, "expected one object or an array of " + std::to_string(m));
  }
  return out;
}

/// Initial data: one field form per component, evaluated at t = 0, or a CSV of N x m.
Eigen::MatrixXd initial_state(const json& j, std::size_t m, const Ctx& c, const std::string& where) {
  const std::size_t n = c.mesh->size();
  auto column = [&](const json& f, const std::string& w) -> Eigen::VectorXd {
    if (f.is_object() && f.size() == 1 && f.contains("csv")) {
      Eigen::MatrixXd t = table_file(f.at("csv"), c, w + ".csv");
      if (t.rows() != static_cast<Eigen::Index>(n) || t.cols() != 1) fail(w + ".csv", "expected N x 1 values");
      return t.col(0);
    }
    const PeriodicScalarField p = field(f, c, w);
    Eigen::VectorXd v(n);
    for (std::size_t a = 0; a < n; ++a) v[a] = p.at(a, 0.0);
    return v;
  };
  Eigen::MatrixXd u(n, m);
  if (j.is_object() && j.size() == 1 && j.contains("csv") && m > 1) {
    u = table_file(j.at("csv"), c, where + ".csv");
    if (u.rows() != static_cast<Eigen::Index>(n) || u.cols() != static_cast<Eigen::Index>(m))
      fail(where + ".csv", "expected N x m values");
  } else if (j.is_array()) {
    if (j.size() != m) fail(where, "expected " + std::to_string(m) + " component entries");
    for (std::size_t i = 0; i < m; ++i) u.col(i) = column(j[i], where + "[" + std::to_string(i) + "]");
  } else {
    const Eigen::VectorXd v = column(j, where);
    for (std::size_t i = 0; i < m; ++i) u.col(i) = v;
  }
  if (!u.allFinite() || u.minCoeff() < 0.0) fail(where, "initial data must be finite and nonnegative");
  return u;
}

void solver_section(const json& j, SolverSettings& s, const std::string& w) {
  only_keys(j, {"tol_lambda", "epsilon0", "max_halvings", "power_tol", "max_iter", "unperturbed_max_iter",
                "substep_rule", "substeps", "max_substeps", "periodic_tol", "max_sweeps", "upper_margin", "upper_level", "seed"},
            w);
  s.gpe.tol_lambda = get_or(j, "tol_lambda", s.gpe.tol_lambda, w);
  s.gpe.epsilon0 = get_or(j, "epsilon0", s.gpe.epsilon0, w);
  s.gpe.max_halvings = count_or(j, "max_halvings", s.gpe.max_halvings, w);
  s.gpe.power_tol = get_or(j, "power_tol", s.gpe.power_tol, w);
  s.gpe.max_iter = count_or(j, "max_iter", s.gpe.max_iter, w);
  s.gpe.unperturbed_max_iter = count_or(j, "unperturbed_max_iter", s.gpe.unperturbed_max_iter, w);
  s.step.substep_rule = get_or(j, "substep_rule", s.step.substep_rule, w);
  s.step.substeps_per_period = count_or(j, "substeps", s.step.substeps_per_period, w);
  s.step.max_substeps = count_or(j, "max_substeps", s.step.max_substeps, w);
  s.gpe.floquet.substep_rule = s.step.substep_rule;
  s.periodic_tol = get_or(j, "periodic_tol", s.periodic_tol, w);
  s.max_sweeps = count_or(j, "max_sweeps", s.max_sweeps, w);
  s.upper_margin = get_or(j, "upper_margin", s.upper_margin, w);
  s.upper_level = get_or(j, "upper_level", s.upper_level, w);
  s.seed = count_or(j, "seed", s.seed, w);
  if (!(s.gpe.tol_lambda > 0.0) || !(s.gpe.power_tol > 0.0) || !(s.periodic_tol > 0.0))
    fail(w, "tolerances must be positive");
  if (!(s.step.substep_rule > 0.0)) fail(w + ".substep_rule", "must be positive");
}

WnvCoefficients wnv_coefficients(const json& j, const Ctx& c, const std::string& w) {
  only_keys(j, {"a1", "a2", "b1", "b2", "c1", "c2", "mu1", "mu2", "gamma"}, w);
  auto f = [&](const char* k) { return field(need(j, k, w), c, w + "." + k); };
  return WnvCoefficients{f("a1"), f("a2"), f("b1"), f("b2"), f("c1"), f("c2"), f("mu1"), f("mu2"), f("gamma")};
}

}  // namespace

const SpatialMesh& RunConfig::need_mesh() const {
  if (!mesh) throw ConfigError("config: missing mesh section");
  return *mesh;
}

const TimeGrid& RunConfig::need_grid() const {
  if (!grid) throw ConfigError("config: missing time section");
  return *grid;
}

SystemRecipe RunConfig::linear_recipe() const {
  if (!coupling && !reaction) throw ConfigError("config: system needs a coupling or a reaction");
  return SystemRecipe{need_mesh(), need_grid(), dispersal, coupling ? *coupling : reaction->jacobian_at_zero(),
                      solver.step};
}

LinearSystem RunConfig::linear_system() const { return linear_recipe().build(); }

NonlinearSystem RunConfig::nonlinear_system() const {
  if (!reaction) throw ConfigError("config: system.reaction is required for this command");
  std::vector<DispersalOperator> ops;
  for (const auto& r : dispersal)
    ops.push_back(assemble_dispersal(normalize_kernel(r.profile, need_mesh(), r.policy), need_mesh(), r.rate, r.mode));
  return NonlinearSystem(std::move(ops), reaction, need_grid(), solver.step);
}

LogisticProblem RunConfig::logistic_problem() const {
  if (reaction_type != "logistic") throw ConfigError("config: system.reaction.type must be logistic");
  return LogisticProblem{need_mesh(), need_grid(), dispersal.front(), *growth, *crowding, solver.step};
}

LogisticOptions RunConfig::logistic_options() const {
  LogisticOptions o;
  o.gpe = solver.gpe;
  o.tol = solver.periodic_tol;
  o.max_sweeps = solver.max_sweeps;
  o.upper_margin = solver.upper_margin;
  return o;
}

RunConfig parse_config(const json& doc, const std::filesystem::path& base_dir, std::uint64_t hash) {
  RunConfig rc;
  rc.raw = doc;
  rc.base_dir = base_dir;
  rc.hash = hash;
  only_keys(doc, {"description", "constants", "mesh", "time", "system", "solver", "simulate", "wnv"}, "config");

  Ctx c;
  c.base = base_dir;
  if (doc.contains("constants")) {
    const json& k = doc.at("constants");
    if (!k.is_object()) fail("constants", "expected an object");
    for (auto it = k.begin(); it != k.end(); ++it) c.constants[it.key()] = number(it.value(), "constants." + it.key());
  }

  const json& m = need(doc, "mesh", "config");
  only_keys(m, {"dimension", "bounds", "resolution"}, "mesh");
  const int dim = static_cast<int>(count_or(m, "dimension", 1, "mesh"));
  if (dim != 1 && dim != 2) fail("mesh.dimension", "must be 1 or 2");
  const json& bounds = need(m, "bounds", "mesh");
  const json& res = need(m, "resolution", "mesh");
  if (!bounds.is_array() || bounds.size() != static_cast<std::size_t>(dim) || !res.is_array() ||
      res.size() != static_cast<std::size_t>(dim))
    fail("mesh", "bounds and resolution need one entry per axis");
  Box box;
  std::vector<std::size_t> resolution;
  for (int a = 0; a < dim; ++a) {
    const json& b = bounds[a];
    if (!b.is_array() || b.size() != 2) fail("mesh.bounds", "each axis is [lo, hi]");
    box.axes.push_back({number(b[0], "mesh.bounds"), number(b[1], "mesh.bounds")});
    if (!res[a].is_number_integer() || res[a].get<long long>() < 1) fail("mesh.resolution", "positive integers");
    resolution.push_back(res[a].get<std::size_t>());
  }
  try {
    rc.mesh.emplace(build_mesh(dim, box, resolution));
  } catch (const ConfigError& e) {
    fail("mesh", e.what());
  }
  c.mesh = &*rc.mesh;

  const json& t = need(doc, "time", "config");
  only_keys(t, {"period", "steps"}, "time");
  try {
    rc.grid.emplace(get_or(t, "period", 1.0, "time"), count_or(t, "steps", 32, "time"));
  } catch (const ConfigError& e) {
    fail("time", e.what());
  }
  c.grid = &*rc.grid;

  if (doc.contains("solver")) solver_section(doc.at("solver"), rc.solver, "solver");

  if (doc.contains("system")) {
    const json& s = doc.at("system");
    only_keys(s, {"components", "dispersal", "coupling", "reaction"}, "system");
    rc.components = count_or(s, "components", 1, "system");
    if (rc.components < 1) fail("system.components", "must be at least 1");
    rc.dispersal = dispersal_list(need(s, "dispersal", "system"), rc.components, c, "system.dispersal");
    if (s.contains("coupling")) rc.coupling = matrix_field(s.at("coupling"), rc.components, c, "system.coupling");
    if (s.contains("reaction")) {
      const json& r = s.at("reaction");
      if (!need(r, "type", "system.reaction").is_string()) fail("system.reaction.type", "expected a string");
      rc.reaction_type = r.at("type").get<std::string>();
      if (rc.reaction_type == "logistic") {
        only_keys(r, {"type", "growth", "crowding"}, "system.reaction");
        if (rc.components != 1) fail("system.reaction", "logistic needs components = 1");
        rc.growth = field(need(r, "growth", "system.reaction"), c, "system.reaction.growth");
        rc.crowding = field(need(r, "crowding", "system.reaction"), c, "system.reaction.crowding");
        rc.reaction = std::make_shared<LogisticReaction>(*rc.growth, *rc.crowding, rc.mesh->size());
      } else if (rc.reaction_type == "quadratic") {
        only_keys(r, {"type", "linear", "quadratic"}, "system.reaction");
        PeriodicMatrixField lin = matrix_field(need(r, "linear", "system.reaction"), rc.components, c,
                                               "system.reaction.linear");
        PeriodicMatrixField quad = matrix_field(need(r, "quadratic", "system.reaction"), rc.components, c,
                                                "system.reaction.quadratic");
        rc.reaction = std::make_shared<QuadraticReaction>(std::move(lin), std::move(quad));
      } else {
        fail("system.reaction.type", "expected logistic or quadratic, got '" + rc.reaction_type + "'");
      }
    }
  }

  if (doc.contains("simulate")) {
    const json& s = doc.at("simulate");
    only_keys(s, {"initial", "periods", "stride", "pass_tol"}, "simulate");
    if (rc.components == 0) fail("simulate", "needs a system section");
    if (s.contains("initial")) {
      const json& init = s.at("initial");
      if (init.is_object() && init.contains("runs")) {
        const json& runs = init.at("runs");
        if (!runs.is_array() || runs.empty()) fail("simulate.initial.runs", "expected a nonempty array");
        for (std::size_t i = 0; i < runs.size(); ++i)
          rc.simulate.initial.push_back(
              initial_state(runs[i], rc.components, c, "simulate.initial.runs[" + std::to_string(i) + "]"));
      } else {
        rc.simulate.initial.push_back(initial_state(init, rc.components, c, "simulate.initial"));
      }
    }
    rc.simulate.periods = count_or(s, "periods", rc.simulate.periods, "simulate");
    rc.simulate.stride = std::max<std::size_t>(1, count_or(s, "stride", rc.simulate.stride, "simulate"));
    rc.simulate.pass_tol = get_or(s, "pass_tol", rc.simulate.pass_tol, "simulate");
  }

  if (doc.contains("wnv")) {
    const json& w = doc.at("wnv");
    only_keys(w, {"coefficients", "host", "vector", "initial", "sigma", "periods", "pass_tol", "zero_tol",
                  "logistic_tol", "reduced_tol"},
              "wnv");
    WnvConfig wc{*rc.mesh,
                 *rc.grid,
                 dispersal(need(w, "host", "wnv"), c, "wnv.host"),
                 dispersal(need(w, "vector", "wnv"), c, "wnv.vector"),
                 wnv_coefficients(need(w, "coefficients", "wnv"), c, "wnv.coefficients"),
                 initial_state(need(w, "initial", "wnv"), 4, c, "wnv.initial"),
                 rc.solver.step};
    try {
      validate_wnv(wc);
    } catch (const ConfigError& e) {
      fail("wnv", e.what());
    }
    rc.wnv.emplace(std::move(wc));
    auto& ws = rc.wnv_settings;
    ws.sigma = get_or(w, "sigma", 0.0, "wnv");
    ws.verify.periods = count_or(w, "periods", ws.verify.periods, "wnv");
    ws.verify.pass_tol = get_or(w, "pass_tol", ws.verify.pass_tol, "wnv");
    ws.verify.zero_tol = get_or(w, "zero_tol", ws.verify.zero_tol, "wnv");
    ws.options.gpe = rc.solver.gpe;
    ws.options.logistic_tol = get_or(w, "logistic_tol", ws.options.logistic_tol, "wnv");
    ws.options.reduced_tol = get_or(w, "reduced_tol", ws.options.reduced_tol, "wnv");
    ws.options.max_sweeps = std::max(ws.options.max_sweeps, rc.solver.max_sweeps);
    ws.options.upper_margin = rc.solver.upper_margin;
  }
  return rc;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(doc, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path(), fnv1a(text));
}

}  // namespace nlgpe
