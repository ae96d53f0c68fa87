#pragma once

// Scenario configuration (JSON), single runs, ensembles and their on-disk
// outputs: events.json, timeseries.csv / timeseries.json, summary.json.

#include "catnet/cascade.hpp"
#include "catnet/copula.hpp"
#include "catnet/json_io.hpp"

#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

namespace catnet {

inline constexpr int config_schema_version = 1;

/// Schema violation; field() is the dotted path of the offending entry.
class ConfigError : public std::runtime_error {
public:
  ConfigError(std::string field, const std::string &message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
  const std::string &field() const { return field_; }

private:
  std::string field_;
};

struct SystemConfig {
  std::vector<std::string> sectors;
  double epsilon = 0.0;
  std::vector<std::vector<double>> lambda;

  friend bool operator==(const SystemConfig &, const SystemConfig &) = default;
};

struct PathConfig {
  std::string type; // "ramp" or "diffusion"
  std::vector<double> alpha_start, alpha_end;     // ramp
  std::vector<double> drift;                      // diffusion
  std::vector<std::vector<double>> covariance;    // diffusion
  double ellipticity_floor = default_ellipticity_floor;
  double horizon = 1.0;
  double dt = 1e-3;

  friend bool operator==(const PathConfig &, const PathConfig &) = default;
};

struct HypothesisFlags {
  bool nontrivial_coupling = false; // eps > 0 and some lambda_ij != 0
  bool elliptic_noise = false;      // diffusion with covariance >= floor > 0

  friend bool operator==(const HypothesisFlags &, const HypothesisFlags &) = default;
};

struct ScenarioConfig {
  int schema_version = config_schema_version;
  std::string name;
  SystemConfig system;
  PathConfig path;
  std::vector<double> alpha0;
  std::string initial_state = "relax-from-origin"; // or "x0"
  std::vector<double> x0;
  // cascade
  double tau_sync = 0.05; // default 0.05 * horizon
  std::string threshold_kind = "count"; // or "phi"
  int threshold_count = 2;
  double threshold_phi = 0.5;
  double angle_max = 10.0;
  double box_lo = -5.0, box_hi = 5.0;
  double escape_radius = 1e3;
  // ensemble
  int replicates = 1;
  std::uint64_t base_seed = 0;
  bool replicate_logs = false;
  double max_abort_fraction = 0.5;
  double co_event_margin = 0.0; // required gap of coupled over uncoupled co-event rate
  // structural stability experiment
  double stability_eta = 1e-3;
  int stability_trials = 100;
  std::uint64_t stability_seed = 0;
  // output
  std::string out_dir = "out";

  // derived at load time
  HypothesisFlags hypotheses;
  std::vector<std::string> warnings;

  friend bool operator==(const ScenarioConfig &, const ScenarioConfig &) = default;
};

namespace detail {

class FieldReader {
public:
  FieldReader(json j, std::string path) : j_(std::move(j)), path_(std::move(path)) {
    if (!j_.is_object())
      throw ConfigError(path_.empty() ? "<root>" : path_, "must be an object");
  }

  std::string field(const std::string &key) const {
    return path_.empty() ? key : path_ + "." + key;
  }
  bool has(const std::string &key) const { return j_.contains(key); }
  void mark(const std::string &key) const { seen_.push_back(key); }
  const json &at(const std::string &key) const {
    seen_.push_back(key);
    if (!j_.contains(key))
      throw ConfigError(field(key), "required field is missing");
    return j_.at(key);
  }
  FieldReader object(const std::string &key) const { return FieldReader(at(key), field(key)); }

  double number(const std::string &key) const { return as_number(at(key), field(key)); }
  double number(const std::string &key, double fallback) const {
    return has(key) ? number(key) : (seen_.push_back(key), fallback);
  }
  int integer(const std::string &key, int fallback) const {
    if (!has(key)) {
      seen_.push_back(key);
      return fallback;
    }
    const json &v = at(key);
    if (!v.is_number_integer())
      throw ConfigError(field(key), "must be an integer");
    return v.get<int>();
  }
  std::uint64_t seed(const std::string &key, std::uint64_t fallback) const {
    if (!has(key)) {
      seen_.push_back(key);
      return fallback;
    }
    const json &v = at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      throw ConfigError(field(key), "must be a non-negative integer");
    return v.get<std::uint64_t>();
  }
  bool boolean(const std::string &key, bool fallback) const {
    if (!has(key)) {
      seen_.push_back(key);
      return fallback;
    }
    const json &v = at(key);
    if (!v.is_boolean())
      throw ConfigError(field(key), "must be true or false");
    return v.get<bool>();
  }
  std::string string(const std::string &key, const std::string &fallback) const {
    if (!has(key)) {
      seen_.push_back(key);
      return fallback;
    }
    const json &v = at(key);
    if (!v.is_string())
      throw ConfigError(field(key), "must be a string");
    return v.get<std::string>();
  }
  std::vector<double> vector(const std::string &key) const {
    const json &v = at(key);
    if (!v.is_array())
      throw ConfigError(field(key), "must be an array of numbers");
    std::vector<double> out;
    for (std::size_t q = 0; q < v.size(); ++q)
      out.push_back(as_number(v[q], field(key) + "[" + std::to_string(q) + "]"));
    return out;
  }
  std::vector<std::vector<double>> matrix(const std::string &key) const {
    const json &v = at(key);
    if (!v.is_array())
      throw ConfigError(field(key), "must be an array of rows");
    std::vector<std::vector<double>> out;
    for (std::size_t r = 0; r < v.size(); ++r) {
      const std::string f = field(key) + "[" + std::to_string(r) + "]";
      if (!v[r].is_array())
        throw ConfigError(f, "must be an array of numbers");
      std::vector<double> row;
      for (std::size_t c = 0; c < v[r].size(); ++c)
        row.push_back(as_number(v[r][c], f + "[" + std::to_string(c) + "]"));
      out.push_back(std::move(row));
    }
    return out;
  }

  /// Reject keys that were never read (typos would otherwise be ignored).
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end())
        throw ConfigError(field(it.key()), "unknown field");
  }

private:
  static double as_number(const json &v, const std::string &f) {
    if (!v.is_number())
      throw ConfigError(f, "must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d))
      throw ConfigError(f, "must be finite");
    return d;
  }

  json j_;
  std::string path_;
  mutable std::vector<std::string> seen_;
};

inline Matrix to_matrix(const std::vector<std::vector<double>> &rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()),
           rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return m;
}

inline Vector to_vector(const std::vector<double> &v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline void require_square(const std::vector<std::vector<double>> &m, std::size_t size,
                           const std::string &field) {
  if (m.size() != size)
    throw ConfigError(field, "must be a " + std::to_string(size) + "x" + std::to_string(size) +
                                 " matrix");
  for (const auto &row : m)
    if (row.size() != size)
      throw ConfigError(field, "must be a " + std::to_string(size) + "x" +
                                   std::to_string(size) + " matrix");
}

} // namespace detail

inline NetworkSystem make_system(const ScenarioConfig &c) {
  std::vector<NormalForm> forms;
  for (const auto &s : c.system.sectors)
    forms.push_back(NormalForm{*kind_from_string(s)});
  return NetworkSystem(std::move(forms),
                       CouplingSpec{c.system.epsilon, detail::to_matrix(c.system.lambda)});
}

/// Path for one realization; `seed` only matters for diffusions.
inline ControlPathSpec make_path_spec(const ScenarioConfig &c, std::uint64_t seed) {
  if (c.path.type == "ramp")
    return ControlPathSpec::ramp(detail::to_vector(c.path.alpha_start),
                                 detail::to_vector(c.path.alpha_end), c.path.horizon, c.path.dt);
  return ControlPathSpec::diffusion(detail::to_vector(c.path.drift),
                                    detail::to_matrix(c.path.covariance), c.path.horizon,
                                    c.path.dt, seed, c.path.ellipticity_floor);
}

inline CascadeOptions make_cascade_options(const ScenarioConfig &c) {
  CascadeOptions o;
  o.tau_sync = c.tau_sync;
  o.threshold = c.threshold_kind == "phi" ? Threshold::phi(c.threshold_phi)
                                          : Threshold::at_least(c.threshold_count);
  o.angle_max = c.angle_max;
  o.box = SearchBox{c.box_lo, c.box_hi};
  o.relax.escape_radius = c.escape_radius;
  return o;
}

inline Vector initial_state(const ScenarioConfig &c, const NetworkSystem &sys) {
  return c.initial_state == "x0" ? detail::to_vector(c.x0) : Vector(Vector::Zero(sys.n()));
}

/// Validate a parsed config, fill defaults and compute hypothesis flags.
inline ScenarioConfig parse_config(const json &root) {
  using detail::FieldReader;
  ScenarioConfig c;
  const FieldReader r(root, "");
  c.schema_version = r.integer("schema_version", -1);
  if (c.schema_version != config_schema_version)
    throw ConfigError("schema_version", "must be " + std::to_string(config_schema_version));
  c.name = r.string("name", "");

  {
    const FieldReader s = r.object("system");
    const json &sectors = s.at("sectors");
    if (!sectors.is_array() || sectors.empty())
      throw ConfigError("system.sectors", "must be a nonempty array of catastrophe names");
    for (std::size_t q = 0; q < sectors.size(); ++q) {
      const std::string f = "system.sectors[" + std::to_string(q) + "]";
      if (!sectors[q].is_string() || !kind_from_string(sectors[q].get<std::string>()))
        throw ConfigError(f, "must be one of fold, cusp, swallowtail, butterfly, "
                             "elliptic_umbilic, hyperbolic_umbilic, parabolic_umbilic");
      c.system.sectors.push_back(sectors[q].get<std::string>());
    }
    const std::size_t k = c.system.sectors.size();
    if (s.has("coupling")) {
      const FieldReader cp = s.object("coupling");
      c.system.epsilon = cp.number("epsilon", 0.0);
      if (c.system.epsilon < 0.0)
        throw ConfigError("system.coupling.epsilon", "must be >= 0");
      if (cp.has("lambda")) {
        c.system.lambda = cp.matrix("lambda");
        detail::require_square(c.system.lambda, k, "system.coupling.lambda");
        for (std::size_t i = 0; i < k; ++i) {
          if (c.system.lambda[i][i] != 0.0)
            throw ConfigError("system.coupling.lambda", "diagonal must be zero");
          for (std::size_t j = 0; j < k; ++j)
            if (c.system.lambda[i][j] != c.system.lambda[j][i])
              throw ConfigError("system.coupling.lambda", "must be symmetric");
        }
      } else {
        cp.mark("lambda");
        c.system.lambda.assign(k, std::vector<double>(k, 0.0));
      }
      cp.finish();
    } else {
      s.mark("coupling");
      c.system.lambda.assign(k, std::vector<double>(k, 0.0));
    }
    s.finish();
  }
  const NetworkSystem sys = make_system(c);
  const auto p = static_cast<std::size_t>(sys.p());
  const auto n = static_cast<std::size_t>(sys.n());

  {
    const FieldReader cp = r.object("control_path");
    c.path.type = cp.string("type", "");
    c.path.horizon = cp.number("horizon");
    c.path.dt = cp.number("dt");
    if (!(c.path.horizon > 0.0))
      throw ConfigError("control_path.horizon", "must be > 0");
    if (!(c.path.dt > 0.0 && c.path.dt < c.path.horizon))
      throw ConfigError("control_path.dt", "must satisfy 0 < dt < horizon");
    if (c.path.type == "ramp") {
      c.path.alpha_start = cp.vector("alpha_start");
      c.path.alpha_end = cp.vector("alpha_end");
      if (c.path.alpha_start.size() != p)
        throw ConfigError("control_path.alpha_start", "must have " + std::to_string(p) + " entries");
      if (c.path.alpha_end.size() != p)
        throw ConfigError("control_path.alpha_end", "must have " + std::to_string(p) + " entries");
    } else if (c.path.type == "diffusion") {
      c.path.drift = cp.has("drift") ? cp.vector("drift") : std::vector<double>(p, 0.0);
      if (c.path.drift.size() != p)
        throw ConfigError("control_path.drift", "must have " + std::to_string(p) + " entries");
      c.path.covariance = cp.matrix("covariance");
      detail::require_square(c.path.covariance, p, "control_path.covariance");
      c.path.ellipticity_floor = cp.number("ellipticity_floor", default_ellipticity_floor);
      if (!(c.path.ellipticity_floor > 0.0))
        throw ConfigError("control_path.ellipticity_floor", "must be > 0");
      const Matrix cov = detail::to_matrix(c.path.covariance);
      if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw ConfigError("control_path.covariance", "must be symmetric");
      if (!ellipticity_check(cov, c.path.ellipticity_floor))
        throw ConfigError("control_path.covariance",
                          "not uniformly elliptic: smallest eigenvalue below the floor " +
                              format_double(c.path.ellipticity_floor) +
                              " (the ellipticity hypothesis on control noise fails)");
    } else {
      throw ConfigError("control_path.type", "must be \"ramp\" or \"diffusion\"");
    }
    cp.finish();
  }

  if (c.path.type == "ramp") {
    c.alpha0 = r.has("alpha0") ? r.vector("alpha0") : c.path.alpha_start;
    r.mark("alpha0");
  } else {
    c.alpha0 = r.has("alpha0") ? r.vector("alpha0") : std::vector<double>(p, 0.0);
    r.mark("alpha0");
  }
  if (c.alpha0.size() != p)
    throw ConfigError("alpha0", "must have " + std::to_string(p) + " entries");

  {
    const FieldReader cs = r.has("cascade") ? r.object("cascade") : FieldReader(json::object(), "cascade");
    c.tau_sync = cs.number("tau_sync", 0.05 * c.path.horizon);
    if (!(c.tau_sync > 0.0))
      throw ConfigError("cascade.tau_sync", "must be > 0");
    if (cs.has("threshold")) {
      const FieldReader th = cs.object("threshold");
      if (th.has("count") == th.has("phi"))
        throw ConfigError("cascade.threshold", "give exactly one of \"count\" or \"phi\"");
      if (th.has("count")) {
        c.threshold_kind = "count";
        c.threshold_count = th.integer("count", 2);
        if (c.threshold_count < 1 || c.threshold_count > sys.k())
          throw ConfigError("cascade.threshold.count", "must lie in [1, k]");
      } else {
        c.threshold_kind = "phi";
        c.threshold_phi = th.number("phi");
        if (!(c.threshold_phi > 0.0 && c.threshold_phi <= 1.0))
          throw ConfigError("cascade.threshold.phi", "must lie in (0, 1]");
      }
      th.finish();
    } else {
      cs.mark("threshold");
      c.threshold_count = std::min(2, sys.k());
    }
    c.angle_max = cs.number("angle_max", c.angle_max);
    if (!(c.angle_max >= 0.0 && c.angle_max <= 90.0))
      throw ConfigError("cascade.angle_max", "must lie in [0, 90] degrees");
    if (cs.has("box")) {
      const FieldReader b = cs.object("box");
      c.box_lo = b.number("lo", c.box_lo);
      c.box_hi = b.number("hi", c.box_hi);
      if (!(c.box_lo < c.box_hi))
        throw ConfigError("cascade.box", "need lo < hi");
      b.finish();
    } else {
      cs.mark("box");
    }
    c.escape_radius = cs.number("escape_radius", c.escape_radius);
    if (!(c.escape_radius > 0.0))
      throw ConfigError("cascade.escape_radius", "must be > 0");
    cs.finish();
  }

  {
    const json &st = r.has("initial_state") ? r.at("initial_state") : json("relax-from-origin");
    if (!r.has("initial_state"))
      r.mark("initial_state");
    if (st.is_string()) {
      if (st.get<std::string>() != "relax-from-origin")
        throw ConfigError("initial_state", "must be \"relax-from-origin\" or {\"x0\": [...]}");
      c.initial_state = "relax-from-origin";
    } else {
      const detail::FieldReader xs(st, "initial_state");
      c.initial_state = "x0";
      c.x0 = xs.vector("x0");
      xs.finish();
      if (c.x0.size() != n)
        throw ConfigError("initial_state.x0", "must have " + std::to_string(n) + " entries");
      if (!SearchBox{c.box_lo, c.box_hi}.contains(detail::to_vector(c.x0)))
        throw ConfigError("initial_state.x0", "lies outside the search box");
    }
  }

  {
    const FieldReader e = r.has("ensemble") ? r.object("ensemble") : FieldReader(json::object(), "ensemble");
    c.replicates = e.integer("replicates", c.replicates);
    if (c.replicates < 1)
      throw ConfigError("ensemble.replicates", "must be >= 1");
    c.base_seed = e.seed("base_seed", c.base_seed);
    c.replicate_logs = e.boolean("replicate_logs", c.replicate_logs);
    c.max_abort_fraction = e.number("max_abort_fraction", c.max_abort_fraction);
    if (!(c.max_abort_fraction >= 0.0 && c.max_abort_fraction <= 1.0))
      throw ConfigError("ensemble.max_abort_fraction", "must lie in [0, 1]");
    c.co_event_margin = e.number("co_event_margin", c.co_event_margin);
    if (!(c.co_event_margin >= 0.0 && c.co_event_margin <= 1.0))
      throw ConfigError("ensemble.co_event_margin", "must lie in [0, 1]");
    e.finish();
  }

  {
    const FieldReader s = r.has("stability") ? r.object("stability") : FieldReader(json::object(), "stability");
    c.stability_eta = s.number("eta", c.stability_eta);
    if (!(c.stability_eta >= 0.0))
      throw ConfigError("stability.eta", "must be >= 0");
    c.stability_trials = s.integer("trials", c.stability_trials);
    if (c.stability_trials < 1)
      throw ConfigError("stability.trials", "must be >= 1");
    c.stability_seed = s.seed("seed", c.stability_seed);
    s.finish();
  }

  {
    const FieldReader o = r.has("output") ? r.object("output") : FieldReader(json::object(), "output");
    c.out_dir = o.string("dir", c.out_dir);
    o.finish();
  }
  r.mark("hypotheses"); // echoed flags are recomputed, never trusted
  r.mark("warnings");
  r.finish();

  c.hypotheses.nontrivial_coupling = sys.coupling().nontrivial();
  c.hypotheses.elliptic_noise = c.path.type == "diffusion";
  if (!c.hypotheses.nontrivial_coupling)
    c.warnings.push_back("coupling is trivial (epsilon = 0 or lambda = 0): sectors evolve "
                         "independently and no cascade can propagate");
  if (!c.hypotheses.elliptic_noise)
    c.warnings.push_back("control path is deterministic: the hitting argument for "
                         "elliptic noise does not apply");
  return c;
}

/// Fully expanded config, including defaults and derived flags. Loading the
/// echo yields the same config.
inline json config_to_json(const ScenarioConfig &c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["name"] = c.name;
  j["system"]["sectors"] = c.system.sectors;
  j["system"]["coupling"]["epsilon"] = c.system.epsilon;
  j["system"]["coupling"]["lambda"] = c.system.lambda;
  json &p = j["control_path"];
  p["type"] = c.path.type;
  p["horizon"] = c.path.horizon;
  p["dt"] = c.path.dt;
  if (c.path.type == "ramp") {
    p["alpha_start"] = c.path.alpha_start;
    p["alpha_end"] = c.path.alpha_end;
  } else {
    p["drift"] = c.path.drift;
    p["covariance"] = c.path.covariance;
    p["ellipticity_floor"] = c.path.ellipticity_floor;
  }
  j["alpha0"] = c.alpha0;
  if (c.initial_state == "x0")
    j["initial_state"]["x0"] = c.x0;
  else
    j["initial_state"] = c.initial_state;
  json &cs = j["cascade"];
  cs["tau_sync"] = c.tau_sync;
  if (c.threshold_kind == "phi")
    cs["threshold"]["phi"] = c.threshold_phi;
  else
    cs["threshold"]["count"] = c.threshold_count;
  cs["angle_max"] = c.angle_max;
  cs["box"]["lo"] = c.box_lo;
  cs["box"]["hi"] = c.box_hi;
  cs["escape_radius"] = c.escape_radius;
  j["ensemble"]["replicates"] = c.replicates;
  j["ensemble"]["base_seed"] = c.base_seed;
  j["ensemble"]["replicate_logs"] = c.replicate_logs;
  j["ensemble"]["max_abort_fraction"] = c.max_abort_fraction;
  j["ensemble"]["co_event_margin"] = c.co_event_margin;
  j["stability"]["eta"] = c.stability_eta;
  j["stability"]["trials"] = c.stability_trials;
  j["stability"]["seed"] = c.stability_seed;
  j["output"]["dir"] = c.out_dir;
  j["hypotheses"]["nontrivial_coupling"] = c.hypotheses.nontrivial_coupling;
  j["hypotheses"]["elliptic_noise"] = c.hypotheses.elliptic_noise;
  j["warnings"] = c.warnings;
  return j;
}

/// Echoed "hypotheses" and "warnings" blocks are accepted and recomputed.
inline ScenarioConfig parse_config_with_echo(json root) {
  if (root.is_object()) {
    if (root.contains("hypotheses") && !root["hypotheses"].is_string())
      root.erase("hypotheses");
    if (root.contains("warnings") && !root["warnings"].is_string())
      root.erase("warnings");
  }
  return parse_config(root);
}

inline ScenarioConfig load_config(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError(path.string(), "cannot open file");
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error &e) {
    throw ConfigError(path.string(), std::string("invalid JSON: ") + e.what());
  }
  return parse_config_with_echo(std::move(root));
}

// ---------------------------------------------------------------------------
// Serialization of run results

inline json to_json(const SectorSignature &s) {
  return json{{"negative_eigenvalues", s.negative_eigenvalues},
              {"min_abs_eigenvalue", s.min_abs_eigenvalue}};
}

inline json to_json(const SingularityDiagnostics &d) {
  json j;
  j["singular_values_h"] = to_json(d.singular_values_h);
  j["corank"] = d.corank;
  j["dpi_codim"] = d.dpi_codim;
  j["sector_coranks"] = d.sector_coranks;
  json normals = json::array();
  for (const auto &nrm : d.discriminant_normals)
    normals.push_back(nrm ? to_json(*nrm) : json(nullptr));
  j["discriminant_normals"] = std::move(normals);
  j["pairwise_angles"] = to_json(d.pairwise_angles);
  return j;
}

inline json to_json(const CatastropheEvent &e) {
  json j;
  j["time"] = e.time;
  j["sector"] = e.sector;
  j["mechanism"] = std::string(to_string(e.mechanism));
  j["induced"] = e.induced;
  j["jump_size"] = e.jump_size;
  j["pre_signature"] = to_json(e.pre_signature);
  j["post_signature"] = to_json(e.post_signature);
  j["alpha"] = to_json(e.alpha);
  j["diagnostics"] = to_json(e.diagnostics);
  return j;
}

inline json events_to_json(const CascadeReport &r) {
  json a = json::array();
  for (const auto &e : r.events)
    a.push_back(to_json(e));
  return a;
}

inline json cascade_to_json(const CascadeReport &r) {
  json j;
  j["k"] = r.k;
  j["tau_sync"] = r.tau_sync;
  j["event_count"] = r.events.size();
  json edges = json::array();
  for (const auto &e : r.graph.edges)
    edges.push_back(json{{"i", e.i},
                         {"j", e.j},
                         {"min_alignment_angle", e.min_alignment_angle},
                         {"co_event_count", e.co_event_count}});
  j["graph"]["edges"] = std::move(edges);
  j["graph"]["components"] = r.graph.components();
  json ats = json::array();
  for (const auto &at : r.apocalyptic_times)
    ats.push_back(json{{"time", at.time},
                       {"active", at.active},
                       {"members", at.members},
                       {"triggered_components", at.triggered_components}});
  j["apocalyptic_times"] = std::move(ats);
  if (!r.apocalyptic_times.empty())
    j["coverage_check"] = cascade_coverage_check(r, r.graph);
  else
    j["coverage_check"] = nullptr;
  return j;
}

inline std::string timeseries_csv(const CascadeReport &r) {
  std::string out = "t";
  if (!r.steps.empty()) {
    const auto &s0 = r.steps.front();
    for (Eigen::Index q = 0; q < s0.alpha.size(); ++q)
      out += ",alpha[" + std::to_string(q) + "]";
    for (Eigen::Index q = 0; q < s0.x.size(); ++q)
      out += ",x[" + std::to_string(q) + "]";
    out += ",phi";
    for (std::size_t q = 0; q < s0.in_a.size(); ++q)
      out += ",in_A[" + std::to_string(q) + "]";
  }
  out += '\n';
  for (const auto &s : r.steps) {
    out += format_double(s.t);
    for (Eigen::Index q = 0; q < s.alpha.size(); ++q)
      out += ',' + format_double(s.alpha[q]);
    for (Eigen::Index q = 0; q < s.x.size(); ++q)
      out += ',' + format_double(s.x[q]);
    out += ',' + format_double(s.phi);
    for (int f : s.in_a)
      out += ',' + std::to_string(f);
    out += '\n';
  }
  return out;
}

inline json timeseries_to_json(const CascadeReport &r) {
  json a = json::array();
  for (const auto &s : r.steps)
    a.push_back(json{{"t", s.t},
                     {"alpha", to_json(s.alpha)},
                     {"x", to_json(s.x)},
                     {"phi", s.phi},
                     {"in_A", s.in_a}});
  return a;
}

inline void write_text(const std::filesystem::path &path, const std::string &text) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// ---------------------------------------------------------------------------
// Single runs

/// One realization; replicate r of an ensemble uses seed
/// replicate_seed(base_seed, r), and `run` uses replicate 0.
inline CascadeReport run_single(const ScenarioConfig &c, std::uint64_t seed, bool record_steps) {
  const NetworkSystem sys = make_system(c);
  const ControlPath path = simulate_path(make_path_spec(c, seed), detail::to_vector(c.alpha0));
  CascadeOptions opts = make_cascade_options(c);
  opts.record_steps = record_steps;
  return run_scenario(sys, path, initial_state(c, sys), opts);
}

// ---------------------------------------------------------------------------
// Ensembles

struct ReplicateDigest {
  int replicate = 0;
  std::uint64_t seed = 0;
  bool aborted = false;
  double abort_time = std::numeric_limits<double>::quiet_NaN();
  std::string abort_reason;
  int event_count = 0;
  std::vector<int> events_per_sector;
  std::vector<double> max_jump; // per sector, 0 without events
  double first_event_time = std::numeric_limits<double>::quiet_NaN();
  bool co_event = false;
  int co_event_count = 0;
  int apocalyptic_count = 0;
  std::optional<bool> coverage; // only with an apocalyptic time
  Partition components;
  std::vector<double> event_min_singular_values;
  std::vector<double> event_angles;
  std::optional<std::string> log; // relative path of the replicate log
  json log_content;               // events + cascade, kept only with logs on
};

struct Histogram {
  std::vector<double> edges;
  std::vector<int> counts;
};

inline Histogram make_histogram(const std::vector<double> &values, double lo, double hi, int bins) {
  Histogram h;
  for (int b = 0; b <= bins; ++b)
    h.edges.push_back(lo + (hi - lo) * b / bins);
  h.counts.assign(bins, 0);
  for (double v : values) {
    if (!std::isfinite(v))
      continue;
    int b = static_cast<int>(std::floor((v - lo) / (hi - lo) * bins));
    h.counts[std::clamp(b, 0, bins - 1)] += 1;
  }
  return h;
}

struct EnsembleStatistics {
  int replicates = 0;
  int aborted = 0;
  double hitting_fraction = 0.0;      // share of replicates with >= 1 event
  std::vector<double> event_rate;     // mean events per replicate, per sector
  double co_event_rate = 0.0;         // share of completed replicates with a co-event
  int completed = 0;
  int with_apocalyptic = 0;
  double coverage_fraction = std::numeric_limits<double>::quiet_NaN();
  std::vector<int> coverage_misses;
};

struct DependenceSummary {
  std::optional<std::string> error;
  Matrix tau;
  std::vector<bool> degenerate;
  std::vector<CopulaFit> fits;
};

struct EnsembleResult {
  std::vector<ReplicateDigest> digests; // sorted by replicate index
  EnsembleStatistics stats;
  DependenceSummary dependence;
  Histogram min_singular_value_log10;
  Histogram alignment_angle;
};

inline ReplicateDigest digest_report(const CascadeReport &r, int k, double tau_sync) {
  ReplicateDigest d;
  d.event_count = static_cast<int>(r.events.size());
  d.events_per_sector.assign(k, 0);
  d.max_jump.assign(k, 0.0);
  for (const auto &e : r.events) {
    d.events_per_sector[e.sector] += 1;
    d.max_jump[e.sector] = std::max(d.max_jump[e.sector], e.jump_size);
    const Vector &sv = e.diagnostics.singular_values_h;
    if (sv.size() > 0)
      d.event_min_singular_values.push_back(sv[sv.size() - 1]);
    const Matrix &ang = e.diagnostics.pairwise_angles;
    for (Eigen::Index i = 0; i < ang.rows(); ++i)
      for (Eigen::Index j = i + 1; j < ang.cols(); ++j)
        if (std::isfinite(ang(i, j)))
          d.event_angles.push_back(ang(i, j));
  }
  if (!r.events.empty())
    d.first_event_time = r.events.front().time;
  d.co_event = has_co_event(r, tau_sync);
  d.co_event_count = co_event_count(r, tau_sync);
  d.apocalyptic_count = static_cast<int>(r.apocalyptic_times.size());
  if (!r.apocalyptic_times.empty())
    d.coverage = cascade_coverage_check(r, r.graph);
  d.components = r.graph.components();
  return d;
}

inline DependenceSummary dependence_from_magnitudes(const Matrix &raw) {
  DependenceSummary s;
  if (raw.rows() < 10) {
    s.error = "fewer than 10 completed replicates";
    return s;
  }
  const PseudoObservations po = rank_transform(raw);
  s.degenerate = po.degenerate;
  s.tau = tau_matrix(po);
  for (auto family : {CopulaFamily::Clayton, CopulaFamily::Gumbel}) {
    try {
      s.fits.push_back(fit_by_tau(po, family));
    } catch (const EstimationError &e) {
      s.error = e.what();
      s.fits.clear();
      break;
    }
  }
  return s;
}

inline EnsembleStatistics ensemble_statistics(const std::vector<ReplicateDigest> &ds, int k) {
  EnsembleStatistics s;
  s.replicates = static_cast<int>(ds.size());
  s.event_rate.assign(k, 0.0);
  int hits = 0, co = 0, covered = 0;
  for (const auto &d : ds) {
    if (d.aborted) {
      ++s.aborted;
      continue;
    }
    ++s.completed;
    hits += d.event_count > 0;
    co += d.co_event;
    for (int i = 0; i < k; ++i)
      s.event_rate[i] += d.events_per_sector[i];
    if (d.coverage) {
      ++s.with_apocalyptic;
      if (*d.coverage)
        ++covered;
      else
        s.coverage_misses.push_back(d.replicate);
    }
  }
  s.hitting_fraction = s.replicates ? static_cast<double>(hits) / s.replicates : 0.0;
  if (s.completed > 0) {
    s.co_event_rate = static_cast<double>(co) / s.completed;
    for (double &v : s.event_rate)
      v /= s.completed;
  }
  if (s.with_apocalyptic > 0)
    s.coverage_fraction = static_cast<double>(covered) / s.with_apocalyptic;
  return s;
}

inline std::string replicate_log_name(int r) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "replicates/replicate_%05d.json", r);
  return buf;
}

/// Run all replicates on `jobs` worker threads. Results are independent of
/// the number of workers: each replicate has its own seed and the reduction
/// runs over digests sorted by replicate index.
inline EnsembleResult run_ensemble(const ScenarioConfig &c, int jobs = 0) {
  const NetworkSystem sys = make_system(c);
  const int k = sys.k();
  const int n = c.replicates;
  if (jobs <= 0)
    jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  jobs = std::min(jobs, n);

  std::vector<ReplicateDigest> digests(n);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int r = next++; r < n; r = next++) {
      const std::uint64_t seed = replicate_seed(c.base_seed, static_cast<std::uint64_t>(r));
      ReplicateDigest d;
      try {
        const CascadeReport rep = run_single(c, seed, false);
        d = digest_report(rep, k, c.tau_sync);
        if (c.replicate_logs) {
          d.log = replicate_log_name(r);
          d.log_content = json{{"replicate", r},
                               {"seed", seed},
                               {"events", events_to_json(rep)},
                               {"cascade", cascade_to_json(rep)}};
        }
      } catch (const ScenarioAborted &e) {
        d = ReplicateDigest{};
        d.aborted = true;
        d.abort_time = e.time();
        d.abort_reason = e.what();
        d.events_per_sector.assign(k, 0);
        d.max_jump.assign(k, 0.0);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure)
          failure = std::current_exception();
        next = n;
        return;
      }
      d.replicate = r;
      d.seed = seed;
      digests[r] = std::move(d);
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < jobs; ++w)
    pool.emplace_back(worker);
  worker();
  for (auto &t : pool)
    t.join();
  if (failure)
    std::rethrow_exception(failure);

  EnsembleResult res;
  res.digests = std::move(digests);
  res.stats = ensemble_statistics(res.digests, k);
  std::vector<const ReplicateDigest *> done;
  std::vector<double> sv, angles;
  for (const auto &d : res.digests) {
    if (d.aborted)
      continue;
    done.push_back(&d);
    for (double v : d.event_min_singular_values)
      sv.push_back(std::log10(std::max(v, 1e-300)));
    angles.insert(angles.end(), d.event_angles.begin(), d.event_angles.end());
  }
  if (k >= 2) {
    Matrix raw(static_cast<Eigen::Index>(done.size()), k);
    for (std::size_t r = 0; r < done.size(); ++r)
      for (int i = 0; i < k; ++i)
        raw(static_cast<Eigen::Index>(r), i) = done[r]->max_jump[i];
    res.dependence = dependence_from_magnitudes(raw);
  } else {
    res.dependence.error = "dependence needs at least two sectors";
  }
  res.min_singular_value_log10 = make_histogram(sv, -16.0, 2.0, 18);
  res.alignment_angle = make_histogram(angles, 0.0, 90.0, 9);
  return res;
}

inline json to_json(const CopulaFit &f) {
  json j;
  j["requested_family"] = std::string(to_string(f.requested));
  j["family"] = std::string(to_string(f.model.family()));
  if (f.model.family() == CopulaFamily::Independence)
    j["theta"] = nullptr;
  else
    j["theta"] = f.model.theta();
  j["tau"] = f.tau;
  j["independence_fallback"] = f.independence_fallback;
  j["saturated"] = f.saturated;
  return j;
}

inline json to_json(const DependenceSummary &s) {
  json j;
  j["error"] = s.error ? json(*s.error) : json(nullptr);
  j["tau_matrix"] = s.tau.size() ? to_json(s.tau) : json::array();
  json deg = json::array();
  for (bool b : s.degenerate)
    deg.push_back(b);
  j["degenerate_columns"] = std::move(deg);
  json fits = json::array();
  for (const auto &f : s.fits)
    fits.push_back(to_json(f));
  j["fits"] = std::move(fits);
  return j;
}

inline json to_json(const Histogram &h) {
  return json{{"edges", h.edges}, {"counts", h.counts}};
}

inline json summary_to_json(const ScenarioConfig &c, const EnsembleResult &res) {
  json j;
  j["schema_version"] = config_schema_version;
  j["config"] = config_to_json(c);
  json ds = json::array();
  for (const auto &d : res.digests) {
    json e;
    e["replicate"] = d.replicate;
    e["seed"] = d.seed;
    e["aborted"] = d.aborted;
    if (d.aborted) {
      e["abort_time"] = d.abort_time;
      e["abort_reason"] = d.abort_reason;
    }
    e["event_count"] = d.event_count;
    e["events_per_sector"] = d.events_per_sector;
    e["max_jump"] = d.max_jump;
    e["first_event_time"] = d.first_event_time;
    e["co_event"] = d.co_event;
    e["co_event_count"] = d.co_event_count;
    e["apocalyptic_count"] = d.apocalyptic_count;
    e["coverage_check"] = d.coverage ? json(*d.coverage) : json(nullptr);
    e["components"] = d.components;
    e["log"] = d.log ? json(*d.log) : json(nullptr);
    ds.push_back(std::move(e));
  }
  j["digests"] = std::move(ds);
  const auto &s = res.stats;
  json &st = j["statistics"];
  st["replicates"] = s.replicates;
  st["completed"] = s.completed;
  st["aborted"] = s.aborted;
  st["hitting_fraction"] = s.hitting_fraction;
  st["event_rate_per_sector"] = s.event_rate;
  st["co_event_rate"] = s.co_event_rate;
  st["replicates_with_apocalyptic_time"] = s.with_apocalyptic;
  st["coverage_fraction"] = s.coverage_fraction;
  st["coverage_misses"] = s.coverage_misses;
  j["dependence"] = to_json(res.dependence);
  j["histograms"]["min_singular_value_log10"] = to_json(res.min_singular_value_log10);
  j["histograms"]["alignment_angle_degrees"] = to_json(res.alignment_angle);
  return j;
}

/// Write summary.json (and replicate logs when enabled) under out_dir.
inline void write_ensemble(const std::filesystem::path &out_dir, const ScenarioConfig &c,
                           const EnsembleResult &res) {
  for (const auto &d : res.digests)
    if (d.log)
      write_text(out_dir / *d.log, dump_json(d.log_content));
  write_text(out_dir / "summary.json", dump_json(summary_to_json(c, res)));
}

/// Rebuild the per-sector magnitude matrix from a summary.json document
/// (completed replicates only).
inline Matrix magnitudes_from_summary(const json &summary) {
  if (!summary.is_object() || !summary.contains("digests") || !summary["digests"].is_array())
    throw ConfigError("digests", "summary has no digests array");
  std::vector<std::vector<double>> rows;
  for (const auto &d : summary["digests"]) {
    if (d.value("aborted", false))
      continue;
    rows.push_back(d.at("max_jump").get<std::vector<double>>());
  }
  if (rows.empty())
    throw ConfigError("digests", "no completed replicates");
  for (const auto &r : rows)
    if (r.size() != rows.front().size())
      throw ConfigError("digests", "inconsistent max_jump lengths");
  return detail::to_matrix(rows);
}

} // namespace catnet
