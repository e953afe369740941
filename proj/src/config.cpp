#include "oeduu/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace oeduu {

namespace {

using nlohmann::json;

/// Tracks which keys of one JSON object were consumed; anything left
/// over is a config error naming the full path.
class Keys {
 public:
  Keys(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) {
      throw ConfigError("expected an object at '" + path_ + "'");
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("bad value at '" + path_ + "." + key + "': " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key)) return nullptr;
    return &j_.at(key);
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) {
        throw ConfigError("unknown key '" + path_ + "." + item.key() + "'");
      }
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::vector<std::array<double, 2>> parse_points(const json& j,
                                                const std::string& path) {
  std::vector<std::array<double, 2>> pts;
  if (!j.is_array()) throw ConfigError("expected an array at '" + path + "'");
  for (const auto& item : j) {
    if (!item.is_array() || item.size() != 2) {
      throw ConfigError("expected [x, y] pairs at '" + path + "'");
    }
    pts.push_back({item[0].get<double>(), item[1].get<double>()});
  }
  return pts;
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  Keys root(j, "config");

  if (const json* g = root.child("grid")) {
    Keys k(*g, "grid");
    k.get("nx", c.grid.nx);
    k.get("ny", c.grid.ny);
    k.get("extent_x", c.grid.extent_x);
    k.get("extent_y", c.grid.extent_y);
    k.finish();
  }
  if (const json* g = root.child("prior")) {
    Keys k(*g, "prior");
    k.get("rho", c.prior.rho);
    k.get("delta", c.prior.delta);
    k.get("mean", c.prior.mean);
    k.finish();
  }
  if (const json* g = root.child("darcy")) {
    Keys k(*g, "darcy");
    k.get("rho", c.darcy.rho);
    k.get("delta", c.darcy.delta);
    k.get("mean", c.darcy.mean);
    k.get("t0_min", c.darcy.t0_min);
    k.get("t0_max", c.darcy.t0_max);
    k.finish();
  }
  if (const json* g = root.child("transport")) {
    Keys k(*g, "transport");
    k.get("kappa", c.transport.kappa);
    k.get("t1", c.transport.t1);
    k.get("n_steps", c.transport.n_steps);
    k.get("obs_times", c.transport.obs_times);
    k.get("obs_halfwidth", c.transport.obs_halfwidth);
    k.finish();
  }
  if (const json* g = root.child("sensors")) {
    Keys k(*g, "sensors");
    k.get("count_x", c.sensors.count_x);
    k.get("count_y", c.sensors.count_y);
    k.get("margin_x", c.sensors.margin_x);
    k.get("margin_y", c.sensors.margin_y);
    if (const json* pts = k.child("locations")) {
      c.sensors.locations = parse_points(*pts, "sensors.locations");
    }
    k.finish();
  }
  if (const json* g = root.child("noise")) {
    Keys k(*g, "noise");
    k.get("sigma", c.noise.sigma);
    k.finish();
  }
  if (const json* g = root.child("reduction")) {
    Keys k(*g, "reduction");
    k.get("mu", c.reduction.mu);
    k.get("mu_eval", c.reduction.mu_eval);
    k.get("sketch_width", c.reduction.sketch_width);
    k.get("clusters", c.reduction.clusters);
    k.get("core_mode", c.reduction.core_mode);
    k.get("truncation_rule", c.reduction.truncation_rule);
    if (const json* p = k.child("probe")) {
      Keys kp(*p, "reduction.probe");
      if (const json* pts = kp.child("centers")) {
        c.reduction.probe.centers = parse_points(*pts, "reduction.probe.centers");
      }
      kp.get("widths", c.reduction.probe.widths);
      kp.get("amplitudes", c.reduction.probe.amplitudes);
      kp.finish();
    }
    k.finish();
  }
  if (const json* g = root.child("penalty")) {
    Keys k(*g, "penalty");
    k.get("alpha", c.penalty.alpha);
    k.get("eps_base", c.penalty.eps_base);
    k.get("binary_tol", c.penalty.binary_tol);
    k.get("max_stages", c.penalty.max_stages);
    k.get("gamma_grid", c.penalty.gamma_grid);
    k.finish();
  }
  if (const json* g = root.child("optimizer")) {
    Keys k(*g, "optimizer");
    k.get("max_iterations", c.optimizer.max_iterations);
    k.get("pg_tolerance", c.optimizer.pg_tolerance);
    k.get("memory", c.optimizer.memory);
    k.finish();
  }
  if (const json* g = root.child("saa")) {
    Keys k(*g, "saa");
    k.get("n_samples", c.saa.n_samples);
    k.get("n_eval", c.saa.n_eval);
    k.get("n_deterministic", c.saa.n_deterministic);
    k.get("n_validate", c.saa.n_validate);
    k.finish();
  }
  if (const json* g = root.child("run")) {
    Keys k(*g, "run");
    k.get("master_seed", c.run.master_seed);
    k.get("workers", c.run.workers);
    k.finish();
  }
  root.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return parse_config(j);
}

void ExperimentConfig::validate() const {
  if (grid.nx < 3 || grid.ny < 3) throw ConfigError("grid: need nx, ny >= 3");
  if (!(grid.extent_x > 0) || !(grid.extent_y > 0)) {
    throw ConfigError("grid: extents must be positive");
  }
  if (!(prior.rho > 0) || !(prior.delta > 0)) {
    throw ConfigError("prior: rho and delta must be positive");
  }
  if (!(darcy.rho > 0) || !(darcy.delta > 0)) {
    throw ConfigError("darcy: rho and delta must be positive");
  }
  if (!(darcy.t0_min <= darcy.t0_max)) throw ConfigError("darcy: empty t0 range");
  if (!(noise.sigma > 0)) throw ConfigError("noise: sigma must be positive");
  if (!(reduction.mu > 0 && reduction.mu < 1) ||
      !(reduction.mu_eval > 0 && reduction.mu_eval < 1)) {
    throw ConfigError("reduction: mu must lie in (0,1)");
  }
  if (reduction.sketch_width < 1) throw ConfigError("reduction: bad sketch_width");
  if (reduction.clusters < 1) throw ConfigError("reduction: bad clusters");
  if (reduction.core_mode != "two-pass" && reduction.core_mode != "single-pass") {
    throw ConfigError("reduction: core_mode must be two-pass or single-pass");
  }
  if (reduction.truncation_rule != "first-drop" &&
      reduction.truncation_rule != "strict-count") {
    throw ConfigError(
        "reduction: truncation_rule must be first-drop or strict-count");
  }
  if (reduction.probe.centers.size() != reduction.probe.widths.size() ||
      reduction.probe.centers.size() != reduction.probe.amplitudes.size() ||
      reduction.probe.centers.empty()) {
    throw ConfigError("reduction.probe: centers/widths/amplitudes mismatch");
  }
  try {
    make_penalty(0.0);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("penalty: ") + e.what());
  }
  if (optimizer.max_iterations < 1 || optimizer.memory < 1 ||
      !(optimizer.pg_tolerance > 0)) {
    throw ConfigError("optimizer: bad settings");
  }
  if (saa.n_samples < 1 || saa.n_eval < 1 || saa.n_deterministic < 0 ||
      saa.n_validate < 0) {
    throw ConfigError("saa: counts must be positive");
  }
  if (saa.n_deterministic > saa.n_samples) {
    throw ConfigError("saa: n_deterministic cannot exceed n_samples");
  }
  if (run.workers < 0) throw ConfigError("run: workers must be >= 0");
  for (double g : penalty.gamma_grid) {
    if (!(g >= 0)) throw ConfigError("penalty: gamma values must be >= 0");
  }
}

Grid ExperimentConfig::make_grid() const {
  return Grid(grid.nx, grid.ny, grid.extent_x, grid.extent_y);
}

std::shared_ptr<PriorModel> ExperimentConfig::make_prior() const {
  const Grid g = make_grid();
  return std::make_shared<PriorModel>(
      g, prior.rho, prior.delta, Field::Constant(g.num_nodes(), prior.mean));
}

std::shared_ptr<PriorModel> ExperimentConfig::make_darcy_prior() const {
  const Grid g = make_grid();
  return std::make_shared<PriorModel>(
      g, darcy.rho, darcy.delta, Field::Constant(g.num_nodes(), darcy.mean));
}

std::shared_ptr<const SensorNetwork> ExperimentConfig::make_sensors() const {
  const Grid g = make_grid();
  if (!sensors.locations.empty()) {
    return std::make_shared<SensorNetwork>(
        SensorNetwork::from_points(g, sensors.locations));
  }
  return std::make_shared<SensorNetwork>(SensorNetwork::lattice(
      g, sensors.count_x, sensors.count_y, sensors.margin_x, sensors.margin_y));
}

Field ExperimentConfig::make_probe_field() const {
  const Grid g = make_grid();
  Field f = Field::Zero(g.num_nodes());
  for (std::size_t b = 0; b < reduction.probe.centers.size(); ++b) {
    const auto [cx, cy] = reduction.probe.centers[b];
    const double width = reduction.probe.widths[b];
    const double amp = reduction.probe.amplitudes[b];
    for (int iy = 0; iy < g.ny; ++iy) {
      for (int ix = 0; ix < g.nx; ++ix) {
        const double dx = g.node_x(ix) - cx, dy = g.node_y(iy) - cy;
        f[g.node(ix, iy)] += amp * std::exp(-(dx * dx + dy * dy) / (width * width));
      }
    }
  }
  return f;
}

ReductionOptions ExperimentConfig::make_reduction_options(double mu,
                                                          int workers) const {
  ReductionOptions o;
  o.mu = mu;
  o.sketch_width = reduction.sketch_width;
  o.n_clusters = reduction.clusters;
  o.mode = reduction.core_mode == "two-pass" ? CoreMode::TwoPass
                                             : CoreMode::SinglePass;
  o.rule = reduction.truncation_rule == "first-drop"
               ? TruncationRule::FirstDrop
               : TruncationRule::StrictCount;
  o.workers = workers;
  return o;
}

PenaltyConfig ExperimentConfig::make_penalty(double gamma) const {
  PenaltyConfig p;
  p.gamma = gamma;
  p.alpha = penalty.alpha;
  p.eps_base = penalty.eps_base;
  p.binary_tol = penalty.binary_tol;
  p.max_stages = penalty.max_stages;
  p.validate();
  return p;
}

InnerSolveOptions ExperimentConfig::make_inner_options() const {
  InnerSolveOptions o;
  o.max_iterations = optimizer.max_iterations;
  o.pg_tolerance = optimizer.pg_tolerance;
  o.memory = optimizer.memory;
  return o;
}

std::vector<double> ExperimentConfig::resolved_gamma_grid() const {
  return penalty.gamma_grid;  // empty means: scale the default factors
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  json j;
  j["grid"] = {{"nx", c.grid.nx},
               {"ny", c.grid.ny},
               {"extent_x", c.grid.extent_x},
               {"extent_y", c.grid.extent_y}};
  j["prior"] = {{"rho", c.prior.rho},
                {"delta", c.prior.delta},
                {"mean", c.prior.mean}};
  j["darcy"] = {{"rho", c.darcy.rho},
                {"delta", c.darcy.delta},
                {"mean", c.darcy.mean},
                {"t0_min", c.darcy.t0_min},
                {"t0_max", c.darcy.t0_max}};
  j["transport"] = {{"kappa", c.transport.kappa},
                    {"t1", c.transport.t1},
                    {"n_steps", c.transport.n_steps},
                    {"obs_times", c.transport.obs_times},
                    {"obs_halfwidth", c.transport.obs_halfwidth}};
  json sens = {{"count_x", c.sensors.count_x},
               {"count_y", c.sensors.count_y},
               {"margin_x", c.sensors.margin_x},
               {"margin_y", c.sensors.margin_y}};
  if (!c.sensors.locations.empty()) {
    json pts = json::array();
    for (const auto& p : c.sensors.locations) pts.push_back({p[0], p[1]});
    sens["locations"] = pts;
  }
  j["sensors"] = sens;
  j["noise"] = {{"sigma", c.noise.sigma}};
  json centers = json::array();
  for (const auto& p : c.reduction.probe.centers) centers.push_back({p[0], p[1]});
  j["reduction"] = {{"mu", c.reduction.mu},
                    {"mu_eval", c.reduction.mu_eval},
                    {"sketch_width", c.reduction.sketch_width},
                    {"clusters", c.reduction.clusters},
                    {"core_mode", c.reduction.core_mode},
                    {"truncation_rule", c.reduction.truncation_rule},
                    {"probe",
                     {{"centers", centers},
                      {"widths", c.reduction.probe.widths},
                      {"amplitudes", c.reduction.probe.amplitudes}}}};
  j["penalty"] = {{"alpha", c.penalty.alpha},
                  {"eps_base", c.penalty.eps_base},
                  {"binary_tol", c.penalty.binary_tol},
                  {"max_stages", c.penalty.max_stages},
                  {"gamma_grid", c.penalty.gamma_grid}};
  j["optimizer"] = {{"max_iterations", c.optimizer.max_iterations},
                    {"pg_tolerance", c.optimizer.pg_tolerance},
                    {"memory", c.optimizer.memory}};
  j["saa"] = {{"n_samples", c.saa.n_samples},
              {"n_eval", c.saa.n_eval},
              {"n_deterministic", c.saa.n_deterministic},
              {"n_validate", c.saa.n_validate}};
  j["run"] = {{"master_seed", c.run.master_seed}, {"workers", c.run.workers}};
  return j;
}

}  // namespace oeduu
