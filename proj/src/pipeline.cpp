#include "oeduu/pipeline.hpp"

#include "oeduu/csv.hpp"
#include "oeduu/parallel.hpp"
#include "oeduu/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

namespace oeduu {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

// gamma sweep factors used when the config leaves gamma_grid empty;
// scaled by the per-sensor objective magnitude of the problem at hand
constexpr double kGammaFactors[] = {0.05, 0.15, 0.4, 1.0, 2.5, 6.0};

}  // namespace

bool rom_compatible(const ExperimentConfig& archived,
                    const ExperimentConfig& candidate) {
  const json a = config_to_json(archived);
  const json b = config_to_json(candidate);
  for (const char* block :
       {"grid", "prior", "darcy", "transport", "sensors", "reduction"}) {
    if (a.at(block) != b.at(block)) return false;
  }
  return true;
}

int resolve_workers(const ExperimentConfig& config, int override_workers) {
  int w = override_workers > 0 ? override_workers : config.run.workers;
  if (w <= 0) w = static_cast<int>(std::thread::hardware_concurrency());
  return std::max(1, w);
}

RomBundle build_rom(const ExperimentConfig& config, const std::string& phase_tag,
                    double mu, int n_samples, int workers,
                    bool keep_operators) {
  RomBundle bundle;
  bundle.config = config;
  bundle.phase_tag = phase_tag;
  bundle.mu = mu;
  bundle.master_seed = config.run.master_seed;
  bundle.prior = config.make_prior();
  bundle.sensors = config.make_sensors();

  auto darcy_prior = config.make_darcy_prior();
  const Grid grid = config.make_grid();

  std::vector<std::shared_ptr<const ForwardOperator>> operators(n_samples);
  bundle.sample_seeds.resize(n_samples);
  bundle.t0s.resize(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    bundle.sample_seeds[i] = derive_seed(config.run.master_seed, phase_tag, i);
  }
  parallel_for(n_samples, workers, [&](int i) {
    UncertainSample sample = draw_sample(
        *darcy_prior, {config.darcy.t0_min, config.darcy.t0_max},
        bundle.sample_seeds[i]);
    bundle.t0s[i] = sample.t0;
    operators[i] = std::make_shared<ForwardOperator>(
        grid, std::move(sample), config.transport, bundle.sensors);
  });

  const ReductionOptions options = config.make_reduction_options(mu, workers);
  bundle.models = build_reduced_models(operators, *bundle.prior, options,
                                       config.make_probe_field(),
                                       derive_seed(config.run.master_seed,
                                                   phase_tag + "-reduction"),
                                       &bundle.clustering);
  bundle.grams.reserve(bundle.models.size());
  for (const auto& m : bundle.models) bundle.grams.push_back(gramians(m));
  if (keep_operators) bundle.operators = std::move(operators);
  return bundle;
}

SaaProblem make_saa_problem(const RomBundle& bundle,
                            const std::vector<int>& subset) {
  SaaProblem p;
  p.n_sensors = bundle.n_sensors();
  p.n_times = bundle.config.transport.n_obs_times();
  p.noise = bundle.config.noise;
  if (subset.empty()) {
    p.grams = bundle.grams;
  } else {
    for (int i : subset) p.grams.push_back(bundle.grams.at(i));
  }
  p.validate();
  return p;
}

std::vector<double> resolve_gammas(const ExperimentConfig& config,
                                   const RomBundle& bundle, int workers) {
  if (!config.penalty.gamma_grid.empty()) return config.penalty.gamma_grid;
  const SaaProblem problem = make_saa_problem(bundle);
  const double full = std::abs(objective_value(
      problem, Eigen::VectorXd::Ones(problem.n_sensors), EvalRoute::Auto,
      workers));
  const double scale = full / problem.n_sensors;
  std::vector<double> gammas;
  for (double f : kGammaFactors) gammas.push_back(f * scale);
  return gammas;
}

std::vector<DesignRecord> optimize_designs(const ExperimentConfig& config,
                                           const RomBundle& bundle,
                                           bool run_oeduu,
                                           bool run_deterministic,
                                           const std::vector<double>& gammas,
                                           int workers) {
  struct Task {
    double gamma;
    int family;  // -1 = oeduu
  };
  std::vector<Task> tasks;
  if (run_oeduu) {
    for (double g : gammas) tasks.push_back({g, -1});
  }
  if (run_deterministic) {
    const int families =
        std::min(config.saa.n_deterministic, static_cast<int>(bundle.grams.size()));
    for (int f = 0; f < families; ++f) {
      for (double g : gammas) tasks.push_back({g, f});
    }
  }

  const SaaProblem full_problem = make_saa_problem(bundle);
  const InnerSolveOptions inner = config.make_inner_options();

  std::vector<DesignRecord> designs(tasks.size());
  parallel_for(static_cast<int>(tasks.size()), workers, [&](int t) {
    const Task& task = tasks[t];
    SaaProblem problem =
        task.family < 0 ? full_problem
                        : make_saa_problem(bundle, {task.family});
    const PenaltyConfig penalty_config = config.make_penalty(task.gamma);
    const ContinuationResult res =
        continuation(problem, penalty_config, inner, 1);
    DesignRecord rec;
    rec.mode = task.family < 0 ? "oeduu" : "deterministic";
    rec.gamma = task.gamma;
    rec.family = task.family;
    rec.weights = res.w;
    rec.nnz = static_cast<int>((res.w.array() > 0.5).count());
    rec.objective = res.objective;
    rec.converged = res.converged;
    rec.stages = res.stages;
    rec.history = res.history;
    designs[t] = std::move(rec);
  });
  return designs;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("percentile: empty sample");
  std::sort(values.begin(), values.end());
  const double pos = p / 100.0 * (values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
  const double frac = pos - lo;
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

std::vector<EvaluationRow> evaluate_designs(const RomBundle& eval_bundle,
                                            const std::vector<DesignRecord>& designs,
                                            int workers) {
  const SaaProblem problem = make_saa_problem(eval_bundle);
  std::vector<EvaluationRow> rows(designs.size());
  parallel_for(static_cast<int>(designs.size()), workers, [&](int idx) {
    const DesignRecord& design = designs[idx];
    std::vector<double> values(problem.size());
    for (int e = 0; e < problem.size(); ++e) {
      values[e] = -trace_update(problem, e, design.weights);
    }
    EvaluationRow row;
    row.mode = design.mode;
    row.gamma = design.gamma;
    row.family = design.family;
    row.nnz = design.nnz;
    row.mean = 0.0;
    for (double v : values) row.mean += v;
    row.mean /= values.size();
    row.p2 = percentile(values, 2.0);
    row.p25 = percentile(values, 25.0);
    row.p75 = percentile(values, 75.0);
    row.p98 = percentile(values, 98.0);
    rows[idx] = row;
  });
  return rows;
}

std::vector<BudgetComparison> compare_budgets(
    const std::vector<EvaluationRow>& rows) {
  // oeduu value per budget (if several gammas land on one budget, keep
  // the best mean), deterministic median across all designs of that size
  std::map<int, double> oeduu;
  std::map<int, std::vector<double>> deterministic;
  for (const auto& row : rows) {
    if (row.nnz < 1) continue;
    if (row.mode == "oeduu") {
      auto it = oeduu.find(row.nnz);
      if (it == oeduu.end() || row.mean < it->second) oeduu[row.nnz] = row.mean;
    } else {
      deterministic[row.nnz].push_back(row.mean);
    }
  }
  std::vector<BudgetComparison> result;
  for (const auto& [budget, mean] : oeduu) {
    auto it = deterministic.find(budget);
    if (it == deterministic.end()) continue;
    BudgetComparison c;
    c.budget = budget;
    c.oeduu_mean = mean;
    c.deterministic_median = percentile(it->second, 50.0);
    c.deterministic_count = static_cast<int>(it->second.size());
    result.push_back(c);
  }
  return result;
}

std::vector<ValidationRow> validate_designs(
    const ExperimentConfig& config, const RomBundle& bundle,
    const std::vector<DesignRecord>& designs, int workers) {
  const int n_validate =
      std::min(config.saa.n_validate, static_cast<int>(bundle.grams.size()));
  if (n_validate < 1) return {};

  // exact operators: reuse the bundle's if present, else rebuild from seeds
  std::vector<std::shared_ptr<const ForwardOperator>> operators(n_validate);
  auto darcy_prior = config.make_darcy_prior();
  const Grid grid = config.make_grid();
  parallel_for(n_validate, workers, [&](int i) {
    if (static_cast<int>(bundle.operators.size()) > i) {
      operators[i] = bundle.operators[i];
      return;
    }
    operators[i] = std::make_shared<ForwardOperator>(
        grid,
        draw_sample(*darcy_prior, {config.darcy.t0_min, config.darcy.t0_max},
                    bundle.sample_seeds.at(i)),
        config.transport, bundle.sensors);
  });

  SaaProblem exact;
  exact.n_sensors = bundle.n_sensors();
  exact.n_times = config.transport.n_obs_times();
  exact.noise = config.noise;
  exact.grams.resize(n_validate);
  {
    std::vector<ObservationGramians> slots(n_validate);
    parallel_for(n_validate, workers, [&](int i) {
      slots[i] = exact_gramians(*operators[i], *bundle.prior);
    });
    exact.grams = std::move(slots);
  }

  std::vector<int> subset(n_validate);
  for (int i = 0; i < n_validate; ++i) subset[i] = i;
  const SaaProblem surrogate = make_saa_problem(bundle, subset);

  std::vector<ValidationRow> rows;
  for (const auto& design : designs) {
    ValidationRow row;
    row.mode = design.mode;
    row.gamma = design.gamma;
    row.family = design.family;
    row.nnz = design.nnz;
    row.surrogate_objective =
        objective_value(surrogate, design.weights, EvalRoute::Auto, workers);
    row.exact_objective =
        objective_value(exact, design.weights, EvalRoute::Dense, workers);
    row.rel_gap = std::abs(row.surrogate_objective - row.exact_objective) /
                  std::max(std::abs(row.exact_objective), 1e-300);
    rows.push_back(row);
  }
  return rows;
}

void write_designs_csv(const std::string& path,
                       const std::vector<DesignRecord>& designs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  const int s = designs.empty() ? 0 : static_cast<int>(designs[0].weights.size());
  out << "mode,gamma,family,nnz,objective,converged,stages";
  for (int i = 0; i < s; ++i) out << ",w" << i;
  out << '\n';
  for (const auto& d : designs) {
    out << d.mode << ',' << format_double(d.gamma) << ',' << d.family << ','
        << d.nnz << ',' << format_double(d.objective) << ','
        << (d.converged ? 1 : 0) << ',' << d.stages;
    for (int i = 0; i < d.weights.size(); ++i) {
      out << ',' << format_double(d.weights[i]);
    }
    out << '\n';
  }
}

std::vector<DesignRecord> read_designs_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty designs file");
  std::vector<DesignRecord> designs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    DesignRecord d;
    std::getline(ss, d.mode, ',');
    std::getline(ss, cell, ',');
    d.gamma = std::stod(cell);
    std::getline(ss, cell, ',');
    d.family = std::stoi(cell);
    std::getline(ss, cell, ',');
    d.nnz = std::stoi(cell);
    std::getline(ss, cell, ',');
    d.objective = std::stod(cell);
    std::getline(ss, cell, ',');
    d.converged = cell == "1";
    std::getline(ss, cell, ',');
    d.stages = std::stoi(cell);
    std::vector<double> w;
    while (std::getline(ss, cell, ',')) w.push_back(std::stod(cell));
    d.weights = Eigen::Map<Eigen::VectorXd>(w.data(), w.size());
    designs.push_back(std::move(d));
  }
  return designs;
}

void write_evaluation_csv(const std::string& path,
                          const std::vector<EvaluationRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "mode,gamma,family,nnz,mean,p2,p25,p75,p98\n";
  for (const auto& r : rows) {
    out << r.mode << ',' << format_double(r.gamma) << ',' << r.family << ','
        << r.nnz << ',' << format_double(r.mean) << ',' << format_double(r.p2)
        << ',' << format_double(r.p25) << ',' << format_double(r.p75) << ','
        << format_double(r.p98) << '\n';
  }
}

void write_comparison_csv(const std::string& path,
                          const std::vector<BudgetComparison>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "budget,oeduu_mean,deterministic_median,deterministic_count\n";
  for (const auto& r : rows) {
    out << r.budget << ',' << format_double(r.oeduu_mean) << ','
        << format_double(r.deterministic_median) << ',' << r.deterministic_count
        << '\n';
  }
}

void write_stage_log(const std::string& path,
                     const std::vector<DesignRecord>& designs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& d : designs) {
    for (const auto& rec : d.history) {
      json j;
      j["mode"] = d.mode;
      j["gamma"] = d.gamma;
      j["family"] = d.family;
      j["stage"] = rec.stage;
      j["eps"] = rec.eps;
      j["objective"] = rec.objective;
      j["penalty"] = rec.penalty_value;
      j["nnz"] = rec.nnz;
      j["pg_norm"] = rec.pg_norm;
      j["iterations"] = rec.iterations;
      out << j.dump() << '\n';
    }
  }
}

void write_validation_csv(const std::string& path,
                          const std::vector<ValidationRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "mode,gamma,family,nnz,surrogate_objective,exact_objective,rel_gap\n";
  for (const auto& r : rows) {
    out << r.mode << ',' << format_double(r.gamma) << ',' << r.family << ','
        << r.nnz << ',' << format_double(r.surrogate_objective) << ','
        << format_double(r.exact_objective) << ',' << format_double(r.rel_gap)
        << '\n';
  }
}

RunReport run_all(const ExperimentConfig& config, const std::string& out_dir) {
  const int workers = resolve_workers(config, 0);
  fs::create_directories(out_dir);
  RunReport report;

  double t = now_seconds();
  RomBundle bundle = build_rom(config, "saa", config.reduction.mu,
                               config.saa.n_samples, workers);
  save_rom(bundle, out_dir + "/rom");
  report.basis_sizes = bundle.basis_sizes();
  report.seconds_build = now_seconds() - t;

  // sensor table
  {
    std::ofstream out(out_dir + "/sensors.csv");
    out << "index,x,y\n";
    const auto& locs = bundle.sensors->locations();
    for (std::size_t i = 0; i < locs.size(); ++i) {
      out << i << ',' << format_double(locs[i][0]) << ','
          << format_double(locs[i][1]) << '\n';
    }
  }

  t = now_seconds();
  report.gammas = resolve_gammas(config, bundle, workers);
  report.before_optimize = counters::snapshot();
  report.designs = optimize_designs(config, bundle, true, true, report.gammas,
                                    workers);
  report.after_optimize = counters::snapshot();
  report.zero_pde_in_optimization =
      report.before_optimize == report.after_optimize;
  report.seconds_optimize = now_seconds() - t;
  write_designs_csv(out_dir + "/designs.csv", report.designs);
  write_stage_log(out_dir + "/stage_log.jsonl", report.designs);

  t = now_seconds();
  RomBundle eval_bundle = build_rom(config, "eval", config.reduction.mu_eval,
                                    config.saa.n_eval, workers,
                                    /*keep_operators=*/false);
  report.evaluation = evaluate_designs(eval_bundle, report.designs, workers);
  report.comparison = compare_budgets(report.evaluation);
  report.seconds_evaluate = now_seconds() - t;
  write_evaluation_csv(out_dir + "/evaluation.csv", report.evaluation);
  write_comparison_csv(out_dir + "/comparison.csv", report.comparison);

  int wins = 0;
  double advantage = 0.0;
  for (const auto& c : report.comparison) {
    if (c.oeduu_mean <= c.deterministic_median) ++wins;
    advantage += c.deterministic_median - c.oeduu_mean;
  }
  if (!report.comparison.empty()) {
    report.win_fraction = static_cast<double>(wins) / report.comparison.size();
    report.mean_advantage = advantage / report.comparison.size();
  }

  // seed audit: the evaluation stream must never intersect the SAA stream
  bool disjoint = true;
  for (auto s : eval_bundle.sample_seeds) {
    for (auto s2 : bundle.sample_seeds) {
      if (s == s2) disjoint = false;
    }
  }

  json manifest;
  manifest["config"] = config_to_json(config);
  manifest["gammas"] = report.gammas;
  manifest["basis_sizes"] = report.basis_sizes;
  manifest["saa_seeds"] = bundle.sample_seeds;
  manifest["eval_seeds"] = eval_bundle.sample_seeds;
  manifest["seed_streams_disjoint"] = disjoint;
  manifest["zero_pde_in_optimization"] = report.zero_pde_in_optimization;
  manifest["win_fraction"] = report.win_fraction;
  manifest["mean_advantage"] = report.mean_advantage;
  json counter_log;
  auto dump_counters = [](const counters::Snapshot& s) {
    return json{{"prior_solves", s.prior_solves},
                {"pressure_solves", s.pressure_solves},
                {"transport_applies", s.transport_applies},
                {"adjoint_applies", s.adjoint_applies},
                {"transport_steps", s.transport_steps}};
  };
  counter_log["before_optimize"] = dump_counters(report.before_optimize);
  counter_log["after_optimize"] = dump_counters(report.after_optimize);
  counter_log["final"] = dump_counters(counters::snapshot());
  manifest["pde_counters"] = counter_log;
  json outputs;
  for (const char* f : {"designs.csv", "evaluation.csv", "comparison.csv",
                        "stage_log.jsonl", "sensors.csv"}) {
    outputs[f] = file_checksum(out_dir + "/" + f);
  }
  outputs["rom"] = archive_checksum(out_dir + "/rom");
  manifest["outputs"] = outputs;
  {
    std::ofstream out(out_dir + "/manifest.json");
    out << manifest.dump(2) << '\n';
  }
  {
    json timings;
    timings["build_seconds"] = report.seconds_build;
    timings["optimize_seconds"] = report.seconds_optimize;
    timings["evaluate_seconds"] = report.seconds_evaluate;
    timings["workers"] = workers;
    std::ofstream out(out_dir + "/timings.json");
    out << timings.dump(2) << '\n';
  }
  return report;
}

}  // namespace oeduu
