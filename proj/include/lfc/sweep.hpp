#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "lfc/learner.hpp"
#include "lfc/scenario.hpp"
#include "lfc/serialization.hpp"
#include "lfc/sim_user.hpp"

namespace lfc {

inline std::vector<double> default_beta_grid() { return {5.0, 10.0, 20.0, 50.0, 100.0, 200.0}; }

struct KernelEntry {
  KernelSpec spec;
  std::vector<double> betas;
};

/// A grid of (feature count, instance count) cells, each with `envs_per_cell`
/// random environments, learned with every kernel and every candidate beta.
struct SweepSpec {
  std::vector<int> feature_counts{1, 2, 5};
  std::vector<int> instance_counts{1, 2, 5};
  int envs_per_cell = 25;
  std::vector<KernelEntry> kernels{
      {KernelSpec::identity(), default_beta_grid()},
      {KernelSpec::velocity(), default_beta_grid()},
      {KernelSpec::rbf(1.0), default_beta_grid()},
      {KernelSpec::rbf(5.0), default_beta_grid()},
  };
  int iterations = 20;
  std::uint64_t base_seed = 1;
  Strategy strategy = Strategy::Largest;
  double noise = 0.0;
  GenConfig generator;

  void validate() const {
    if (feature_counts.empty()) throw InvalidArgument("feature_counts is empty", "feature_counts");
    if (instance_counts.empty()) throw InvalidArgument("instance_counts is empty", "instance_counts");
    if (kernels.empty()) throw InvalidArgument("kernels is empty", "kernels");
    if (envs_per_cell < 1) throw InvalidArgument("envs_per_cell must be >= 1", "envs_per_cell");
    if (iterations < 1) throw InvalidArgument("iterations must be >= 1", "N");
    for (int f : feature_counts) {
      if (f < 1) throw InvalidArgument("feature counts must be >= 1", "feature_counts");
    }
    for (int m : instance_counts) {
      if (m < 1) throw InvalidArgument("instance counts must be >= 1", "instance_counts");
    }
    for (const KernelEntry& k : kernels) {
      k.spec.validate();
      if (k.betas.empty()) throw InvalidArgument("kernel " + k.spec.name() + " has no betas", "betas");
      for (double b : k.betas) {
        if (!(b > 0.0)) throw InvalidArgument("betas must be positive", "betas");
      }
    }
    if (!(noise >= 0.0)) throw InvalidArgument("noise must be non-negative", "noise");
    generator.planner.validate();
  }
};

inline Json sweep_spec_to_json(const SweepSpec& spec) {
  Json kernels = Json::array();
  for (const KernelEntry& k : spec.kernels) {
    Json entry = kernel_to_json(k.spec);
    entry["betas"] = k.betas;
    kernels.push_back(std::move(entry));
  }
  const GenConfig& g = spec.generator;
  return Json{{"feature_counts", spec.feature_counts},
              {"instance_counts", spec.instance_counts},
              {"envs_per_cell", spec.envs_per_cell},
              {"kernels", std::move(kernels)},
              {"N", spec.iterations},
              {"base_seed", spec.base_seed},
              {"strategy", strategy_name(spec.strategy)},
              {"noise", spec.noise},
              {"generator",
               {{"workspace_min", g.workspace_min},
                {"workspace_max", g.workspace_max},
                {"radius", g.radius},
                {"start", vector_to_json(g.start)},
                {"goal", vector_to_json(g.goal)},
                {"weight_bound", g.weight_bound},
                {"max_rejections", g.max_rejections}}},
              {"planner", planner_to_json(g.planner)}};
}

/// Missing fields take their defaults. A kernel without its own "betas"
/// uses the top-level "betas" list, or the default grid.
inline SweepSpec sweep_spec_from_json(const Json& j) {
  if (!j.is_object()) throw InvalidArgument("sweep spec must be a JSON object", "spec");
  SweepSpec spec;
  using detail::get_or;
  spec.feature_counts = get_or<std::vector<int>>(j, "feature_counts", spec.feature_counts);
  spec.instance_counts = get_or<std::vector<int>>(j, "instance_counts", spec.instance_counts);
  spec.envs_per_cell = get_or<int>(j, "envs_per_cell", spec.envs_per_cell);
  spec.iterations = get_or<int>(j, "N", spec.iterations);
  spec.base_seed = get_or<std::uint64_t>(j, "base_seed", spec.base_seed);
  spec.strategy = strategy_from_name(get_or<std::string>(j, "strategy", "largest"));
  spec.noise = get_or<double>(j, "noise", spec.noise);
  const auto shared_betas = get_or<std::vector<double>>(j, "betas", default_beta_grid());
  if (j.contains("kernels")) {
    const Json& ks = j.at("kernels");
    if (!ks.is_array()) throw InvalidArgument("'kernels' must be an array", "kernels");
    spec.kernels.clear();
    for (const Json& k : ks) {
      KernelEntry entry{kernel_from_json(k), shared_betas};
      if (k.is_object()) entry.betas = get_or<std::vector<double>>(k, "betas", shared_betas);
      spec.kernels.push_back(std::move(entry));
    }
  } else if (j.contains("betas")) {
    for (KernelEntry& k : spec.kernels) k.betas = shared_betas;
  }
  if (j.contains("generator")) {
    const Json& g = j.at("generator");
    GenConfig& gen = spec.generator;
    gen.workspace_min = get_or<double>(g, "workspace_min", gen.workspace_min);
    gen.workspace_max = get_or<double>(g, "workspace_max", gen.workspace_max);
    gen.radius = get_or<double>(g, "radius", gen.radius);
    if (g.contains("start")) gen.start = vector_from_json(g.at("start"), "start");
    if (g.contains("goal")) gen.goal = vector_from_json(g.at("goal"), "goal");
    gen.weight_bound = get_or<double>(g, "weight_bound", gen.weight_bound);
    gen.max_rejections = get_or<int>(g, "max_rejections", gen.max_rejections);
  }
  if (j.contains("planner")) spec.generator.planner = planner_from_json(j.at("planner"));
  spec.validate();
  return spec;
}

/// Seed of environment `index` in cell (F, M), mixed with splitmix64.
inline std::uint64_t environment_seed(std::uint64_t base, int features, int instances, int index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(base);
  h = mix(h ^ static_cast<std::uint64_t>(features));
  h = mix(h ^ static_cast<std::uint64_t>(instances));
  h = mix(h ^ static_cast<std::uint64_t>(index));
  return h;
}

inline double median(std::vector<double> values) {
  if (values.empty()) throw InvalidArgument("median of an empty set", "values");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

/// Runs `count` independent tasks on up to `jobs` threads. Each task writes
/// only its own result slot, so the outcome does not depend on scheduling.
inline void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& task) {
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) task(i);
    });
  }
}

/// An environment ready for simulated learning.
struct Scenario {
  Environment env;
  Reference ref;
};

/// Result of one learning run against a simulated user.
struct RunResult {
  std::uint64_t env_seed = 0;
  double beta = 0.0;
  std::vector<double> curve;  // normalized cost of the plan at iterations 1..N
  LearningTrace trace;
  std::string error;          // non-empty when the run failed

  [[nodiscard]] bool ok() const { return error.empty(); }
};

struct LearningSetup {
  int iterations = 20;
  Strategy strategy = Strategy::Largest;
  double noise = 0.0;
  PlannerConfig planner;
};

inline RunResult run_simulated(const Scenario& s, const PropagationKernel& kernel, double beta,
                               const LearningSetup& setup) {
  RunResult out;
  out.env_seed = s.env.seed;
  out.beta = beta;
  try {
    SimUserConfig user_cfg;
    user_cfg.strategy = setup.strategy;
    user_cfg.noise = setup.noise;
    user_cfg.seed = s.env.seed;
    SimulatedUser user(s.ref.optimal, user_cfg);
    out.trace = run_loop(s.env, kernel, beta, setup.iterations,
                         [&user](const Trajectory& planned) { return user(planned); },
                         LoopOptions{setup.planner, false}, &s.ref);
    out.curve = cost_curve(out.trace, setup.iterations);
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

struct TuneResult {
  double best_beta = 0.0;
  std::vector<std::pair<double, double>> medians;  // (beta, median final cost)
  std::vector<std::vector<RunResult>> runs;        // [beta index][scenario index]
};

/// Picks the beta with the lowest median final-iteration normalized cost
/// across `scenarios`; ties go to the smaller beta. Failed runs are excluded
/// from the medians; a beta with no successful run is never selected.
inline TuneResult tune_beta(const std::vector<Scenario>& scenarios, const KernelSpec& kernel_spec,
                            const std::vector<double>& grid, const LearningSetup& setup,
                            int jobs = 1) {
  if (grid.empty()) throw InvalidArgument("beta grid is empty", "grid");
  const PropagationKernel kernel = make_kernel(kernel_spec, setup.planner.horizon);
  TuneResult out;
  out.runs.assign(grid.size(), std::vector<RunResult>(scenarios.size()));
  parallel_for(grid.size() * scenarios.size(), jobs, [&](std::size_t task) {
    const std::size_t b = task / std::max<std::size_t>(1, scenarios.size());
    const std::size_t s = task % std::max<std::size_t>(1, scenarios.size());
    out.runs[b][s] = run_simulated(scenarios[s], kernel, grid[b], setup);
  });

  std::optional<std::pair<double, double>> best;  // (median, beta)
  for (std::size_t b = 0; b < grid.size(); ++b) {
    std::vector<double> finals;
    for (const RunResult& r : out.runs[b]) {
      if (r.ok() && !r.curve.empty()) finals.push_back(r.curve.back());
    }
    if (finals.empty()) continue;
    const double m = median(finals);
    out.medians.emplace_back(grid[b], m);
    const std::pair<double, double> candidate{m, grid[b]};
    if (!best || candidate < *best) best = candidate;
  }
  if (!best) throw NumericalError("every run failed for kernel " + kernel_spec.name(), "kernel");
  out.best_beta = best->second;
  return out;
}

/// Median normalized cost per iteration for one (F, M, kernel) cell at its tuned beta.
struct CellAggregate {
  int features = 0;
  int instances = 0;
  KernelSpec kernel;
  double best_beta = 0.0;
  std::vector<double> median_curve;
  std::vector<std::pair<double, double>> beta_medians;
  int successful_runs = 0;
};

struct SweepFailure {
  int features = 0;
  int instances = 0;
  std::string kernel;  // "*" for environment generation failures
  double beta = 0.0;
  std::uint64_t env_seed = 0;
  std::string message;
};

struct SweepResult {
  std::vector<CellAggregate> aggregates;
  std::vector<SweepFailure> failures;
};

struct SweepOptions {
  int jobs = 1;
  bool all_traces = false;  // emit traces for every beta, not only the tuned one
  /// Receives serialized trace lines in a deterministic order.
  std::function<void(const std::string&)> trace_sink;
};

namespace detail {

inline Json run_header(int f, int m, const KernelSpec& k, double beta, std::uint64_t seed) {
  return Json{{"features", f}, {"instances", m}, {"kernel", k.name()}, {"beta", beta}, {"env_seed", seed}};
}

inline void emit_run(const SweepOptions& opts, int f, int m, const KernelSpec& k, const RunResult& r) {
  if (!opts.trace_sink || !r.ok()) return;
  for (const TraceRecord& rec : r.trace.records) {
    Json line = run_header(f, m, k, r.beta, r.env_seed);
    Json body = record_to_json(rec);
    for (auto& [key, value] : body.items()) line[key] = std::move(value);
    opts.trace_sink(line.dump());
  }
  if (r.trace.stopped_early()) {
    Json line = run_header(f, m, k, r.beta, r.env_seed);
    line["iteration"] = static_cast<int>(r.trace.records.size()) + 1;
    line["done"] = true;
    line["planned"] = trajectory_to_json(*r.trace.final_planned);
    line["normalized_cost"] = r.trace.final_normalized_cost ? Json(*r.trace.final_normalized_cost) : Json(nullptr);
    opts.trace_sink(line.dump());
  }
}

}  // namespace detail

/// Generates the environments of one cell. Failed seeds are reported in `failures`.
inline std::vector<Scenario> make_scenarios(int features, int instances, const SweepSpec& spec,
                                            int jobs, std::vector<SweepFailure>* failures) {
  std::vector<std::optional<Scenario>> slots(spec.envs_per_cell);
  std::vector<std::string> errors(spec.envs_per_cell);
  parallel_for(slots.size(), jobs, [&](std::size_t e) {
    const std::uint64_t seed = environment_seed(spec.base_seed, features, instances, static_cast<int>(e));
    try {
      Environment env = generate_environment(features, instances, seed, spec.generator);
      Reference ref = make_reference(env, spec.generator.planner);
      slots[e] = Scenario{std::move(env), std::move(ref)};
    } catch (const std::exception& ex) {
      errors[e] = ex.what();
    }
  });
  std::vector<Scenario> out;
  for (std::size_t e = 0; e < slots.size(); ++e) {
    if (slots[e]) {
      out.push_back(std::move(*slots[e]));
    } else if (failures) {
      failures->push_back({features, instances, "*", 0.0,
                           environment_seed(spec.base_seed, features, instances, static_cast<int>(e)),
                           errors[e]});
    }
  }
  return out;
}

/// Runs every (F, M, kernel, beta, environment) combination, tunes beta per
/// (F, M, kernel) and reduces to median cost curves. Results are ordered by
/// (F, M, kernel) as listed in the spec, independent of thread scheduling.
inline SweepResult run_sweep(const SweepSpec& spec, const SweepOptions& opts = {}) {
  spec.validate();
  SweepResult result;
  const LearningSetup setup{spec.iterations, spec.strategy, spec.noise, spec.generator.planner};
  for (int f : spec.feature_counts) {
    for (int m : spec.instance_counts) {
      const std::vector<Scenario> scenarios = make_scenarios(f, m, spec, opts.jobs, &result.failures);
      if (scenarios.empty()) continue;
      for (const KernelEntry& k : spec.kernels) {
        std::vector<double> grid = k.betas;
        std::sort(grid.begin(), grid.end());
        grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
        TuneResult tuned;
        try {
          tuned = tune_beta(scenarios, k.spec, grid, setup, opts.jobs);
        } catch (const std::exception& ex) {
          result.failures.push_back({f, m, k.spec.name(), 0.0, 0, ex.what()});
          continue;
        }
        CellAggregate agg{f, m, k.spec, tuned.best_beta, {}, tuned.medians, 0};
        for (std::size_t b = 0; b < grid.size(); ++b) {
          for (const RunResult& r : tuned.runs[b]) {
            if (!r.ok()) result.failures.push_back({f, m, k.spec.name(), r.beta, r.env_seed, r.error});
          }
          if (opts.all_traces || grid[b] == tuned.best_beta) {
            for (const RunResult& r : tuned.runs[b]) detail::emit_run(opts, f, m, k.spec, r);
          }
        }
        const auto& best_runs =
            tuned.runs[std::find(grid.begin(), grid.end(), tuned.best_beta) - grid.begin()];
        for (int i = 0; i < spec.iterations; ++i) {
          std::vector<double> column;
          for (const RunResult& r : best_runs) {
            if (r.ok() && static_cast<int>(r.curve.size()) > i) column.push_back(r.curve[i]);
          }
          agg.median_curve.push_back(column.empty() ? std::numeric_limits<double>::quiet_NaN()
                                                    : median(column));
        }
        for (const RunResult& r : best_runs) agg.successful_runs += r.ok() ? 1 : 0;
        result.aggregates.push_back(std::move(agg));
      }
    }
  }
  return result;
}

/// "%.17g"
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string aggregate_csv(const SweepResult& r, int iterations) {
  std::ostringstream os;
  os << "features,instances,kernel,best_beta";
  for (int i = 1; i <= iterations; ++i) os << ",iter_" << i;
  os << '\n';
  for (const CellAggregate& a : r.aggregates) {
    os << a.features << ',' << a.instances << ',' << a.kernel.name() << ',' << format_double(a.best_beta);
    for (double v : a.median_curve) os << ',' << format_double(v);
    os << '\n';
  }
  return os.str();
}

inline std::string tuning_csv(const SweepResult& r) {
  std::ostringstream os;
  os << "features,instances,kernel,beta,median_final_cost,selected\n";
  for (const CellAggregate& a : r.aggregates) {
    for (const auto& [beta, med] : a.beta_medians) {
      os << a.features << ',' << a.instances << ',' << a.kernel.name() << ',' << format_double(beta)
         << ',' << format_double(med) << ',' << (beta == a.best_beta ? 1 : 0) << '\n';
    }
  }
  return os.str();
}

inline std::string failures_csv(const SweepResult& r) {
  std::ostringstream os;
  os << "features,instances,kernel,beta,env_seed,message\n";
  for (const SweepFailure& f : r.failures) {
    std::string msg = f.message;
    std::replace(msg.begin(), msg.end(), '"', '\'');
    os << f.features << ',' << f.instances << ',' << f.kernel << ',' << format_double(f.beta) << ','
       << f.env_seed << ",\"" << msg << "\"\n";
  }
  return os.str();
}

/// Long-format median cost per iteration, one row per (cell, kernel, iteration).
inline std::string plot_data_csv(const SweepResult& r) {
  std::ostringstream os;
  os << "figure,features,instances,kernel,beta,iteration,median_normalized_cost\n";
  for (const CellAggregate& a : r.aggregates) {
    for (std::size_t i = 0; i < a.median_curve.size(); ++i) {
      os << "median_cost_per_iteration," << a.features << ',' << a.instances << ',' << a.kernel.name()
         << ',' << format_double(a.best_beta) << ',' << (i + 1) << ',' << format_double(a.median_curve[i])
         << '\n';
    }
  }
  return os.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path.string(), "out_dir");
  out << text;
}

/// Runs the sweep and writes aggregate.csv, tuning.csv, failures.csv,
/// traces.jsonl, spec.json and optionally plot_data.csv into `out_dir`.
inline SweepResult run_sweep_to_dir(const SweepSpec& spec, const std::filesystem::path& out_dir,
                                    int jobs = 1, bool emit_plot_data = false, bool all_traces = false) {
  std::filesystem::create_directories(out_dir);
  std::ofstream traces(out_dir / "traces.jsonl", std::ios::binary);
  if (!traces) throw InvalidArgument("cannot write traces into " + out_dir.string(), "out_dir");
  SweepOptions opts;
  opts.jobs = jobs;
  opts.all_traces = all_traces;
  opts.trace_sink = [&traces](const std::string& line) { traces << line << '\n'; };
  SweepResult result = run_sweep(spec, opts);
  traces.close();
  write_text(out_dir / "spec.json", sweep_spec_to_json(spec).dump(2) + "\n");
  write_text(out_dir / "aggregate.csv", aggregate_csv(result, spec.iterations));
  write_text(out_dir / "tuning.csv", tuning_csv(result));
  write_text(out_dir / "failures.csv", failures_csv(result));
  if (emit_plot_data) write_text(out_dir / "plot_data.csv", plot_data_csv(result));
  return result;
}

/// Recomputes the aggregate medians from traces.jsonl and compares them with
/// aggregate.csv. Returns human-readable mismatches (empty when consistent).
inline std::vector<std::string> verify_sweep_outputs(const std::filesystem::path& out_dir) {
  std::vector<std::string> problems;
  std::ifstream spec_in(out_dir / "spec.json");
  if (!spec_in) return {"missing spec.json"};
  const SweepSpec spec = sweep_spec_from_json(Json::parse(spec_in));
  const int n = spec.iterations;

  // (F, M, kernel, beta) -> env_seed -> curve
  using Key = std::tuple<int, int, std::string, double>;
  std::map<Key, std::map<std::uint64_t, std::vector<double>>> curves;
  std::ifstream traces(out_dir / "traces.jsonl");
  std::string line;
  while (std::getline(traces, line)) {
    if (line.empty()) continue;
    const Json j = Json::parse(line);
    const Key key{j.at("features").get<int>(), j.at("instances").get<int>(),
                  j.at("kernel").get<std::string>(), j.at("beta").get<double>()};
    auto& curve = curves[key][j.at("env_seed").get<std::uint64_t>()];
    const int iteration = j.at("iteration").get<int>();
    const double c = j.at("normalized_cost").get<double>();
    if (j.value("done", false)) {
      while (static_cast<int>(curve.size()) < n) curve.push_back(c);
    } else {
      if (static_cast<int>(curve.size()) + 1 != iteration) {
        problems.push_back("non-contiguous iterations in trace " + line.substr(0, 80));
      }
      curve.push_back(c);
    }
  }

  std::ifstream agg(out_dir / "aggregate.csv");
  if (!agg) return {"missing aggregate.csv"};
  std::getline(agg, line);  // header
  while (std::getline(agg, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (static_cast<int>(cells.size()) != 4 + n) {
      problems.push_back("malformed aggregate row: " + line);
      continue;
    }
    const Key key{std::stoi(cells[0]), std::stoi(cells[1]), cells[2], std::stod(cells[3])};
    auto it = curves.find(key);
    if (it == curves.end()) {
      problems.push_back("no traces for aggregate row " + cells[0] + "," + cells[1] + "," + cells[2]);
      continue;
    }
    for (int i = 0; i < n; ++i) {
      std::vector<double> column;
      for (const auto& [seed, curve] : it->second) {
        if (static_cast<int>(curve.size()) > i) column.push_back(curve[i]);
      }
      const double recomputed = column.empty() ? std::numeric_limits<double>::quiet_NaN() : median(column);
      const double stored = std::stod(cells[4 + i]);
      if (!(recomputed == stored) && !(std::isnan(recomputed) && std::isnan(stored))) {
        problems.push_back("median mismatch at " + cells[0] + "," + cells[1] + "," + cells[2] +
                           " iteration " + std::to_string(i + 1) + ": " + format_double(stored) +
                           " vs " + format_double(recomputed));
      }
    }
  }
  return problems;
}

}  // namespace lfc
