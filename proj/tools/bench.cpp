// Simulation harness: environment sweeps, beta tuning and environment tools.
//
//   bench sweep --spec samples/default_sweep.json --out-dir out --jobs 4
//   bench tune --kernel velocity --grid 5,10,20,50 --features 1 --instances 1
//   bench env gen --features 5 --instances 2 --seed 7 --out env.json
//   bench env show env.json
//   bench check --out-dir out

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "lfc/scenario.hpp"
#include "lfc/serialization.hpp"
#include "lfc/sweep.hpp"

namespace {

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item.empty()) continue;
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size() || !(v > 0.0)) throw lfc::InvalidArgument("bad beta '" + item + "'", "grid");
    grid.push_back(v);
  }
  if (grid.empty()) throw lfc::InvalidArgument("empty beta grid", "grid");
  return grid;
}

lfc::SweepSpec load_spec(const std::string& path) {
  if (path.empty()) return {};
  std::ifstream in(path);
  if (!in) throw lfc::InvalidArgument("cannot open spec " + path, "spec");
  return lfc::sweep_spec_from_json(lfc::Json::parse(in));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning-from-corrections simulation bench"};
  app.require_subcommand(1);

  std::string spec_path;
  std::string out_dir = "bench_out";
  int jobs = 1;
  std::uint64_t seed = 0;
  bool emit_plot_data = false;
  bool all_traces = false;

  auto* sweep = app.add_subcommand("sweep", "Run an environment/kernel/beta sweep");
  sweep->add_option("--spec", spec_path, "Sweep spec (JSON); defaults to the built-in default sweep");
  sweep->add_option("--out-dir", out_dir, "Output directory");
  sweep->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  sweep->add_option("--seed", seed, "Override base_seed");
  sweep->add_flag("--emit-plot-data", emit_plot_data, "Also write long-format plot_data.csv");
  sweep->add_flag("--all-traces", all_traces, "Write traces for every beta, not only the tuned one");

  std::string kernel_name = "identity";
  std::string grid_text = "5,10,20,50,100,200";
  int features = 1;
  int instances = 1;
  int envs = 25;
  int iterations = 20;
  auto* tune = app.add_subcommand("tune", "Tune beta for one kernel on one environment cell");
  tune->add_option("--kernel", kernel_name, "identity | velocity | rbf:<sigma>");
  tune->add_option("--grid", grid_text, "Comma-separated beta candidates");
  tune->add_option("--features", features, "Feature types per environment");
  tune->add_option("--instances", instances, "Instances per feature type");
  tune->add_option("--envs", envs, "Environments");
  tune->add_option("--iterations,-N", iterations, "Corrections per run");
  tune->add_option("--seed", seed, "Base seed");
  tune->add_option("--spec", spec_path, "Take generator/planner settings from this sweep spec");
  tune->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  auto* env_cmd = app.add_subcommand("env", "Generate or inspect environments");
  env_cmd->require_subcommand(1);
  std::string env_out;
  auto* gen = env_cmd->add_subcommand("gen", "Generate an environment as JSON");
  gen->add_option("--features", features, "Feature types");
  gen->add_option("--instances", instances, "Instances per type");
  gen->add_option("--seed", seed, "Seed");
  gen->add_option("--out", env_out, "Write to file instead of stdout");
  std::string env_in;
  auto* show = env_cmd->add_subcommand("show", "Summarize an environment JSON file");
  show->add_option("file", env_in, "Environment JSON")->required();

  auto* check = app.add_subcommand("check", "Recompute aggregate medians from traces and compare");
  check->add_option("--out-dir", out_dir, "Sweep output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sweep) {
      lfc::SweepSpec spec = load_spec(spec_path);
      if (sweep->count("--seed")) spec.base_seed = seed;
      const lfc::SweepResult result = lfc::run_sweep_to_dir(spec, out_dir, jobs, emit_plot_data, all_traces);
      std::cout << lfc::aggregate_csv(result, spec.iterations);
      if (!result.failures.empty()) {
        std::cerr << result.failures.size() << " cell failures (see " << out_dir << "/failures.csv)\n";
        return 2;
      }
      return 0;
    }

    if (*tune) {
      lfc::SweepSpec spec = load_spec(spec_path);
      spec.base_seed = seed;
      spec.envs_per_cell = envs;
      spec.iterations = iterations;
      std::vector<lfc::SweepFailure> failures;
      const auto scenarios = lfc::make_scenarios(features, instances, spec, jobs, &failures);
      const lfc::LearningSetup setup{iterations, spec.strategy, spec.noise, spec.generator.planner};
      const lfc::TuneResult result =
          lfc::tune_beta(scenarios, lfc::KernelSpec::parse(kernel_name), parse_grid(grid_text), setup, jobs);
      std::cout << "beta,median_final_cost\n";
      for (const auto& [beta, med] : result.medians) {
        std::cout << lfc::format_double(beta) << ',' << lfc::format_double(med) << '\n';
      }
      std::cout << "best_beta," << lfc::format_double(result.best_beta) << '\n';
      return failures.empty() ? 0 : 2;
    }

    if (*gen) {
      const lfc::Environment env = lfc::generate_environment(features, instances, seed, lfc::GenConfig{});
      const std::string text = lfc::environment_to_json(env).dump(2) + "\n";
      if (env_out.empty()) {
        std::cout << text;
      } else {
        lfc::write_text(env_out, text);
      }
      return 0;
    }

    if (*show) {
      std::ifstream in(env_in);
      if (!in) throw lfc::InvalidArgument("cannot open " + env_in, "file");
      const lfc::Environment env = lfc::environment_from_json(lfc::Json::parse(in));
      std::cout << "dim " << env.dim() << ", " << env.num_types << " feature types, " << env.obstacles.size()
                << " obstacles, seed " << env.seed << '\n';
      std::cout << "start [" << env.start.transpose() << "]  goal [" << env.goal.transpose() << "]\n";
      for (const lfc::Obstacle& o : env.obstacles) {
        std::cout << "  type " << o.type_id << " at [" << o.position.transpose() << "] radius " << o.radius << '\n';
      }
      if (env.ground_truth_w) {
        std::cout << "ground truth w [" << env.ground_truth_w->transpose() << "]\n";
        const lfc::Reference ref = lfc::make_reference(env, lfc::PlannerConfig{});
        std::cout << "cost(straight line) " << lfc::format_double(ref.straight_cost) << "  cost(optimal) "
                  << lfc::format_double(ref.optimal_cost) << '\n';
      }
      return 0;
    }

    if (*check) {
      const auto problems = lfc::verify_sweep_outputs(out_dir);
      for (const auto& p : problems) std::cerr << p << '\n';
      std::cout << (problems.empty() ? "aggregates consistent with traces\n" : "aggregate mismatch\n");
      return problems.empty() ? 0 : 1;
    }
  } catch (const lfc::Error& e) {
    std::cerr << "error: " << e.what();
    if (!e.field().empty()) std::cerr << " (field " << e.field() << ")";
    std::cerr << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
