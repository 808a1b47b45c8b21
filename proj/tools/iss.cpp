// iss: train, evaluate and sweep SAC agents with selectable initial-state strategies.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime abort.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "iss/errors.hpp"
#include "iss/harness/config.hpp"
#include "iss/harness/evaluate.hpp"
#include "iss/harness/noise_sweep.hpp"
#include "iss/harness/overhead.hpp"
#include "iss/harness/run_record.hpp"
#include "iss/harness/training.hpp"

namespace h = iss::harness;

namespace {

constexpr int kConfigError = 2;
constexpr int kRuntimeAbort = 3;

struct ConfigArgs {
  std::string path;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("-c,--config", path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--set", overrides, "Override a config key, e.g. --set sac.gamma=0.98")->take_all();
  }
  h::ExperimentConfig load() const { return h::load_config(path, overrides); }
};

int train(const ConfigArgs& args, std::vector<std::uint64_t> seeds, bool quiet) {
  h::ExperimentConfig config = args.load();
  if (!seeds.empty()) {
    config.seeds = seeds;
    config.validate();
  }
  h::RunOptions options;
  options.verbose = !quiet;
  const auto summary = h::run_experiment(config, options);
  for (const auto& run : summary.runs) {
    std::cout << h::run_stem(config, run.seed) << ' ' << run.status << " steps=" << run.env_steps
              << " episodes=" << run.episodes;
    if (run.best_eval_mean) std::cout << " best_eval=" << h::format_real(*run.best_eval_mean);
    if (!run.error.empty()) std::cout << " error=\"" << run.error << '"';
    std::cout << '\n';
  }
  std::cout << "records: " << summary.merged_csv.string() << '\n';
  return summary.all_ok() ? 0 : kRuntimeAbort;
}

int evaluate(const ConfigArgs& args, const std::string& checkpoint, int episodes, std::uint64_t seed) {
  const auto config = args.load();
  const auto agent = h::load_agent_for(config, checkpoint);
  const auto env = iss::envs::make_environment(config.env_id);
  const auto result = h::evaluate(agent, *env, config.eval_noise, episodes > 0 ? episodes : config.eval_episodes, seed);
  std::cout << "{\"eval_mean_reward\": " << h::format_real(result.mean)
            << ", \"eval_std_reward\": " << h::format_real(result.std)
            << ", \"episodes_in_eval\": " << result.returns.size() << "}\n";
  return 0;
}

int noise_sweep(const ConfigArgs& args, const std::vector<std::string>& checkpoints, const std::string& out,
                std::uint64_t seed) {
  const auto config = args.load();
  std::vector<h::SweepRow> rows;
  for (const auto& ck : checkpoints) {
    auto part = h::noise_sweep(config, ck, config.noise_grid, seed);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  h::write_sweep_csv(out, rows);
  std::cout << "wrote " << rows.size() << " cells to " << out << '\n';
  return 0;
}

int report_overhead(const std::vector<std::string>& inputs, const std::string& out) {
  std::vector<h::RunRow> rows;
  for (const auto& path : inputs) {
    auto part = h::read_run_csv(path);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  const auto table = h::report_overhead(rows);
  const std::string text = h::format_overhead_table(table);
  std::cout << text;
  if (!out.empty()) {
    std::ofstream f(out);
    f << "env_id,baseline_episodes,gp_episodes,baseline_ms,gp_ms,ratio\n";
    for (const auto& r : table)
      f << r.env_id << ',' << r.baseline_episodes << ',' << r.gp_episodes << ',' << h::format_real(r.baseline_ms)
        << ',' << h::format_real(r.gp_ms) << ',' << h::format_real(r.ratio) << '\n';
  }
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Initial-state selection experiments for soft actor-critic"};
  app.require_subcommand(1);

  ConfigArgs train_args, eval_args, sweep_args, validate_args;
  std::vector<std::uint64_t> train_seeds;
  bool quiet = false;
  auto* train_cmd = app.add_subcommand("train", "Train every configured seed and stream run records");
  train_args.attach(train_cmd);
  train_cmd->add_option("--seeds", train_seeds, "Run only these seeds");
  train_cmd->add_flag("-q,--quiet", quiet, "Do not log evaluations");

  std::string eval_checkpoint;
  int eval_episodes = 0;
  std::uint64_t eval_seed = 0;
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint with the config's eval noise");
  eval_args.attach(eval_cmd);
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "Checkpoint manifest (.ckpt)")->required();
  eval_cmd->add_option("--episodes", eval_episodes, "Episodes (default: eval_episodes)");
  eval_cmd->add_option("--seed", eval_seed, "Evaluation seed");

  std::vector<std::string> sweep_checkpoints;
  std::string sweep_out;
  std::uint64_t sweep_seed = 0;
  auto* sweep_cmd = app.add_subcommand("noise-sweep", "Evaluate checkpoints over the config's noise grid");
  sweep_args.attach(sweep_cmd);
  sweep_cmd->add_option("--checkpoint", sweep_checkpoints, "Checkpoint manifests (.ckpt)")->required();
  sweep_cmd->add_option("-o,--out", sweep_out, "Output CSV")->required();
  sweep_cmd->add_option("--seed", sweep_seed, "Evaluation seed");

  std::vector<std::string> overhead_inputs;
  std::string overhead_out;
  auto* overhead_cmd = app.add_subcommand("report-overhead", "Computation-time ratio of gp-condition over default");
  overhead_cmd->add_option("records", overhead_inputs, "Run-record CSVs")->required()->check(CLI::ExistingFile);
  overhead_cmd->add_option("-o,--out", overhead_out, "Also write the table as CSV");

  bool print_config = false;
  auto* validate_cmd = app.add_subcommand("validate-config", "Check a config and exit");
  validate_args.attach(validate_cmd);
  validate_cmd->add_flag("--print", print_config, "Print the resolved config with defaults filled in");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*train_cmd) return train(train_args, train_seeds, quiet);
    if (*eval_cmd) return evaluate(eval_args, eval_checkpoint, eval_episodes, eval_seed);
    if (*sweep_cmd) return noise_sweep(sweep_args, sweep_checkpoints, sweep_out, sweep_seed);
    if (*overhead_cmd) return report_overhead(overhead_inputs, overhead_out);
    if (*validate_cmd) {
      const auto config = validate_args.load();
      if (print_config) std::cout << h::to_json(config).dump(2) << '\n';
      std::cout << "config ok\n";
      return 0;
    }
  } catch (const iss::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeAbort;
  }
  return 0;
}
