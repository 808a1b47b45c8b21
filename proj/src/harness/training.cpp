#include "iss/harness/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "iss/envs/noise.hpp"
#include "iss/errors.hpp"
#include "iss/harness/evaluate.hpp"
#include "iss/harness/run_record.hpp"
#include "iss/metric/condition_number.hpp"
#include "iss/sac/replay_buffer.hpp"

namespace iss::harness {

namespace fs = std::filesystem;

namespace {

// Sub-seed stream ids under the run seed.
enum : std::uint64_t {
  kAgentStream = 1,
  kActStream,
  kUpdateStream,
  kResetStream,
  kTrainNoiseStream,
  kEvalStream,
  kUniformStream,
  kSelectorStream,
};

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) { return std::chrono::duration<double, std::milli>(Clock::now() - t0).count(); }

std::mutex log_mutex;

void log_line(const std::string& s) {
  std::lock_guard<std::mutex> lock(log_mutex);
  std::clog << s << std::endl;
}

Eigen::VectorXd uniform_in(const envs::Bounds& b, Rng& rng) {
  Eigen::VectorXd x(b.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = std::uniform_real_distribution<double>(b.lower[i], b.upper[i])(rng);
  return x;
}

void remove_checkpoint(const fs::path& manifest) {
  std::error_code ec;
  const std::string stem = manifest.stem().string();
  for (const auto& entry : fs::directory_iterator(manifest.parent_path(), ec)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind(stem + ".", 0) == 0) fs::remove(entry.path(), ec);
  }
}

} // namespace

InitialStateChoice DefaultStrategy::choose(const EpisodeStart& start) {
  return {start.env.canonical_initial_state(start.canonical_rng), "canonical", 0.0};
}

UniformWideStrategy::UniformWideStrategy(std::uint64_t seed) : rng_(derive_seed(seed, {kUniformStream})) {}

InitialStateChoice UniformWideStrategy::choose(const EpisodeStart& start) {
  const auto t0 = Clock::now();
  envs::StateVector s{uniform_in(start.env.state_bounds(), rng_)};
  return {std::move(s), "uniform", ms_since(t0)};
}

GpConditionStrategy::GpConditionStrategy(const envs::Environment& env, const ExperimentConfig& config,
                                         std::uint64_t seed)
    : metric_(config.metric), seed_(seed),
      selector_(env.state_bounds(), config.selector, derive_seed(seed, {kSelectorStream})) {}

InitialStateChoice GpConditionStrategy::choose(const EpisodeStart& start) {
  const auto t0 = Clock::now();
  const selector::ScoreFn score = [&](const std::vector<envs::StateVector>& states, int epoch) {
    metric::MetricSpec spec = metric_;
    spec.seed = derive_seed(metric_.seed, {seed_, std::uint64_t(epoch)});
    const auto samples = metric::score_batch(start.agent, states, start.env, spec);
    Eigen::VectorXd y(Eigen::Index(samples.size()));
    for (std::size_t i = 0; i < samples.size(); ++i) y[Eigen::Index(i)] = samples[i].score;
    return y;
  };
  last_ = selector_.run_epoch(score);
  return {last_->selection.state, selector::to_string(last_->selection.branch), ms_since(t0)};
}

std::unique_ptr<InitialStateStrategy> make_strategy(const ExperimentConfig& config, const envs::Environment& env,
                                                    std::uint64_t seed) {
  switch (config.strategy) {
  case Strategy::default_reset: return std::make_unique<DefaultStrategy>();
  case Strategy::uniform_wide: return std::make_unique<UniformWideStrategy>(seed);
  case Strategy::gp_condition: return std::make_unique<GpConditionStrategy>(env, config, seed);
  }
  throw ConfigError("unknown strategy");
}

std::string run_stem(const ExperimentConfig& config, std::uint64_t seed) {
  return config.env_id + "_" + to_string(config.strategy) + "_" + std::to_string(seed);
}

fs::path checkpoint_dir(const ExperimentConfig& config) { return fs::path(config.output_dir) / "checkpoints"; }

RunSummary run_training(const ExperimentConfig& config, std::uint64_t seed, const RunOptions& options) {
  const auto proto = envs::make_environment(config.env_id);
  const std::string stem = run_stem(config, seed);
  const fs::path out_dir(config.output_dir);
  fs::create_directories(out_dir);

  RunSummary summary;
  summary.seed = seed;
  summary.csv = out_dir / (stem + ".csv");
  summary.run_info = out_dir / (stem + ".run.json");
  RunWriter writer(summary.csv);

  RunRow base;
  base.env_id = config.env_id;
  base.strategy = to_string(config.strategy);
  base.seed = seed;
  base.noise_kind = envs::to_string(config.eval_noise.kind);
  base.noise_level = config.eval_noise.level;

  envs::NoisyEnvironment train_env(proto->clone(), config.train_noise);
  sac::SacAgent agent(proto->observation_dim(), proto->action_bounds().upper, config.sac,
                      derive_seed(seed, {kAgentStream}));
  sac::ReplayBuffer buffer(config.sac.buffer_capacity, proto->observation_dim(), proto->action_dim());
  Rng act_rng = make_rng(seed, {kActStream});
  Rng update_rng = make_rng(seed, {kUpdateStream});
  Rng reset_rng = make_rng(seed, {kResetStream});
  const std::uint64_t eval_seed = derive_seed(seed, {kEvalStream});
  auto strategy = options.strategy_factory ? options.strategy_factory(config, *proto, seed)
                                           : make_strategy(config, *proto, seed);

  const long warmup = config.sac.warmup_steps;
  const std::string tag = "[" + stem + "] ";
  std::optional<long> best_step;
  long step = 0;
  long episode = 0;

  auto save = [&](long at, double eval_mean) {
    nlohmann::json meta = {{"env_id", config.env_id}, {"strategy", to_string(config.strategy)},
                           {"seed", seed},            {"env_step", at},
                           {"eval_mean_reward", eval_mean}};
    return agent.save(checkpoint_dir(config), stem + "_" + std::to_string(at), meta.dump());
  };

  try {
    bool stop = false;
    while (step < config.total_steps && !stop) {
      InitialStateChoice choice;
      if (step < warmup)
        choice = {proto->canonical_initial_state(reset_rng), "canonical", 0.0};
      else
        choice = strategy->choose({*proto, agent, step, episode, reset_rng});

      const auto episode_start = Clock::now();
      double eval_ms = 0.0;
      double episode_return = 0.0;
      Eigen::VectorXd obs = train_env.reset_to(choice.state, derive_seed(seed, {kTrainNoiseStream, std::uint64_t(episode)}));

      while (step < config.total_steps) {
        const Eigen::VectorXd action = step < warmup ? uniform_in(proto->action_bounds(), act_rng)
                                                     : agent.act(obs, sac::ActMode::stochastic, act_rng);
        const auto r = train_env.step(action);
        buffer.add(obs, action, r.reward, r.observation, r.done);
        obs = r.observation;
        episode_return += r.reward;
        ++step;
        if (step >= warmup && buffer.size() >= config.sac.batch_size)
          agent.update(buffer.sample(config.sac.batch_size, update_rng), update_rng);

        const bool ended = r.done || r.truncated;
        if (ended) {
          RunRow& row = writer.stage(step, base);
          row.episode = episode;
          row.episode_return = episode_return;
          row.selection_branch = choice.branch;
          row.selection_overhead_ms = choice.overhead_ms;
          row.wall_ms = ms_since(episode_start) - eval_ms;
        }

        if (step % config.eval_interval == 0) {
          const auto t0 = Clock::now();
          const EvalResult ev = evaluate(agent, *proto, config.eval_noise, config.eval_episodes, eval_seed);
          const double took = ms_since(t0);
          eval_ms += took;
          RunRow& row = writer.stage(step, base);
          row.episode = episode;
          row.eval_mean_reward = ev.mean;
          row.eval_std_reward = ev.std;
          row.episodes_in_eval = config.eval_episodes;
          if (!row.episode_return) row.wall_ms = took;
          if (options.verbose) log_line(tag + "step " + std::to_string(step) + " eval " + format_real(ev.mean));

          if (!summary.best_eval_mean || ev.mean > *summary.best_eval_mean) {
            summary.best_eval_mean = ev.mean;
            if (config.checkpoints) {
              if (summary.best_checkpoint) remove_checkpoint(*summary.best_checkpoint);
              summary.best_checkpoint = save(step, ev.mean);
              best_step = step;
            }
          }
          if (config.stop_at_reward && ev.mean >= *config.stop_at_reward) stop = true;
        }
        if (ended || stop) break;
      }
      ++episode;
    }
    writer.flush();
    if (config.checkpoints && step > 0) {
      if (best_step && *best_step == step)
        summary.final_checkpoint = summary.best_checkpoint;
      else
        summary.final_checkpoint = save(step, summary.best_eval_mean.value_or(std::nan("")));
    }
  } catch (const NumericError& e) {
    summary.status = "aborted";
    summary.error = e.what();
    RunRow& row = writer.stage(std::max(step, writer.last_step() + 1), base);
    row.episode = episode;
    row.selection_branch = "abort";
    writer.flush();
    log_line(tag + "aborted at step " + std::to_string(step) + ": " + e.what());
  }

  summary.env_steps = step;
  summary.episodes = episode;

  nlohmann::json info = {
      {"env_id", config.env_id},
      {"strategy", to_string(config.strategy)},
      {"seed", seed},
      {"status", summary.status},
      {"error", summary.error},
      {"env_steps", summary.env_steps},
      {"episodes", summary.episodes},
      {"best_eval_mean_reward", summary.best_eval_mean ? nlohmann::json(*summary.best_eval_mean) : nlohmann::json()},
      {"best_checkpoint", summary.best_checkpoint ? nlohmann::json(summary.best_checkpoint->string()) : nlohmann::json()},
      {"final_checkpoint", summary.final_checkpoint ? nlohmann::json(summary.final_checkpoint->string()) : nlohmann::json()},
      {"csv", summary.csv.string()},
  };
  std::ofstream(summary.run_info) << info.dump(2) << '\n';
  return summary;
}

bool ExperimentSummary::all_ok() const {
  return std::all_of(runs.begin(), runs.end(), [](const RunSummary& r) { return r.status == "ok"; });
}

ExperimentSummary run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  std::vector<std::uint64_t> seeds = config.seeds;
  std::sort(seeds.begin(), seeds.end());

  ExperimentSummary out;
  out.runs.resize(seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < seeds.size();) {
      try {
        out.runs[i] = run_training(config, seeds[i], options);
      } catch (const std::exception& e) {
        out.runs[i].seed = seeds[i];
        out.runs[i].status = "failed";
        out.runs[i].error = e.what();
        log_line("[" + run_stem(config, seeds[i]) + "] failed: " + e.what());
      }
    }
  };
  const auto n_threads = std::min<std::size_t>(std::size_t(config.jobs), seeds.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  const fs::path dir(config.output_dir);
  fs::create_directories(dir);
  out.merged_csv = dir / (config.env_id + "_" + to_string(config.strategy) + ".csv");
  std::ofstream merged(out.merged_csv, std::ios::binary | std::ios::trunc);
  merged << csv_header() << '\n';
  for (const auto& run : out.runs) {
    std::ifstream in(dir / (run_stem(config, run.seed) + ".csv"), std::ios::binary);
    std::string line;
    if (!in || !std::getline(in, line)) continue;
    while (std::getline(in, line))
      if (!line.empty()) merged << line << '\n';
  }
  std::ofstream(dir / (config.env_id + "_" + to_string(config.strategy) + ".config.json"))
      << to_json(config).dump(2) << '\n';
  return out;
}

} // namespace iss::harness
