#include "iss/harness/noise_sweep.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "iss/errors.hpp"
#include "iss/harness/evaluate.hpp"
#include "iss/harness/run_record.hpp"

namespace iss::harness {

sac::SacAgent load_agent_for(const ExperimentConfig& config, const std::filesystem::path& checkpoint) {
  const auto env = envs::make_environment(config.env_id);
  sac::SacAgent agent = sac::SacAgent::load(checkpoint);
  const sac::SacAgent expected(env->observation_dim(), env->action_bounds().upper, config.sac, 0);
  if (!(agent.policy_spec() == expected.policy_spec()) || !(agent.critic_spec() == expected.critic_spec()))
    throw ConfigError("checkpoint " + checkpoint.string() + " does not match the network shapes of " + config.env_id +
                      " with sac.hidden/activation from the config");
  if (!agent.action_high().isApprox(expected.action_high()))
    throw ConfigError("checkpoint " + checkpoint.string() + " has a different action scale than " + config.env_id);
  return agent;
}

std::vector<SweepRow> noise_sweep(const ExperimentConfig& config, const std::filesystem::path& checkpoint,
                                  const std::vector<NoiseCell>& grid, std::uint64_t eval_seed) {
  const sac::SacAgent agent = load_agent_for(config, checkpoint);
  const auto env = envs::make_environment(config.env_id);

  nlohmann::json meta;
  {
    std::ifstream in(checkpoint);
    meta = nlohmann::json::parse(in).value("meta", nlohmann::json::object());
  }
  const std::string strategy = meta.value("strategy", std::string());
  const std::string seed = meta.contains("seed") ? meta["seed"].dump() : std::string();

  for (const auto& cell : grid)
    envs::NoiseSpec{cell.kind, cell.level, 0, cell.scale}.validate(env->observation_dim());

  std::vector<SweepRow> rows;
  for (const auto& cell : grid) {
    const envs::NoiseSpec spec{cell.kind, cell.level, config.eval_noise.seed, cell.scale};
    const EvalResult ev = evaluate(agent, *env, spec, config.eval_episodes, eval_seed);
    rows.push_back({config.env_id, strategy, seed, checkpoint.filename().string(), cell.kind, cell.level, cell.scale,
                    ev.mean, ev.std, config.eval_episodes});
  }
  return rows;
}

std::string sweep_header() {
  return "env_id,strategy,seed,checkpoint,noise_kind,noise_level,noise_scale,eval_mean_reward,eval_std_reward,"
         "episodes_in_eval";
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << sweep_header() << '\n';
  for (const auto& r : rows)
    out << r.env_id << ',' << r.strategy << ',' << r.seed << ',' << r.checkpoint << ',' << envs::to_string(r.kind)
        << ',' << format_real(r.level) << ',' << envs::to_string(r.scale) << ',' << format_real(r.eval_mean_reward)
        << ',' << format_real(r.eval_std_reward) << ',' << r.episodes_in_eval << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != sweep_header())
    throw std::runtime_error(path.string() + ": header does not match the noise-sweep schema");
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 10) throw std::runtime_error(path.string() + ": malformed row '" + line + "'");
    rows.push_back({f[0], f[1], f[2], f[3], envs::noise_kind_from_string(f[4]), std::stod(f[5]),
                    envs::noise_scale_from_string(f[6]), std::stod(f[7]), std::stod(f[8]), std::stoi(f[9])});
  }
  return rows;
}

} // namespace iss::harness
