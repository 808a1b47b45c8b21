#include "iss/harness/config.hpp"

#include <fstream>
#include <set>

#include "iss/errors.hpp"

namespace iss::harness {

using nlohmann::json;

std::string to_string(Strategy s) {
  switch (s) {
  case Strategy::default_reset: return "default";
  case Strategy::uniform_wide: return "uniform-wide";
  case Strategy::gp_condition: return "gp-condition";
  }
  return "default";
}

Strategy strategy_from_string(const std::string& name) {
  if (name == "default") return Strategy::default_reset;
  if (name == "uniform-wide") return Strategy::uniform_wide;
  if (name == "gp-condition") return Strategy::gp_condition;
  throw ConfigError("unknown strategy '" + name + "' (expected default, uniform-wide or gp-condition)");
}

std::vector<NoiseCell> default_noise_grid() {
  using envs::NoiseKind;
  using envs::NoiseScale;
  return {
      {NoiseKind::gaussian, 0.0, NoiseScale::range}, {NoiseKind::gaussian, 0.05, NoiseScale::range},
      {NoiseKind::gaussian, 0.1, NoiseScale::range}, {NoiseKind::linf, 0.05, NoiseScale::range},
      {NoiseKind::linf, 0.1, NoiseScale::range},     {NoiseKind::l2, 0.1, NoiseScale::range},
      {NoiseKind::l2, 0.2, NoiseScale::range},       {NoiseKind::l0, 1.0, NoiseScale::range},
  };
}

namespace {

/// Typed field reader over one JSON object; remembers which keys were consumed.
class Fields {
public:
  Fields(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(where() + " must be an object");
  }

  void read(const char* key, int& dst) { integer(key, dst); }
  void read(const char* key, long& dst) { integer(key, dst); }
  void read(const char* key, std::uint64_t& dst) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned()) fail(key, "a non-negative integer");
      dst = v->get<std::uint64_t>();
    }
  }
  void read(const char* key, double& dst) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(key, "a number");
      dst = v->get<double>();
    }
  }
  void read(const char* key, bool& dst) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail(key, "a boolean");
      dst = v->get<bool>();
    }
  }
  void read(const char* key, std::string& dst) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(key, "a string");
      dst = v->get<std::string>();
    }
  }
  void read(const char* key, std::optional<double>& dst) {
    if (const json* v = find(key)) {
      if (v->is_null()) {
        dst.reset();
        return;
      }
      if (!v->is_number()) fail(key, "a number or null");
      dst = v->get<double>();
    }
  }
  template <typename T>
  void read(const char* key, std::vector<T>& dst) {
    if (const json* v = find(key)) {
      if (!v->is_array()) fail(key, "an array");
      std::vector<T> out;
      for (const auto& e : *v) {
        if constexpr (std::is_same_v<T, std::uint64_t>) {
          if (!e.is_number_unsigned()) fail(key, "an array of non-negative integers");
        } else {
          if (!e.is_number_integer()) fail(key, "an array of integers");
        }
        out.push_back(e.get<T>());
      }
      dst = std::move(out);
    }
  }

  /// Reads a string and maps it through `convert`, rewording conversion errors.
  template <typename T, typename F>
  void read_enum(const char* key, T& dst, F convert) {
    std::string name;
    if (!find(key)) return;
    read(key, name);
    try {
      dst = convert(name);
    } catch (const std::exception& e) {
      throw ConfigError(qualify(key) + ": " + e.what());
    }
  }

  const json* child(const char* key) { return find(key); }
  std::string qualify(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : obj_.items())
      if (!seen_.count(key)) throw ConfigError("unknown key '" + qualify(key) + "'");
  }

private:
  const json* find(const char* key) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }
  template <typename T>
  void integer(const char* key, T& dst) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) fail(key, "an integer");
      dst = v->get<T>();
    }
  }
  [[noreturn]] void fail(const char* key, const char* expected) const {
    throw ConfigError(qualify(key) + " must be " + expected);
  }
  std::string where() const { return path_.empty() ? "config" : path_; }

  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_sac(const json& j, sac::SacConfig& c) {
  Fields f(j, "sac");
  f.read("hidden", c.hidden);
  f.read_enum("activation", c.activation, nn::activation_from_string);
  f.read("actor_lr", c.actor_lr);
  f.read("critic_lr", c.critic_lr);
  f.read("alpha_lr", c.alpha_lr);
  f.read("gamma", c.gamma);
  f.read("tau", c.tau);
  f.read("batch_size", c.batch_size);
  f.read("buffer_capacity", c.buffer_capacity);
  f.read("warmup_steps", c.warmup_steps);
  f.read("auto_alpha", c.auto_alpha);
  f.read("initial_alpha", c.initial_alpha);
  f.read("target_entropy", c.target_entropy);
  f.finish();
}

void read_metric(const json& j, metric::MetricSpec& m) {
  Fields f(j, "metric");
  f.read("n_actions", m.n_actions);
  f.read_enum("variant", m.variant, metric::metric_variant_from_string);
  f.read_enum("critic", m.critic, metric::critic_choice_from_string);
  f.read("denom_floor", m.denom_floor);
  f.read("seed", m.seed);
  f.finish();
}

void read_selector(const json& j, selector::SelectorConfig& s) {
  Fields f(j, "selector");
  f.read("pool_size", s.pool_size);
  f.read("variance_threshold", s.variance_threshold);
  f.read("shift_sigma", s.shift_sigma);
  f.read("resample_fraction", s.resample_fraction);
  if (const json* gp = f.child("gp")) {
    Fields g(*gp, "selector.gp");
    g.read("lengthscale", s.gp.lengthscale);
    g.read("signal_var", s.gp.signal_var);
    g.read("noise_var", s.gp.noise_var);
    g.read("jitter", s.gp.jitter);
    g.finish();
  }
  f.finish();
}

void read_noise(const json& j, const std::string& path, envs::NoiseSpec& n) {
  Fields f(j, path);
  f.read_enum("kind", n.kind, envs::noise_kind_from_string);
  f.read("level", n.level);
  f.read_enum("scale", n.scale, envs::noise_scale_from_string);
  f.read("seed", n.seed);
  f.finish();
}

std::vector<NoiseCell> read_grid(const json& j) {
  if (!j.is_array()) throw ConfigError("noise_grid must be an array");
  std::vector<NoiseCell> cells;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string path = "noise_grid[" + std::to_string(i) + "]";
    Fields f(j[i], path);
    NoiseCell c;
    f.read_enum("kind", c.kind, envs::noise_kind_from_string);
    f.read("level", c.level);
    f.read_enum("scale", c.scale, envs::noise_scale_from_string);
    f.finish();
    cells.push_back(c);
  }
  return cells;
}

json noise_json(const envs::NoiseSpec& n) {
  return {{"kind", envs::to_string(n.kind)}, {"level", n.level}, {"scale", envs::to_string(n.scale)}, {"seed", n.seed}};
}

template <typename F>
void rethrow_as_config(const std::string& key, F&& check) {
  try {
    check();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

} // namespace

ExperimentConfig config_from_json(const json& doc) {
  ExperimentConfig c;
  Fields f(doc, "");
  f.read("env_id", c.env_id);
  f.read_enum("strategy", c.strategy, strategy_from_string);
  f.read("total_steps", c.total_steps);
  f.read("eval_interval", c.eval_interval);
  f.read("eval_episodes", c.eval_episodes);
  f.read("seeds", c.seeds);
  f.read("stop_at_reward", c.stop_at_reward);
  f.read("output_dir", c.output_dir);
  f.read("jobs", c.jobs);
  f.read("checkpoints", c.checkpoints);
  if (const json* j = f.child("sac")) read_sac(*j, c.sac);
  if (const json* j = f.child("metric")) read_metric(*j, c.metric);
  if (const json* j = f.child("selector")) read_selector(*j, c.selector);
  if (const json* j = f.child("train_noise")) read_noise(*j, "train_noise", c.train_noise);
  if (const json* j = f.child("eval_noise")) read_noise(*j, "eval_noise", c.eval_noise);
  if (const json* j = f.child("noise_grid")) c.noise_grid = read_grid(*j);
  f.finish();
  return c;
}

json to_json(const ExperimentConfig& c) {
  json grid = json::array();
  for (const auto& cell : c.noise_grid)
    grid.push_back({{"kind", envs::to_string(cell.kind)}, {"level", cell.level}, {"scale", envs::to_string(cell.scale)}});
  return {
      {"env_id", c.env_id},
      {"strategy", to_string(c.strategy)},
      {"total_steps", c.total_steps},
      {"eval_interval", c.eval_interval},
      {"eval_episodes", c.eval_episodes},
      {"seeds", c.seeds},
      {"stop_at_reward", c.stop_at_reward ? json(*c.stop_at_reward) : json(nullptr)},
      {"output_dir", c.output_dir},
      {"jobs", c.jobs},
      {"checkpoints", c.checkpoints},
      {"sac",
       {{"hidden", c.sac.hidden},
        {"activation", nn::to_string(c.sac.activation)},
        {"actor_lr", c.sac.actor_lr},
        {"critic_lr", c.sac.critic_lr},
        {"alpha_lr", c.sac.alpha_lr},
        {"gamma", c.sac.gamma},
        {"tau", c.sac.tau},
        {"batch_size", c.sac.batch_size},
        {"buffer_capacity", c.sac.buffer_capacity},
        {"warmup_steps", c.sac.warmup_steps},
        {"auto_alpha", c.sac.auto_alpha},
        {"initial_alpha", c.sac.initial_alpha},
        {"target_entropy", c.sac.target_entropy ? json(*c.sac.target_entropy) : json(nullptr)}}},
      {"metric",
       {{"n_actions", c.metric.n_actions},
        {"variant", metric::to_string(c.metric.variant)},
        {"critic", metric::to_string(c.metric.critic)},
        {"denom_floor", c.metric.denom_floor},
        {"seed", c.metric.seed}}},
      {"selector",
       {{"pool_size", c.selector.pool_size},
        {"variance_threshold", c.selector.variance_threshold},
        {"shift_sigma", c.selector.shift_sigma},
        {"resample_fraction", c.selector.resample_fraction},
        {"gp",
         {{"lengthscale", c.selector.gp.lengthscale},
          {"signal_var", c.selector.gp.signal_var},
          {"noise_var", c.selector.gp.noise_var},
          {"jitter", c.selector.gp.jitter}}}}},
      {"train_noise", noise_json(c.train_noise)},
      {"eval_noise", noise_json(c.eval_noise)},
      {"noise_grid", grid},
  };
}

void ExperimentConfig::validate() const {
  std::unique_ptr<envs::Environment> env;
  try {
    env = envs::make_environment(env_id);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("env_id: ") + e.what());
  }
  if (total_steps < 0) throw ConfigError("total_steps must be >= 0");
  if (eval_interval < 1) throw ConfigError("eval_interval must be >= 1");
  if (eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    throw ConfigError("seeds must be distinct");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  rethrow_as_config("sac", [&] { sac.validate(); });
  rethrow_as_config("metric", [&] { metric.validate(); });
  rethrow_as_config("selector", [&] { selector.validate(); });
  rethrow_as_config("train_noise", [&] { train_noise.validate(env->observation_dim()); });
  rethrow_as_config("eval_noise", [&] { eval_noise.validate(env->observation_dim()); });
  for (std::size_t i = 0; i < noise_grid.size(); ++i)
    rethrow_as_config("noise_grid[" + std::to_string(i) + "]", [&] {
      envs::NoiseSpec{noise_grid[i].kind, noise_grid[i].level, 0, noise_grid[i].scale}.validate(env->observation_dim());
    });
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not of the form key=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);

  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("override '" + assignment + "' has an empty key segment");
    if (!node->is_object()) {
      if (!node->is_null()) throw ConfigError("override '" + path + "' descends into a non-object value");
      *node = json::object();
    }
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

json read_config_document(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  json doc = read_config_document(path);
  for (const auto& o : overrides) apply_override(doc, o);
  ExperimentConfig c = config_from_json(doc);
  c.validate();
  return c;
}

} // namespace iss::harness
