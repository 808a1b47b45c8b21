#include "iss/harness/overhead.hpp"

#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>

namespace iss::harness {

namespace {

struct Tally {
  double total = 0.0;
  long count = 0;
};

} // namespace

std::vector<OverheadRow> report_overhead(const std::vector<RunRow>& rows) {
  std::map<std::string, Tally> baseline, gp;
  std::set<std::string> envs;
  for (const auto& r : rows) {
    envs.insert(r.env_id);
    if (!r.episode_return || !r.wall_ms) continue;
    if (r.strategy == "default") {
      auto& t = baseline[r.env_id];
      t.total += *r.wall_ms;
      ++t.count;
    } else if (r.strategy == "gp-condition") {
      auto& t = gp[r.env_id];
      t.total += *r.wall_ms + r.selection_overhead_ms.value_or(0.0);
      ++t.count;
    }
  }

  std::string missing;
  auto note = [&](const std::string& what, const std::string& env) {
    missing += (missing.empty() ? "" : "; ") + what + (env.empty() ? "" : " for " + env);
  };
  if (envs.empty()) {
    note("missing gp-condition runs", "");
    note("missing baseline runs", "");
  }
  for (const auto& env : envs) {
    if (!gp.count(env)) note("missing gp-condition runs", env);
    if (!baseline.count(env)) note("missing baseline runs", env);
  }
  if (!missing.empty()) throw std::invalid_argument(missing);

  std::vector<OverheadRow> table;
  for (const auto& env : envs) {
    OverheadRow row;
    row.env_id = env;
    row.baseline_episodes = baseline[env].count;
    row.gp_episodes = gp[env].count;
    row.baseline_ms = baseline[env].total / double(row.baseline_episodes);
    row.gp_ms = gp[env].total / double(row.gp_episodes);
    row.ratio = row.gp_ms / row.baseline_ms;
    table.push_back(row);
  }
  return table;
}

std::string format_overhead_table(const std::vector<OverheadRow>& table) {
  std::string out = "env_id                     baseline_ms  gp_ms        ratio     time (baseline / gp)\n";
  char buf[256];
  for (const auto& r : table) {
    std::snprintf(buf, sizeof buf, "%-26s %-12.3f %-12.3f %-9.3f 1X / %.1fX\n", r.env_id.c_str(), r.baseline_ms,
                  r.gp_ms, r.ratio, r.ratio);
    out += buf;
  }
  return out;
}

} // namespace iss::harness
