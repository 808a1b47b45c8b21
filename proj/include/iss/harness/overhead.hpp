#pragma once

#include <string>
#include <vector>

#include "iss/harness/run_record.hpp"

namespace iss::harness {

struct OverheadRow {
  std::string env_id;
  long baseline_episodes = 0;
  long gp_episodes = 0;
  double baseline_ms = 0.0; // mean wall_ms per default-strategy episode
  double gp_ms = 0.0;       // mean (selection_overhead_ms + wall_ms) per gp-condition episode
  double ratio = 0.0;
};

/// Per-env computation-time ratio over episode rows (rows with an episode_return).
/// Throws std::invalid_argument listing every env missing "gp-condition" or
/// "default" rows.
std::vector<OverheadRow> report_overhead(const std::vector<RunRow>& rows);

/// Plain-text table with a "1X / <ratio>X" column.
std::string format_overhead_table(const std::vector<OverheadRow>& table);

} // namespace iss::harness
