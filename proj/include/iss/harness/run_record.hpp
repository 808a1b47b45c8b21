#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace iss::harness {

/// One streamed metrics row. Empty optionals become empty CSV cells.
struct RunRow {
  std::string env_id;
  std::string strategy;
  std::uint64_t seed = 0;
  long env_step = 0;
  long episode = 0;
  std::optional<double> eval_mean_reward;
  std::optional<double> eval_std_reward;
  std::optional<int> episodes_in_eval;
  std::string selection_branch;
  std::optional<double> selection_overhead_ms;
  std::optional<double> episode_return;
  std::string noise_kind;
  std::optional<double> noise_level;
  std::optional<double> wall_ms;

  bool operator==(const RunRow&) const = default;
};

/// Column names in file order. The header row is exactly these, comma-joined.
const std::vector<std::string>& csv_columns();
std::string csv_header();

/// Columns holding wall-clock measurements; excluded from determinism checks.
bool is_wall_clock_column(const std::string& name);

/// Reals are printed with 17 significant digits, which round-trips doubles.
std::string format_real(double x);
std::string format_row(const RunRow& row);
RunRow parse_row(const std::string& line);

/// Parses a whole file, checking the header. Throws std::runtime_error with the
/// line number on malformed input.
std::vector<RunRow> read_run_csv(const std::filesystem::path& path);
void write_run_csv(const std::filesystem::path& path, const std::vector<RunRow>& rows);

/// Append-only writer that flushes each row and enforces strictly increasing
/// env_step. A row staged with `stage` may be extended until a later step arrives.
class RunWriter {
public:
  explicit RunWriter(const std::filesystem::path& path);
  ~RunWriter();

  RunWriter(const RunWriter&) = delete;
  RunWriter& operator=(const RunWriter&) = delete;

  /// Returns the pending row for `env_step`, creating it (from `base`) if the
  /// pending row belongs to an earlier step.
  RunRow& stage(long env_step, const RunRow& base);
  void flush();
  long last_step() const { return last_step_; }

private:
  std::ofstream out_;
  std::optional<RunRow> pending_;
  long last_step_ = -1;
};

} // namespace iss::harness
