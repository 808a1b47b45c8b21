#include "iss/harness/run_record.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

namespace iss::harness {

namespace {

void check_text(const std::string& s, const char* column) {
  if (s.find_first_of(",\n\r\"") != std::string::npos)
    throw std::invalid_argument(std::string("csv field '") + column + "' contains a reserved character: " + s);
}

std::string cell(const std::optional<double>& v) { return v ? format_real(*v) : std::string(); }
std::string cell(const std::optional<int>& v) { return v ? std::to_string(*v) : std::string(); }

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) return out;
    start = comma + 1;
  }
}

template <typename T>
T parse_integer(const std::string& s, const char* column) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::runtime_error(std::string("bad integer in column ") + column + ": '" + s + "'");
  return v;
}

std::optional<double> parse_real(const std::string& s, const char* column) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size())
    throw std::runtime_error(std::string("bad real in column ") + column + ": '" + s + "'");
  return v;
}

} // namespace

const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols{
      "env_id",           "strategy",          "seed",           "env_step",   "episode",
      "eval_mean_reward", "eval_std_reward",   "episodes_in_eval", "selection_branch",
      "selection_overhead_ms", "episode_return", "noise_kind",     "noise_level", "wall_ms"};
  return cols;
}

std::string csv_header() {
  std::string h;
  for (const auto& c : csv_columns()) h += (h.empty() ? "" : ",") + c;
  return h;
}

bool is_wall_clock_column(const std::string& name) { return name == "wall_ms" || name == "selection_overhead_ms"; }

std::string format_real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string format_row(const RunRow& r) {
  check_text(r.env_id, "env_id");
  check_text(r.strategy, "strategy");
  check_text(r.selection_branch, "selection_branch");
  check_text(r.noise_kind, "noise_kind");
  std::ostringstream s;
  s << r.env_id << ',' << r.strategy << ',' << r.seed << ',' << r.env_step << ',' << r.episode << ','
    << cell(r.eval_mean_reward) << ',' << cell(r.eval_std_reward) << ',' << cell(r.episodes_in_eval) << ','
    << r.selection_branch << ',' << cell(r.selection_overhead_ms) << ',' << cell(r.episode_return) << ','
    << r.noise_kind << ',' << cell(r.noise_level) << ',' << cell(r.wall_ms);
  return s.str();
}

RunRow parse_row(const std::string& line) {
  const auto f = split(line);
  if (f.size() != csv_columns().size())
    throw std::runtime_error("expected " + std::to_string(csv_columns().size()) + " fields, got " +
                             std::to_string(f.size()));
  RunRow r;
  r.env_id = f[0];
  r.strategy = f[1];
  r.seed = parse_integer<std::uint64_t>(f[2], "seed");
  r.env_step = parse_integer<long>(f[3], "env_step");
  r.episode = parse_integer<long>(f[4], "episode");
  r.eval_mean_reward = parse_real(f[5], "eval_mean_reward");
  r.eval_std_reward = parse_real(f[6], "eval_std_reward");
  if (!f[7].empty()) r.episodes_in_eval = parse_integer<int>(f[7], "episodes_in_eval");
  r.selection_branch = f[8];
  r.selection_overhead_ms = parse_real(f[9], "selection_overhead_ms");
  r.episode_return = parse_real(f[10], "episode_return");
  r.noise_kind = f[11];
  r.noise_level = parse_real(f[12], "noise_level");
  r.wall_ms = parse_real(f[13], "wall_ms");
  return r;
}

std::vector<RunRow> read_run_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  if (line != csv_header())
    throw std::runtime_error(path.string() + ": header does not match the run-record schema");
  std::vector<RunRow> rows;
  for (long n = 2; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    try {
      rows.push_back(parse_row(line));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return rows;
}

void write_run_csv(const std::filesystem::path& path, const std::vector<RunRow>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << csv_header() << '\n';
  for (const auto& r : rows) out << format_row(r) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

RunWriter::RunWriter(const std::filesystem::path& path) : out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw std::runtime_error("cannot write " + path.string());
  out_ << csv_header() << '\n';
  out_.flush();
}

RunWriter::~RunWriter() {
  try {
    flush();
  } catch (...) {
  }
}

RunRow& RunWriter::stage(long env_step, const RunRow& base) {
  if (pending_ && pending_->env_step == env_step) return *pending_;
  if (env_step <= last_step_ || (pending_ && env_step < pending_->env_step))
    throw std::logic_error("run rows must have strictly increasing env_step");
  flush();
  pending_ = base;
  pending_->env_step = env_step;
  return *pending_;
}

void RunWriter::flush() {
  if (!pending_) return;
  out_ << format_row(*pending_) << '\n';
  out_.flush();
  last_step_ = pending_->env_step;
  pending_.reset();
}

} // namespace iss::harness
