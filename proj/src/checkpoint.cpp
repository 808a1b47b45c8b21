#include "iss/nn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

namespace iss::nn {

namespace {

std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return r;
  }
  return v;
}

} // namespace

void write_checkpoint(std::ostream& out, const MlpSpec& spec, const ParameterVector<double>& params) {
  spec.validate();
  check_parameters(spec, params.size());
  if (!params.allFinite()) throw NumericError("checkpoint", "refusing to write non-finite parameters");

  nlohmann::json header = {
      {"schema", kCheckpointSchema},
      {"input_dim", spec.input_dim},
      {"hidden", spec.hidden},
      {"output_dim", spec.output_dim},
      {"activation", to_string(spec.activation)},
      {"layout", "layer-major; weights row-major (fan_out x fan_in) then bias"},
      {"dtype", "f64le"},
      {"parameter_count", spec.parameter_count()},
  };
  out << header.dump() << '\n';
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(params[i]));
    char buf[8];
    std::memcpy(buf, &bits, 8);
    out.write(buf, 8);
  }
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

NetworkCheckpoint read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("checkpoint: missing header");
  const auto header = nlohmann::json::parse(line);
  if (header.value("schema", "") != kCheckpointSchema)
    throw std::runtime_error("checkpoint: unsupported schema '" + header.value("schema", "") + "'");
  if (header.value("dtype", "") != "f64le") throw std::runtime_error("checkpoint: unsupported dtype");

  NetworkCheckpoint ck;
  ck.spec.input_dim = header.at("input_dim").get<int>();
  ck.spec.hidden = header.at("hidden").get<std::vector<int>>();
  ck.spec.output_dim = header.at("output_dim").get<int>();
  ck.spec.activation = activation_from_string(header.at("activation").get<std::string>());
  ck.spec.validate();
  const auto count = header.at("parameter_count").get<std::ptrdiff_t>();
  check_parameters(ck.spec, count);

  ck.params.resize(count);
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    char buf[8];
    if (!in.read(buf, 8)) throw std::runtime_error("checkpoint: truncated parameter data");
    std::uint64_t bits = 0;
    std::memcpy(&bits, buf, 8);
    ck.params[i] = std::bit_cast<double>(to_little_endian(bits));
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const MlpSpec& spec,
                     const ParameterVector<double>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path.string());
  write_checkpoint(out, spec, params);
}

NetworkCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  return read_checkpoint(in);
}

} // namespace iss::nn
