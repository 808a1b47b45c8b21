#pragma once

#include <filesystem>
#include <iosfwd>

#include "iss/nn/mlp.hpp"

namespace iss::nn {

inline constexpr const char* kCheckpointSchema = "iss.mlp-checkpoint/1";

struct NetworkCheckpoint {
  MlpSpec spec;
  ParameterVector<double> params;
};

/// One JSON header line (schema, spec, layout) followed by the parameters as
/// little-endian IEEE-754 doubles in layout order.
void write_checkpoint(std::ostream& out, const MlpSpec& spec, const ParameterVector<double>& params);
NetworkCheckpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const MlpSpec& spec,
                     const ParameterVector<double>& params);
NetworkCheckpoint load_checkpoint(const std::filesystem::path& path);

} // namespace iss::nn
