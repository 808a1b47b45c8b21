#include "iss/nn/mlp.hpp"

namespace iss::nn {

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw DomainError("unknown activation '" + name + "'");
}

void MlpSpec::validate() const {
  if (input_dim <= 0) throw DomainError("MlpSpec: input_dim must be positive");
  if (output_dim <= 0) throw DomainError("MlpSpec: output_dim must be positive");
  for (int h : hidden)
    if (h <= 0) throw DomainError("MlpSpec: hidden widths must be positive");
}

} // namespace iss::nn
