#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bem/encoder.hpp"
#include "json.hpp"

namespace bem {

struct NamedTensor {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<float> data;  // row-major
};

// One JSON header line (format, version, caller metadata and the tensor
// table) followed by the tensors as little-endian fp32 in table order.
struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
  const NamedTensor& at(const std::string& name) const;
};

std::string serialize_checkpoint(const Checkpoint& c);
Checkpoint parse_checkpoint(const std::string& bytes);
void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

nlohmann::json encoder_config_json(const EncoderConfig& cfg);
EncoderConfig encoder_config_from_json(const nlohmann::json& j);

void add_matrix(Checkpoint& c, const std::string& name, const Mat<float>& m);
Mat<float> read_matrix(const Checkpoint& c, const std::string& name);

void add_encoder(Checkpoint& c, const std::string& prefix, const EncoderParams<float>& p);
EncoderParams<float> read_encoder(const Checkpoint& c, const std::string& prefix, const EncoderConfig& cfg);

}  // namespace bem
