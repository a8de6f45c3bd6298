#include "bem/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "bem/common.hpp"

namespace bem {

using nlohmann::json;

const NamedTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

const NamedTensor& Checkpoint::at(const std::string& name) const {
  if (const auto* t = find(name)) return *t;
  throw Error(ErrorKind::format, "checkpoint: missing tensor " + name);
}

namespace {

void put_f32(std::string& out, float v) {
  auto bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

float get_f32(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& c) {
  json header = c.meta;
  header["format"] = "bem-checkpoint";
  header["version"] = 1;
  json table = json::array();
  for (const auto& t : c.tensors) {
    std::int64_t n = 1;
    for (auto s : t.shape) n *= s;
    if (n != static_cast<std::int64_t>(t.data.size())) {
      throw Error(ErrorKind::validation, "checkpoint: tensor " + t.name + " size does not match shape");
    }
    table.push_back({{"name", t.name}, {"shape", t.shape}});
  }
  header["tensors"] = table;
  std::string out = header.dump() + "\n";
  for (const auto& t : c.tensors) {
    for (float v : t.data) put_f32(out, v);
  }
  return out;
}

Checkpoint parse_checkpoint(const std::string& bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw Error(ErrorKind::format, "checkpoint: missing header line");
  json header;
  try {
    header = json::parse(bytes.substr(0, nl));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::format, std::string("checkpoint header: ") + e.what());
  }
  if (header.value("format", "") != "bem-checkpoint" || header.value("version", 0) != 1) {
    throw Error(ErrorKind::format, "checkpoint: not a bem-checkpoint v1 file");
  }
  Checkpoint c;
  std::size_t offset = nl + 1;
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  for (const auto& entry : header.at("tensors")) {
    NamedTensor t;
    t.name = entry.at("name").get<std::string>();
    t.shape = entry.at("shape").get<std::vector<std::int64_t>>();
    std::int64_t n = 1;
    for (auto s : t.shape) n *= s;
    if (offset + static_cast<std::size_t>(n) * 4 > bytes.size()) {
      throw Error(ErrorKind::format, "checkpoint: truncated data for " + t.name);
    }
    t.data.resize(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < t.data.size(); ++i) t.data[i] = get_f32(raw + offset + 4 * i);
    offset += static_cast<std::size_t>(n) * 4;
    c.tensors.push_back(std::move(t));
  }
  if (offset != bytes.size()) throw Error(ErrorKind::format, "checkpoint: trailing bytes");
  header.erase("tensors");
  c.meta = std::move(header);
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::string& path) {
  write_file(path, serialize_checkpoint(c));
}

Checkpoint load_checkpoint(const std::string& path) { return parse_checkpoint(read_file(path)); }

json encoder_config_json(const EncoderConfig& cfg) {
  return {{"vocab_size", cfg.vocab_size}, {"d_model", cfg.d_model},   {"n_layers", cfg.n_layers},
          {"n_heads", cfg.n_heads},       {"d_ff", cfg.d_ff},         {"max_len", cfg.max_len},
          {"dropout_rate", cfg.dropout_rate}};
}

EncoderConfig encoder_config_from_json(const json& j) {
  EncoderConfig cfg;
  try {
    cfg.vocab_size = j.at("vocab_size").get<int>();
    cfg.d_model = j.at("d_model").get<int>();
    cfg.n_layers = j.at("n_layers").get<int>();
    cfg.n_heads = j.at("n_heads").get<int>();
    cfg.d_ff = j.at("d_ff").get<int>();
    cfg.max_len = j.at("max_len").get<int>();
    cfg.dropout_rate = j.at("dropout_rate").get<double>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::format, std::string("encoder config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

void add_matrix(Checkpoint& c, const std::string& name, const Mat<float>& m) {
  NamedTensor t;
  t.name = name;
  t.shape = {m.rows(), m.cols()};
  t.data.assign(m.data(), m.data() + m.size());
  c.tensors.push_back(std::move(t));
}

Mat<float> read_matrix(const Checkpoint& c, const std::string& name) {
  const auto& t = c.at(name);
  if (t.shape.size() != 2) throw Error(ErrorKind::format, "checkpoint: " + name + " is not 2-D");
  Mat<float> m(t.shape[0], t.shape[1]);
  std::memcpy(m.data(), t.data.data(), t.data.size() * sizeof(float));
  return m;
}

void add_encoder(Checkpoint& c, const std::string& prefix, const EncoderParams<float>& p) {
  p.visit([&](const std::string& name, const Mat<float>& m) { add_matrix(c, prefix + name, m); });
}

EncoderParams<float> read_encoder(const Checkpoint& c, const std::string& prefix, const EncoderConfig& cfg) {
  auto p = EncoderParams<float>::zeros(cfg);
  p.visit([&](const std::string& name, Mat<float>& m) {
    Mat<float> loaded = read_matrix(c, prefix + name);
    if (loaded.rows() != m.rows() || loaded.cols() != m.cols()) {
      throw Error(ErrorKind::format, "checkpoint: shape mismatch for " + prefix + name);
    }
    m = std::move(loaded);
  });
  return p;
}

}  // namespace bem
