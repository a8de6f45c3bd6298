#include "bem/lexicon.hpp"

#include <sstream>

#include "bem/common.hpp"
#include "json.hpp"

namespace bem {

using ordered_json = nlohmann::ordered_json;

std::string_view pos_name(Pos pos) {
  switch (pos) {
    case Pos::noun: return "noun";
    case Pos::verb: return "verb";
    case Pos::adj: return "adj";
    case Pos::adv: return "adv";
  }
  return "noun";
}

std::optional<Pos> parse_pos(std::string_view s) {
  if (s == "noun" || s == "n" || s == "NOUN") return Pos::noun;
  if (s == "verb" || s == "v" || s == "VERB") return Pos::verb;
  if (s == "adj" || s == "a" || s == "s" || s == "ADJ") return Pos::adj;
  if (s == "adv" || s == "r" || s == "ADV") return Pos::adv;
  return std::nullopt;
}

std::string LemmaKey::str() const {
  return lemma + "." + std::string(pos_name(pos));
}

void SenseInventory::add(SenseId id, LemmaKey key, std::string gloss) {
  if (id.empty()) throw Error(ErrorKind::validation, "empty sense_id");
  if (key.lemma.empty()) throw Error(ErrorKind::validation, "empty lemma for sense " + id);
  if (gloss.empty()) throw Error(ErrorKind::validation, "empty gloss for sense " + id);
  if (by_id_.count(id)) throw Error(ErrorKind::validation, "duplicate sense_id: " + id);
  key.lemma = to_lower_ascii(key.lemma);
  auto& slots = by_key_[key];
  if (slots.empty()) key_order_.push_back(key);
  const std::size_t index = entries_.size();
  entries_.push_back({id, key, std::move(gloss), static_cast<int>(slots.size()) + 1});
  slots.push_back(index);
  by_id_.emplace(std::move(id), index);
}

const SenseEntry& SenseInventory::entry(const SenseId& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw Error(ErrorKind::validation, "unknown sense_id: " + id);
  return entries_[it->second];
}

const std::vector<std::size_t>* SenseInventory::senses_of(const LemmaKey& key) const {
  auto it = by_key_.find(key);
  return it == by_key_.end() ? nullptr : &it->second;
}

SenseInventory parse_inventory(std::string_view text) {
  SenseInventory inv;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  auto fail = [&](const std::string& msg) {
    throw Error(ErrorKind::format, "inventory line " + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ordered_json obj;
    try {
      obj = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) fail("expected an object");
    if (!header_seen) {
      if (obj.value("format", "") != "sense-inventory" || obj.value("version", 0) != 1) {
        fail("missing {\"format\":\"sense-inventory\",\"version\":1} header");
      }
      header_seen = true;
      continue;
    }
    if (obj.size() != 4) fail("expected exactly sense_id, lemma, pos, gloss");
    for (const char* field : {"sense_id", "lemma", "pos", "gloss"}) {
      if (!obj.contains(field) || !obj[field].is_string()) {
        fail(std::string("missing or non-string field '") + field + "'");
      }
    }
    auto pos = parse_pos(obj["pos"].get<std::string>());
    if (!pos) fail("bad pos '" + obj["pos"].get<std::string>() + "'");
    try {
      inv.add(obj["sense_id"].get<std::string>(),
              LemmaKey{obj["lemma"].get<std::string>(), *pos},
              obj["gloss"].get<std::string>());
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::validation) fail(e.what());
      throw;
    }
  }
  if (!header_seen) throw Error(ErrorKind::format, "inventory: empty file (no header)");
  if (inv.size() == 0) throw Error(ErrorKind::validation, "inventory: no entries");
  return inv;
}

SenseInventory load_inventory(const std::string& path) {
  return parse_inventory(read_file(path));
}

std::string serialize_inventory(const SenseInventory& inv) {
  std::string out = ordered_json{{"format", "sense-inventory"}, {"version", 1}}.dump() + "\n";
  // Grouped by lemma key so that line order reproduces ranks on reload.
  for (const auto& key : inv.lemma_keys()) {
    for (std::size_t idx : *inv.senses_of(key)) {
      const auto& e = inv.entries()[idx];
      ordered_json obj;
      obj["sense_id"] = e.sense_id;
      obj["lemma"] = e.lemma_key.lemma;
      obj["pos"] = std::string(pos_name(e.lemma_key.pos));
      obj["gloss"] = e.gloss;
      out += obj.dump() + "\n";
    }
  }
  return out;
}

void save_inventory(const SenseInventory& inv, const std::string& path) {
  write_file(path, serialize_inventory(inv));
}

std::vector<SenseId> candidate_senses(const SenseInventory& inv, const LemmaKey& key) {
  std::vector<SenseId> out;
  if (const auto* idx = inv.senses_of(key)) {
    out.reserve(idx->size());
    for (std::size_t i : *idx) out.push_back(inv.entries()[i].sense_id);
  }
  return out;
}

SenseId first_sense(const SenseInventory& inv, const LemmaKey& key) {
  const auto* idx = inv.senses_of(key);
  if (!idx || idx->empty()) throw Error(ErrorKind::validation, "unknown lemma: " + key.str());
  return inv.entries()[idx->front()].sense_id;
}

const std::string& gloss_text(const SenseInventory& inv, const SenseId& id) {
  return inv.entry(id).gloss;
}

}  // namespace bem
