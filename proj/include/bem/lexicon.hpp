#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace bem {

using SenseId = std::string;

enum class Pos { noun, verb, adj, adv };

std::string_view pos_name(Pos pos);
// Accepts "noun"/"verb"/"adj"/"adv" and the single-letter WordNet tags.
std::optional<Pos> parse_pos(std::string_view s);

struct LemmaKey {
  std::string lemma;  // case-folded
  Pos pos = Pos::noun;

  auto operator<=>(const LemmaKey&) const = default;
  bool operator==(const LemmaKey&) const = default;
  std::string str() const;  // "lemma.pos"
};

struct LemmaKeyHash {
  std::size_t operator()(const LemmaKey& k) const {
    return std::hash<std::string>()(k.lemma) * 31 + static_cast<std::size_t>(k.pos);
  }
};

struct SenseEntry {
  SenseId sense_id;
  LemmaKey lemma_key;
  std::string gloss;
  int rank = 1;
};

// Immutable after construction. Within a lemma key, insertion order is rank.
class SenseInventory {
 public:
  SenseInventory() = default;

  // Appends an entry; its rank is one past the lemma's current sense count.
  // Throws on empty id/gloss/lemma or duplicate id.
  void add(SenseId id, LemmaKey key, std::string gloss);

  const std::vector<SenseEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool contains(const SenseId& id) const { return by_id_.count(id) > 0; }
  const SenseEntry& entry(const SenseId& id) const;

  // Keys in first-seen order.
  const std::vector<LemmaKey>& lemma_keys() const { return key_order_; }
  bool knows(const LemmaKey& key) const { return by_key_.count(key) > 0; }

  const std::vector<std::size_t>* senses_of(const LemmaKey& key) const;

 private:
  std::vector<SenseEntry> entries_;
  std::unordered_map<SenseId, std::size_t> by_id_;
  std::unordered_map<LemmaKey, std::vector<std::size_t>, LemmaKeyHash> by_key_;
  std::vector<LemmaKey> key_order_;
};

SenseInventory load_inventory(const std::string& path);
SenseInventory parse_inventory(std::string_view text);
std::string serialize_inventory(const SenseInventory& inv);
void save_inventory(const SenseInventory& inv, const std::string& path);

// Rank order; empty when the lemma is unknown.
std::vector<SenseId> candidate_senses(const SenseInventory& inv, const LemmaKey& key);
// Throws validation error when the lemma is unknown.
SenseId first_sense(const SenseInventory& inv, const LemmaKey& key);
const std::string& gloss_text(const SenseInventory& inv, const SenseId& id);

}  // namespace bem
