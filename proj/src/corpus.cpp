#include "bem/corpus.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "bem/common.hpp"
#include "json.hpp"

namespace bem {

using ordered_json = nlohmann::ordered_json;

std::size_t Corpus::instance_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences)
    for (const auto& t : s.tokens) n += t.labeled() ? 1 : 0;
  return n;
}

std::vector<InstanceRef> labeled_instances(const Corpus& c) {
  std::vector<InstanceRef> out;
  for (std::size_t i = 0; i < c.sentences.size(); ++i) {
    const auto& toks = c.sentences[i].tokens;
    for (std::size_t j = 0; j < toks.size(); ++j) {
      if (toks[j].labeled()) out.push_back({i, j});
    }
  }
  return out;
}

const AnnotatedToken& token_at(const Corpus& c, InstanceRef ref) {
  return c.sentences.at(ref.sentence).tokens.at(ref.token);
}

std::vector<std::string> sentence_words(const Sentence& s) {
  std::vector<std::string> words;
  words.reserve(s.tokens.size());
  for (const auto& t : s.tokens) words.push_back(t.surface);
  return words;
}

void validate_corpus(const Corpus& c, const SenseInventory& inv) {
  std::unordered_set<std::string> ids;
  for (const auto& s : c.sentences) {
    if (s.tokens.empty()) throw Error(ErrorKind::validation, c.name + ": empty sentence");
    for (const auto& t : s.tokens) {
      if (t.instance_id && !ids.insert(*t.instance_id).second) {
        throw Error(ErrorKind::validation, c.name + ": duplicate instance id " + *t.instance_id);
      }
      if (!t.labeled()) continue;
      if (!t.lemma_key || !t.instance_id) {
        throw Error(ErrorKind::validation,
                    c.name + ": labeled token '" + t.surface + "' lacks lemma/pos or id");
      }
      for (const auto& g : t.gold) {
        if (!inv.contains(g)) {
          throw Error(ErrorKind::validation,
                      c.name + ": instance " + *t.instance_id + " has unknown sense " + g);
        }
      }
    }
  }
}

Corpus parse_corpus(std::string_view text, const SenseInventory& inv,
                    std::size_t max_sentence_tokens) {
  if (max_sentence_tokens == 0) throw Error(ErrorKind::config, "max sentence length must be >= 1");
  Corpus corpus;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  auto fail = [&](const std::string& msg) {
    throw Error(ErrorKind::format, "corpus line " + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) fail("expected an object");
    if (!header_seen) {
      if (obj.value("format", "") != "wsd-corpus" || obj.value("version", 0) != 1) {
        fail("missing {\"format\":\"wsd-corpus\",\"version\":1} header");
      }
      corpus.name = obj.value("name", "");
      header_seen = true;
      continue;
    }
    if (!obj.contains("tokens") || !obj["tokens"].is_array()) fail("missing tokens array");
    Sentence sent;
    for (const auto& tj : obj["tokens"]) {
      if (!tj.is_object() || !tj.contains("surface") || !tj["surface"].is_string()) {
        fail("token without string surface");
      }
      AnnotatedToken tok;
      tok.surface = tj["surface"].get<std::string>();
      const bool has_lemma = tj.contains("lemma") && !tj["lemma"].is_null();
      const bool has_pos = tj.contains("pos") && !tj["pos"].is_null();
      if (has_lemma != has_pos) fail("lemma and pos must appear together");
      if (has_lemma) {
        if (!tj["lemma"].is_string() || !tj["pos"].is_string()) fail("lemma/pos must be strings");
        auto pos = parse_pos(tj["pos"].get<std::string>());
        if (!pos) fail("bad pos '" + tj["pos"].get<std::string>() + "'");
        tok.lemma_key = LemmaKey{to_lower_ascii(tj["lemma"].get<std::string>()), *pos};
      }
      if (tj.contains("gold") && !tj["gold"].is_null()) {
        if (!tj["gold"].is_array()) fail("gold must be an array");
        for (const auto& g : tj["gold"]) {
          if (!g.is_string()) fail("gold entries must be strings");
          tok.gold.push_back(g.get<std::string>());
        }
      }
      if (tj.contains("id") && !tj["id"].is_null()) {
        if (!tj["id"].is_string()) fail("id must be a string");
        tok.instance_id = tj["id"].get<std::string>();
      }
      sent.tokens.push_back(std::move(tok));
    }
    if (sent.tokens.empty()) fail("sentence has no tokens");
    for (std::size_t start = 0; start < sent.tokens.size(); start += max_sentence_tokens) {
      const std::size_t end = std::min(sent.tokens.size(), start + max_sentence_tokens);
      Sentence piece;
      piece.tokens.assign(sent.tokens.begin() + static_cast<std::ptrdiff_t>(start),
                          sent.tokens.begin() + static_cast<std::ptrdiff_t>(end));
      corpus.sentences.push_back(std::move(piece));
    }
  }
  if (!header_seen) throw Error(ErrorKind::format, "corpus: empty file (no header)");
  validate_corpus(corpus, inv);
  return corpus;
}

Corpus load_corpus(const std::string& path, const SenseInventory& inv,
                   std::size_t max_sentence_tokens) {
  return parse_corpus(read_file(path), inv, max_sentence_tokens);
}

std::string serialize_corpus(const Corpus& c) {
  ordered_json header;
  header["format"] = "wsd-corpus";
  header["version"] = 1;
  header["name"] = c.name;
  std::string out = header.dump() + "\n";
  for (const auto& s : c.sentences) {
    ordered_json toks = ordered_json::array();
    for (const auto& t : s.tokens) {
      ordered_json tj;
      tj["surface"] = t.surface;
      if (t.lemma_key) {
        tj["lemma"] = t.lemma_key->lemma;
        tj["pos"] = std::string(pos_name(t.lemma_key->pos));
      }
      if (!t.gold.empty()) tj["gold"] = t.gold;
      if (t.instance_id) tj["id"] = *t.instance_id;
      toks.push_back(std::move(tj));
    }
    out += ordered_json{{"tokens", std::move(toks)}}.dump() + "\n";
  }
  return out;
}

void save_corpus(const Corpus& c, const std::string& path) {
  write_file(path, serialize_corpus(c));
}

std::int64_t SenseFrequencyTable::of(const SenseId& id) const {
  auto it = count.find(id);
  return it == count.end() ? 0 : it->second;
}

std::int64_t SenseFrequencyTable::lemma_total(const LemmaKey& key) const {
  auto it = per_lemma.find(key);
  if (it == per_lemma.end()) return 0;
  std::int64_t total = 0;
  for (const auto& [_, n] : it->second) total += n;
  return total;
}

SenseFrequencyTable sense_frequencies(const Corpus& c) {
  SenseFrequencyTable t;
  for (const auto& s : c.sentences) {
    for (const auto& tok : s.tokens) {
      if (!tok.labeled()) continue;
      std::set<SenseId> distinct(tok.gold.begin(), tok.gold.end());
      for (const auto& g : distinct) {
        ++t.count[g];
        ++t.per_lemma[*tok.lemma_key][g];
      }
    }
  }
  return t;
}

std::string serialize_frequencies(const SenseFrequencyTable& t) {
  ordered_json j;
  j["format"] = "sense-frequency";
  j["version"] = 1;
  ordered_json lemmas = ordered_json::array();
  for (const auto& [key, senses] : t.per_lemma) {
    ordered_json e;
    e["lemma"] = key.lemma;
    e["pos"] = std::string(pos_name(key.pos));
    ordered_json counts = ordered_json::object();
    for (const auto& [id, n] : senses) counts[id] = n;
    e["counts"] = std::move(counts);
    lemmas.push_back(std::move(e));
  }
  j["lemmas"] = std::move(lemmas);
  return j.dump(1) + "\n";
}

SenseFrequencyTable parse_frequencies(std::string_view text) {
  SenseFrequencyTable t;
  try {
    auto j = nlohmann::json::parse(text);
    if (j.value("format", "") != "sense-frequency") {
      throw Error(ErrorKind::format, "not a sense-frequency file");
    }
    for (const auto& e : j.at("lemmas")) {
      auto pos = parse_pos(e.at("pos").get<std::string>());
      if (!pos) throw Error(ErrorKind::format, "sense-frequency: bad pos");
      LemmaKey key{e.at("lemma").get<std::string>(), *pos};
      for (const auto& [id, n] : e.at("counts").items()) {
        const auto v = n.get<std::int64_t>();
        t.per_lemma[key][id] += v;
        t.count[id] += v;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, std::string("sense-frequency: ") + e.what());
  }
  return t;
}

SenseId training_mfs(const SenseFrequencyTable& t, const LemmaKey& key,
                     const SenseInventory& inv) {
  const auto cands = candidate_senses(inv, key);
  if (cands.empty()) throw Error(ErrorKind::validation, "unknown lemma: " + key.str());
  std::int64_t best_count = -1;
  const SenseId* best = nullptr;
  for (const auto& id : cands) {
    // Counts are read per lemma so a sense shared across lemmas is not conflated.
    std::int64_t n = 0;
    if (auto it = t.per_lemma.find(key); it != t.per_lemma.end()) {
      if (auto jt = it->second.find(id); jt != it->second.end()) n = jt->second;
    }
    if (n > best_count) {
      best_count = n;
      best = &id;
    }
  }
  return *best;
}

Corpus kshot_filter(const Corpus& c, int k, std::uint64_t seed) {
  if (k < 1) throw Error(ErrorKind::config, "k must be >= 1");
  // sense -> (sentence, token) occurrences in corpus order
  std::map<SenseId, std::vector<InstanceRef>> occurrences;
  for (const auto& ref : labeled_instances(c)) {
    std::set<SenseId> distinct(token_at(c, ref).gold.begin(), token_at(c, ref).gold.end());
    for (const auto& g : distinct) occurrences[g].push_back(ref);
  }
  std::set<std::tuple<std::size_t, std::size_t, SenseId>> keep;
  for (auto& [sense, refs] : occurrences) {
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), refs.size());
    Rng rng(hash_combine(seed, fnv1a64(sense)));
    std::vector<std::size_t> order(refs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    // Partial Fisher-Yates: the first `take` slots are a uniform sample.
    for (std::size_t i = 0; i < take; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(order.size() - i));
      std::swap(order[i], order[j]);
    }
    for (std::size_t i = 0; i < take; ++i) {
      keep.emplace(refs[order[i]].sentence, refs[order[i]].token, sense);
    }
  }
  Corpus out = c;
  for (std::size_t si = 0; si < out.sentences.size(); ++si) {
    auto& toks = out.sentences[si].tokens;
    for (std::size_t ti = 0; ti < toks.size(); ++ti) {
      auto& gold = toks[ti].gold;
      std::vector<SenseId> kept;
      for (const auto& g : gold) {
        if (keep.count({si, ti, g}) &&
            std::find(kept.begin(), kept.end(), g) == kept.end()) {
          kept.push_back(g);
        }
      }
      gold = std::move(kept);
    }
  }
  return out;
}

EvalPartition build_partition(const Corpus& eval_c, const SenseFrequencyTable& train_freq,
                              const SenseInventory& inv) {
  EvalPartition p;
  for (const auto& ref : labeled_instances(eval_c)) {
    const auto& tok = token_at(eval_c, ref);
    const auto& id = *tok.instance_id;
    const auto cands = candidate_senses(inv, *tok.lemma_key);
    const bool mfs = !cands.empty() &&
                     std::find(tok.gold.begin(), tok.gold.end(), cands.front()) != tok.gold.end();
    (mfs ? p.mfs_ids : p.lfs_ids).insert(id);
    if (train_freq.lemma_total(*tok.lemma_key) == 0) p.zero_shot_word_ids.insert(id);
    const bool any_seen = std::any_of(tok.gold.begin(), tok.gold.end(),
                                      [&](const SenseId& g) { return train_freq.of(g) > 0; });
    if (!any_seen) p.zero_shot_sense_ids.insert(id);
  }
  return p;
}

EvalPartition build_partition(const Corpus& eval_c, const SenseFrequencyTable& train_freq,
                              const Corpus& train_c, const SenseInventory& inv) {
  EvalPartition p = build_partition(eval_c, train_freq, inv);
  std::set<LemmaKey> seen;
  for (const auto& ref : labeled_instances(train_c)) seen.insert(*token_at(train_c, ref).lemma_key);
  p.zero_shot_word_ids.clear();
  for (const auto& ref : labeled_instances(eval_c)) {
    const auto& tok = token_at(eval_c, ref);
    if (!seen.count(*tok.lemma_key)) p.zero_shot_word_ids.insert(*tok.instance_id);
  }
  return p;
}

}  // namespace bem
