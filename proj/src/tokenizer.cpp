#include "bem/tokenizer.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "bem/common.hpp"

namespace bem {

namespace {
const std::vector<std::string> kReserved = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
}

Vocab::Vocab() : Vocab(kReserved) {}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < kReserved.size() ||
      !std::equal(kReserved.begin(), kReserved.end(), tokens_.begin())) {
    throw Error(ErrorKind::format, "vocab: reserved tokens must occupy ids 0-3");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) throw Error(ErrorKind::format, "vocab: empty token at id " + std::to_string(i));
    if (!ids_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw Error(ErrorKind::format, "vocab: duplicate token '" + tokens_[i] + "'");
    }
  }
}

bool Vocab::contains(std::string_view tok) const { return ids_.count(std::string(tok)) > 0; }

TokenId Vocab::id_of(std::string_view tok) const {
  auto it = ids_.find(std::string(tok));
  return it == ids_.end() ? kUnkId : it->second;
}

std::uint64_t Vocab::fingerprint() const { return fnv1a64(serialize_vocab(*this)); }

std::vector<std::string> utf8_chars(std::string_view word) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < word.size()) {
    const auto c = static_cast<unsigned char>(word[i]);
    std::size_t len = 1;
    if (c >= 0xF0) len = 4;
    else if (c >= 0xE0) len = 3;
    else if (c >= 0xC0) len = 2;
    if (i + len > word.size()) len = 1;
    for (std::size_t j = 1; j < len; ++j) {
      if ((static_cast<unsigned char>(word[i + j]) & 0xC0) != 0x80) {
        len = 1;
        break;
      }
    }
    out.emplace_back(word.substr(i, len));
    i += len;
  }
  return out;
}

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

Vocab build_vocab(const std::vector<std::vector<std::string>>& texts, int min_freq) {
  if (min_freq < 1) throw Error(ErrorKind::config, "min_freq must be >= 1");
  if (texts.empty()) throw Error(ErrorKind::validation, "build_vocab: empty input collection");
  std::map<std::string, long> word_freq;
  std::map<std::string, long> char_freq;
  for (const auto& text : texts) {
    for (const auto& raw : text) {
      const std::string w = to_lower_ascii(raw);
      if (w.empty()) continue;
      ++word_freq[w];
      for (const auto& ch : utf8_chars(w)) ++char_freq[ch];
    }
  }
  // ids by frequency desc, then lexicographic
  auto ranked = [](const std::map<std::string, long>& freq, long floor) {
    std::vector<std::pair<std::string, long>> items;
    for (const auto& [w, n] : freq) {
      if (n >= floor) items.emplace_back(w, n);
    }
    std::stable_sort(items.begin(), items.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    return items;
  };
  std::vector<std::string> tokens = kReserved;
  std::set<std::string> present(tokens.begin(), tokens.end());
  auto push = [&](const std::string& t) {
    if (present.insert(t).second) tokens.push_back(t);
  };
  for (const auto& [w, _] : ranked(word_freq, min_freq)) push(w);
  for (const auto& [ch, _] : ranked(char_freq, 1)) {
    push(ch);
    push("##" + ch);
  }
  return Vocab(std::move(tokens));
}

std::vector<TokenId> segment_word(const Vocab& v, std::string_view word) {
  const std::string folded = to_lower_ascii(word);
  const auto chars = utf8_chars(folded);
  std::vector<TokenId> pieces;
  std::size_t start = 0;
  while (start < chars.size()) {
    std::size_t end = chars.size();
    TokenId found = kUnkId;
    bool hit = false;
    for (; end > start; --end) {
      std::string piece = start > 0 ? "##" : "";
      for (std::size_t i = start; i < end; ++i) piece += chars[i];
      if (v.contains(piece)) {
        found = v.id_of(piece);
        hit = true;
        break;
      }
    }
    if (!hit) end = start + 1;  // unseen character
    pieces.push_back(found);
    start = end;
  }
  return pieces;
}

TokenizedInput encode(const Vocab& v, const std::vector<std::string>& words, std::size_t max_len) {
  if (max_len < 3) throw Error(ErrorKind::config, "encode: max_len must be >= 3");
  TokenizedInput out;
  out.ids.push_back(kClsId);
  for (const auto& w : words) {
    auto pieces = segment_word(v, w);
    if (pieces.size() > max_len - 2) {
      throw Error(ErrorKind::validation,
                  "encode: word '" + w + "' needs " + std::to_string(pieces.size()) +
                      " pieces, more than max_len-2");
    }
    if (out.ids.size() + pieces.size() + 1 > max_len) break;
    const std::size_t begin = out.ids.size();
    out.ids.insert(out.ids.end(), pieces.begin(), pieces.end());
    out.word_spans.push_back({begin, out.ids.size()});
  }
  out.ids.push_back(kSepId);
  return out;
}

std::string serialize_vocab(const Vocab& v) {
  std::string out;
  for (const auto& t : v.tokens()) out += t + "\n";
  return out;
}

Vocab parse_vocab(std::string_view text) {
  std::vector<std::string> tokens;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocab(std::move(tokens));
}

Vocab load_vocab(const std::string& path) { return parse_vocab(read_file(path)); }

void save_vocab(const Vocab& v, const std::string& path) { write_file(path, serialize_vocab(v)); }

}  // namespace bem
