#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace bem {

using TokenId = std::int32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr TokenId kClsId = 2;
inline constexpr TokenId kSepId = 3;

// Whole-word + character-fallback subword vocabulary. Continuation pieces
// carry a "##" prefix.
class Vocab {
 public:
  Vocab();  // reserved tokens only
  explicit Vocab(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  bool contains(std::string_view tok) const;
  // Returns kUnkId for unknown tokens.
  TokenId id_of(std::string_view tok) const;
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::uint64_t fingerprint() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

struct WordSpan {
  std::size_t begin = 0;  // half-open subword range
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool operator==(const WordSpan&) const = default;
};

struct TokenizedInput {
  std::vector<TokenId> ids;
  std::vector<WordSpan> word_spans;
  std::size_t length() const { return ids.size(); }
};

// Splits UTF-8 text into code points (invalid bytes pass through singly).
std::vector<std::string> utf8_chars(std::string_view word);
std::vector<std::string> split_whitespace(std::string_view text);

Vocab build_vocab(const std::vector<std::vector<std::string>>& texts, int min_freq);

// Greedy longest-match segmentation of one (case-folded) word.
std::vector<TokenId> segment_word(const Vocab& v, std::string_view word);

// [CLS] pieces... [SEP]; trailing words that do not fit are dropped whole.
TokenizedInput encode(const Vocab& v, const std::vector<std::string>& words, std::size_t max_len);

std::string serialize_vocab(const Vocab& v);
Vocab parse_vocab(std::string_view text);
Vocab load_vocab(const std::string& path);
void save_vocab(const Vocab& v, const std::string& path);

}  // namespace bem
