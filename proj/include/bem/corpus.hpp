#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "bem/lexicon.hpp"

namespace bem {

struct AnnotatedToken {
  std::string surface;
  std::optional<LemmaKey> lemma_key;
  std::vector<SenseId> gold;
  std::optional<std::string> instance_id;

  bool labeled() const { return !gold.empty(); }
};

struct Sentence {
  std::vector<AnnotatedToken> tokens;
};

struct Corpus {
  std::string name;
  std::vector<Sentence> sentences;

  std::size_t instance_count() const;
};

// Location of a labeled token inside a corpus.
struct InstanceRef {
  std::size_t sentence = 0;
  std::size_t token = 0;
};

std::vector<InstanceRef> labeled_instances(const Corpus& c);
const AnnotatedToken& token_at(const Corpus& c, InstanceRef ref);
std::vector<std::string> sentence_words(const Sentence& s);

inline constexpr std::size_t kDefaultMaxSentenceTokens = 62;

// Validates every gold id against `inv` and splits sentences longer than
// `max_sentence_tokens` into consecutive chunks.
Corpus parse_corpus(std::string_view text, const SenseInventory& inv,
                    std::size_t max_sentence_tokens = kDefaultMaxSentenceTokens);
Corpus load_corpus(const std::string& path, const SenseInventory& inv,
                   std::size_t max_sentence_tokens = kDefaultMaxSentenceTokens);
std::string serialize_corpus(const Corpus& c);
void save_corpus(const Corpus& c, const std::string& path);
void validate_corpus(const Corpus& c, const SenseInventory& inv);

struct SenseFrequencyTable {
  std::map<SenseId, std::int64_t> count;
  std::map<LemmaKey, std::map<SenseId, std::int64_t>> per_lemma;

  std::int64_t of(const SenseId& id) const;
  // Number of labeled occurrences of a lemma (sum over its senses).
  std::int64_t lemma_total(const LemmaKey& key) const;
};

SenseFrequencyTable sense_frequencies(const Corpus& c);
std::string serialize_frequencies(const SenseFrequencyTable& t);
SenseFrequencyTable parse_frequencies(std::string_view text);

// Argmax training count among the lemma's candidates; ties and unseen
// lemmas resolve to the lower inventory rank.
SenseId training_mfs(const SenseFrequencyTable& t, const LemmaKey& key,
                     const SenseInventory& inv);

// Keeps min(k, n_s) uniformly sampled labels of each sense s.
Corpus kshot_filter(const Corpus& c, int k, std::uint64_t seed);

struct EvalPartition {
  std::set<std::string> mfs_ids;
  std::set<std::string> lfs_ids;
  std::set<std::string> zero_shot_word_ids;
  std::set<std::string> zero_shot_sense_ids;
};

EvalPartition build_partition(const Corpus& eval_c, const SenseFrequencyTable& train_freq,
                              const Corpus& train_c, const SenseInventory& inv);
// Zero-shot words derived from the frequency table's per-lemma totals.
EvalPartition build_partition(const Corpus& eval_c, const SenseFrequencyTable& train_freq,
                              const SenseInventory& inv);

struct SynthConfig {
  int n_lemmas = 40;
  int min_senses = 2;
  int max_senses = 4;
  double zipf_exponent = 1.0;
  int vocab_size = 400;          // keyword pool size
  int keywords_per_sense = 4;
  int noise_vocab_size = 100;
  int context_keywords = 3;      // sense keywords embedded per context
  int noise_words = 3;           // noise words per context
  int gloss_noise_words = 1;
  int train_instances = 4000;
  int eval_instances = 800;
  double zero_shot_fraction = 0.1;
  double zero_shot_word_share = 0.3;  // share of zero-shot instances from unseen lemmas
  // Probability that a context keyword is taken from another sense of the
  // same lemma instead of the gold sense. Held-out senses are never sources.
  double context_ambiguity = 0.0;
};

struct SynthData {
  Corpus train;
  Corpus eval;
  SenseInventory inventory;
};

// p(rank r) proportional to r^-exponent over `n` ranks.
std::vector<double> zipf_probabilities(int n, double exponent);

SynthData generate_synthetic(const SynthConfig& cfg, std::uint64_t seed);

}  // namespace bem
