#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bem/corpus.hpp"
#include "bem/encoder.hpp"
#include "bem/lexicon.hpp"
#include "bem/tokenizer.hpp"

namespace bem {

using Vector = RowVec<float>;

struct ModelOptions {
  EncoderConfig encoder;  // vocab_size is filled from the vocab
  int max_context_len = 64;
  int max_gloss_len = 32;
  bool tied = false;
  bool freeze_ctx = false;
  bool freeze_gls = false;
};

// Frozen-encoder baseline head: one row per sense seen in training.
struct LinearHead {
  Mat<float> weight;  // [n_senses, d_model]
  Mat<float> bias;    // [1, n_senses]
  std::map<SenseId, int> index;
  std::set<LemmaKey> lemmas;  // lemmas covered by the training data

  bool covers(const SenseId& id) const { return index.count(id) > 0; }
};

// Context encoder + gloss encoder. In tied mode the gloss role reads the
// context parameters and `gls` is unused. Freeze flags only gate updates.
class BemModel {
 public:
  BemModel() = default;
  static BemModel create(std::shared_ptr<const Vocab> vocab, ModelOptions options, std::uint64_t seed);

  EncoderParams<float>& ctx() { return ctx_; }
  const EncoderParams<float>& ctx() const { return ctx_; }
  EncoderParams<float>& gls() { return options_.tied ? ctx_ : gls_; }
  const EncoderParams<float>& gls() const { return options_.tied ? ctx_ : gls_; }

  const ModelOptions& options() const { return options_; }
  ModelOptions& options() { return options_; }
  bool tied() const { return options_.tied; }
  const Vocab& vocab() const { return *vocab_; }
  std::shared_ptr<const Vocab> vocab_ptr() const { return vocab_; }

  std::optional<LinearHead> head;

  TokenizedInput encode_context(const std::vector<std::string>& words) const;
  TokenizedInput encode_gloss(const std::string& gloss) const;

  // Save/load including the linear head when present. `vocab` must match the
  // fingerprint recorded at save time.
  void save(const std::string& path, const std::string& vocab_path = "") const;
  static BemModel load(const std::string& path, std::shared_ptr<const Vocab> vocab);

 private:
  std::shared_ptr<const Vocab> vocab_;
  ModelOptions options_;
  EncoderParams<float> ctx_;
  EncoderParams<float> gls_;
};

struct ScoredCandidates {
  std::vector<SenseId> sense_ids;
  std::vector<double> scores;
};

// Context-encoder representation of words[target] (mean over its pieces).
Vector embed_target(const BemModel& m, const std::vector<std::string>& words, std::size_t target);

// [CLS] gloss-encoder vectors, each distinct sense encoded once.
std::map<SenseId, Vector> embed_senses(const BemModel& m, const std::vector<SenseId>& senses,
                                       const SenseInventory& inv, std::size_t gloss_batch_size);

std::vector<double> score(const Vector& r_w, const std::vector<Vector>& candidates);
ScoredCandidates score_candidates(const Vector& r_w, const std::vector<SenseId>& ids,
                                  const std::map<SenseId, Vector>& sense_vectors);

// First maximal index: candidates arrive in rank order, so ties go to the
// lower rank.
std::size_t argmax_rank_tiebreak(const std::vector<double>& scores);

SenseId predict(const BemModel& m, const std::vector<std::string>& words, std::size_t target,
                const LemmaKey& key, const SenseInventory& inv);

// Predictions for every labeled instance with a non-empty candidate set.
// Gloss vectors are computed once for the union of candidates.
std::map<std::string, SenseId> predict_corpus(const BemModel& m, const Corpus& c,
                                              const SenseInventory& inv,
                                              std::size_t gloss_batch_size = 256);

double log_sum_exp(const std::vector<double>& x);
std::vector<double> softmax(const std::vector<double>& x);

// weight * (logsumexp(scores) - scores[gold])
double bem_loss(const std::vector<double>& scores, std::size_t gold, double weight = 1.0);
// d loss / d scores = weight * (softmax - onehot(gold))
std::vector<double> bem_loss_grad(const std::vector<double>& scores, std::size_t gold, double weight = 1.0);

struct BalanceWeights {
  std::map<LemmaKey, std::map<SenseId, double>> weight;
  double of(const LemmaKey& key, const SenseId& id) const;
};

// Add-one smoothed inverse frequency, normalized to mean 1 per candidate set.
BalanceWeights balance_weights(const SenseFrequencyTable& freq, const SenseInventory& inv);

// Logits restricted to `candidates`; throws when a candidate has no row.
ScoredCandidates linear_head_logits(const LinearHead& head, const Vector& r_w,
                                    const std::vector<SenseId>& candidates);

}  // namespace bem
