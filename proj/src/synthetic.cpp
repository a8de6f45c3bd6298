#include <algorithm>
#include <cmath>
#include <set>

#include "bem/common.hpp"
#include "bem/corpus.hpp"

namespace bem {

namespace {

constexpr const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p",
                                   "r", "s", "t", "v", "z", "br", "st", "tr", "gl"};
constexpr const char* kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};
constexpr const char* kGlossFiller[] = {"a", "the", "of", "or", "to", "in", "that", "with"};

class WordFactory {
 public:
  explicit WordFactory(Rng& rng) : rng_(rng) {}

  std::string fresh(int min_syllables, int max_syllables) {
    for (;;) {
      const int n = min_syllables + static_cast<int>(rng_.below(
                                        static_cast<std::uint64_t>(max_syllables - min_syllables + 1)));
      std::string w;
      for (int i = 0; i < n; ++i) {
        w += kOnsets[rng_.below(std::size(kOnsets))];
        w += kVowels[rng_.below(std::size(kVowels))];
      }
      if (used_.insert(w).second) return w;
    }
  }

 private:
  Rng& rng_;
  std::set<std::string> used_;
};

std::size_t sample_categorical(Rng& rng, const std::vector<double>& probs) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return probs.size() - 1;
}

struct SynthSense {
  SenseId id;
  std::vector<std::string> keywords;
};

struct SynthLemma {
  LemmaKey key;
  std::vector<SynthSense> senses;
  bool held_out_word = false;
  int held_out_sense = -1;  // index of a sense never shown in training
};

}  // namespace

std::vector<double> zipf_probabilities(int n, double exponent) {
  std::vector<double> p(static_cast<std::size_t>(n));
  double z = 0.0;
  for (int r = 1; r <= n; ++r) {
    p[static_cast<std::size_t>(r - 1)] = std::pow(static_cast<double>(r), -exponent);
    z += p[static_cast<std::size_t>(r - 1)];
  }
  for (auto& v : p) v /= z;
  return p;
}

SynthData generate_synthetic(const SynthConfig& cfg, std::uint64_t seed) {
  auto bad = [](const std::string& msg) { throw Error(ErrorKind::config, "synthetic: " + msg); };
  if (cfg.n_lemmas < 1) bad("n_lemmas must be >= 1");
  if (cfg.min_senses < 1 || cfg.max_senses < cfg.min_senses) bad("invalid senses range");
  if (cfg.zipf_exponent < 0) bad("zipf_exponent must be >= 0");
  if (cfg.keywords_per_sense < 1 || cfg.vocab_size < cfg.keywords_per_sense) {
    bad("vocab_size must be >= keywords_per_sense >= 1");
  }
  if (cfg.context_keywords < 0 || cfg.context_keywords > cfg.keywords_per_sense) {
    bad("context_keywords must lie in [0, keywords_per_sense]");
  }
  if (cfg.noise_words < 0 || cfg.gloss_noise_words < 0) bad("noise counts must be >= 0");
  if (cfg.noise_words > 0 && cfg.noise_vocab_size < 1) bad("noise_vocab_size must be >= 1");
  if (cfg.train_instances < 1 || cfg.eval_instances < 0) bad("instance counts must be positive");
  if (cfg.zero_shot_fraction < 0 || cfg.zero_shot_fraction >= 1) {
    bad("zero_shot_fraction must lie in [0, 1)");
  }
  if (cfg.context_ambiguity < 0 || cfg.context_ambiguity > 1) bad("context_ambiguity must lie in [0, 1]");
  if (cfg.zero_shot_word_share < 0 || cfg.zero_shot_word_share > 1) {
    bad("zero_shot_word_share must lie in [0, 1]");
  }

  Rng rng(hash_combine(seed, 0x5e17));
  WordFactory words(rng);

  std::vector<std::string> keyword_pool;
  for (int i = 0; i < cfg.vocab_size; ++i) keyword_pool.push_back(words.fresh(2, 3));
  std::vector<std::string> noise_pool;
  for (int i = 0; i < cfg.noise_vocab_size; ++i) noise_pool.push_back(words.fresh(1, 2));

  std::vector<SynthLemma> lemmas;
  for (int i = 0; i < cfg.n_lemmas; ++i) {
    SynthLemma lem;
    lem.key = LemmaKey{words.fresh(2, 3), static_cast<Pos>(rng.below(4))};
    const int n_senses = cfg.min_senses + static_cast<int>(rng.below(
                                              static_cast<std::uint64_t>(cfg.max_senses - cfg.min_senses + 1)));
    for (int s = 0; s < n_senses; ++s) {
      SynthSense sense;
      sense.id = lem.key.lemma + "%" + std::string(pos_name(lem.key.pos)) + ":" + std::to_string(s + 1);
      std::vector<std::size_t> idx(keyword_pool.size());
      for (std::size_t j = 0; j < idx.size(); ++j) idx[j] = j;
      for (int j = 0; j < cfg.keywords_per_sense; ++j) {
        const std::size_t pick = static_cast<std::size_t>(j) +
                                 static_cast<std::size_t>(rng.below(idx.size() - static_cast<std::size_t>(j)));
        std::swap(idx[static_cast<std::size_t>(j)], idx[pick]);
        sense.keywords.push_back(keyword_pool[idx[static_cast<std::size_t>(j)]]);
      }
      lem.senses.push_back(std::move(sense));
    }
    lemmas.push_back(std::move(lem));
  }

  // Zero-shot planning: some lemmas are withheld from training entirely,
  // others withhold their lowest-ranked sense.
  const int zs_instances = static_cast<int>(std::lround(cfg.zero_shot_fraction * cfg.eval_instances));
  const int zs_word_instances = static_cast<int>(std::lround(zs_instances * cfg.zero_shot_word_share));
  const int zs_sense_instances = zs_instances - zs_word_instances;
  std::vector<std::size_t> order(lemmas.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<std::size_t> held_words;
  std::vector<std::size_t> held_senses;
  std::size_t cursor = 0;
  if (zs_word_instances > 0) {
    const auto n = static_cast<std::size_t>(std::max(
        1.0, std::ceil(cfg.n_lemmas * cfg.zero_shot_fraction * cfg.zero_shot_word_share)));
    for (std::size_t i = 0; i < n && cursor < order.size(); ++i, ++cursor) {
      lemmas[order[cursor]].held_out_word = true;
      held_words.push_back(order[cursor]);
    }
  }
  if (zs_sense_instances > 0) {
    const auto want = static_cast<std::size_t>(std::max(1.0, std::ceil(cfg.n_lemmas * cfg.zero_shot_fraction * 2.0)));
    for (; cursor < order.size() && held_senses.size() < want; ++cursor) {
      auto& lem = lemmas[order[cursor]];
      if (lem.senses.size() < 2) continue;
      lem.held_out_sense = static_cast<int>(lem.senses.size()) - 1;
      held_senses.push_back(order[cursor]);
    }
    if (held_senses.empty()) bad("zero-shot senses require a lemma with >= 2 senses outside held-out words");
  }
  std::vector<std::size_t> seen_lemmas;
  for (std::size_t i = 0; i < lemmas.size(); ++i) {
    if (!lemmas[i].held_out_word) seen_lemmas.push_back(i);
  }
  if (seen_lemmas.empty()) bad("no lemmas left for training");

  SynthData data;
  for (const auto& lem : lemmas) {
    for (const auto& sense : lem.senses) {
      std::vector<std::string> parts = sense.keywords;
      for (int j = 0; j < cfg.gloss_noise_words; ++j) {
        parts.push_back(kGlossFiller[rng.below(std::size(kGlossFiller))]);
      }
      rng.shuffle(parts);
      std::string gloss;
      for (const auto& p : parts) gloss += (gloss.empty() ? "" : " ") + p;
      data.inventory.add(sense.id, lem.key, gloss);
    }
  }

  auto sense_probs = [&](const SynthLemma& lem, bool exclude_held) {
    auto p = zipf_probabilities(static_cast<int>(lem.senses.size()), cfg.zipf_exponent);
    if (exclude_held && lem.held_out_sense >= 0) {
      p[static_cast<std::size_t>(lem.held_out_sense)] = 0.0;
      double z = 0.0;
      for (double v : p) z += v;
      for (auto& v : p) v /= z;
    }
    return p;
  };

  auto make_sentence = [&](const SynthLemma& lem, std::size_t sense_idx, const std::string& id) {
    const auto& sense = lem.senses[sense_idx];
    std::vector<std::string> kw = sense.keywords;
    rng.shuffle(kw);
    std::vector<std::string> ctx(kw.begin(), kw.begin() + cfg.context_keywords);
    // Distractor keywords come from the lemma's other senses, never the held-out one.
    std::vector<std::size_t> distractors;
    for (std::size_t j = 0; j < lem.senses.size(); ++j) {
      if (j != sense_idx && static_cast<int>(j) != lem.held_out_sense) distractors.push_back(j);
    }
    if (cfg.context_ambiguity > 0.0 && !distractors.empty()) {
      for (auto& word : ctx) {
        if (rng.uniform() >= cfg.context_ambiguity) continue;
        const auto& okw = lem.senses[distractors[rng.below(distractors.size())]].keywords;
        word = okw[rng.below(okw.size())];
      }
    }
    for (int j = 0; j < cfg.noise_words; ++j) ctx.push_back(noise_pool[rng.below(noise_pool.size())]);
    rng.shuffle(ctx);
    const std::size_t target_pos = static_cast<std::size_t>(rng.below(ctx.size() + 1));
    Sentence s;
    for (std::size_t j = 0; j <= ctx.size(); ++j) {
      if (j == target_pos) {
        AnnotatedToken t;
        t.surface = lem.key.lemma;
        t.lemma_key = lem.key;
        t.gold = {sense.id};
        t.instance_id = id;
        s.tokens.push_back(std::move(t));
      }
      if (j < ctx.size()) s.tokens.push_back(AnnotatedToken{ctx[j], std::nullopt, {}, std::nullopt});
    }
    return s;
  };

  auto index_str = [](int i) {
    std::string n = std::to_string(i);
    return std::string(n.size() < 5 ? 5 - n.size() : 0, '0') + n;
  };

  data.train.name = "synth-train";
  std::vector<std::vector<int>> train_counts(lemmas.size());
  for (std::size_t i = 0; i < lemmas.size(); ++i) train_counts[i].assign(lemmas[i].senses.size(), 0);
  for (int i = 0; i < cfg.train_instances; ++i) {
    const auto li = seen_lemmas[rng.below(seen_lemmas.size())];
    const auto sense_idx = sample_categorical(rng, sense_probs(lemmas[li], true));
    ++train_counts[li][sense_idx];
    data.train.sentences.push_back(make_sentence(lemmas[li], sense_idx, "train." + index_str(i)));
  }
  // Ordinary eval instances only use senses that were drawn for training, so
  // every zero-shot instance is a planned one.
  std::vector<std::size_t> trained_lemmas;
  for (auto li : seen_lemmas) {
    for (int n : train_counts[li]) {
      if (n > 0) {
        trained_lemmas.push_back(li);
        break;
      }
    }
  }
  auto trained_probs = [&](std::size_t li) {
    auto p = sense_probs(lemmas[li], true);
    double z = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (train_counts[li][k] == 0) p[k] = 0.0;
      z += p[k];
    }
    for (auto& v : p) v /= z;
    return p;
  };

  data.eval.name = "synth-eval";
  std::vector<std::pair<std::size_t, std::size_t>> plan;  // (lemma, sense)
  for (int i = 0; i < zs_word_instances; ++i) {
    const auto li = held_words[rng.below(held_words.size())];
    plan.emplace_back(li, sample_categorical(rng, sense_probs(lemmas[li], false)));
  }
  for (int i = 0; i < zs_sense_instances; ++i) {
    const auto li = held_senses[rng.below(held_senses.size())];
    plan.emplace_back(li, static_cast<std::size_t>(lemmas[li].held_out_sense));
  }
  if (static_cast<int>(plan.size()) < cfg.eval_instances && trained_lemmas.empty()) {
    bad("no lemma received training instances");
  }
  while (static_cast<int>(plan.size()) < cfg.eval_instances) {
    const auto li = trained_lemmas[rng.below(trained_lemmas.size())];
    plan.emplace_back(li, sample_categorical(rng, trained_probs(li)));
  }
  rng.shuffle(plan);
  for (std::size_t i = 0; i < plan.size(); ++i) {
    data.eval.sentences.push_back(
        make_sentence(lemmas[plan[i].first], plan[i].second, "eval." + index_str(static_cast<int>(i))));
  }
  return data;
}

}  // namespace bem
