#include "bem/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bem/checkpoint.hpp"
#include "bem/common.hpp"

namespace bem {

using nlohmann::json;

BemModel BemModel::create(std::shared_ptr<const Vocab> vocab, ModelOptions options, std::uint64_t seed) {
  if (!vocab) throw Error(ErrorKind::config, "model: vocab required");
  options.encoder.vocab_size = static_cast<int>(vocab->size());
  options.encoder.max_len = std::max(options.max_context_len, options.max_gloss_len);
  if (options.max_context_len < 3 || options.max_gloss_len < 3) {
    throw Error(ErrorKind::config, "model: max lengths must be >= 3");
  }
  BemModel m;
  m.vocab_ = std::move(vocab);
  m.options_ = options;
  // Both roles start from the same weights.
  m.ctx_ = init_params<float>(options.encoder, seed);
  if (!options.tied) m.gls_ = m.ctx_;
  return m;
}

TokenizedInput BemModel::encode_context(const std::vector<std::string>& words) const {
  return encode(*vocab_, words, static_cast<std::size_t>(options_.max_context_len));
}

TokenizedInput BemModel::encode_gloss(const std::string& gloss) const {
  return encode(*vocab_, split_whitespace(gloss), static_cast<std::size_t>(options_.max_gloss_len));
}

void BemModel::save(const std::string& path, const std::string& vocab_path) const {
  Checkpoint c;
  c.meta["encoder"] = encoder_config_json(options_.encoder);
  c.meta["max_context_len"] = options_.max_context_len;
  c.meta["max_gloss_len"] = options_.max_gloss_len;
  c.meta["tied"] = options_.tied;
  c.meta["freeze_ctx"] = options_.freeze_ctx;
  c.meta["freeze_gls"] = options_.freeze_gls;
  c.meta["vocab_fingerprint"] = vocab_->fingerprint();
  c.meta["vocab_path"] = vocab_path;
  add_encoder(c, "ctx.", ctx_);
  if (!options_.tied) add_encoder(c, "gls.", gls_);
  if (head) {
    std::vector<std::string> order(head->index.size());
    for (const auto& [id, row] : head->index) order[static_cast<std::size_t>(row)] = id;
    json lemmas = json::array();
    for (const auto& k : head->lemmas) lemmas.push_back(k.str());
    c.meta["head"] = {{"senses", order}, {"lemmas", lemmas}};
    add_matrix(c, "head.weight", head->weight);
    add_matrix(c, "head.bias", head->bias);
  }
  save_checkpoint(c, path);
}

BemModel BemModel::load(const std::string& path, std::shared_ptr<const Vocab> vocab) {
  if (!vocab) throw Error(ErrorKind::config, "model: vocab required");
  const Checkpoint c = load_checkpoint(path);
  BemModel m;
  try {
    if (c.meta.at("vocab_fingerprint").get<std::uint64_t>() != vocab->fingerprint()) {
      throw Error(ErrorKind::validation, "model: vocab does not match the checkpoint");
    }
    m.options_.encoder = encoder_config_from_json(c.meta.at("encoder"));
    m.options_.max_context_len = c.meta.at("max_context_len").get<int>();
    m.options_.max_gloss_len = c.meta.at("max_gloss_len").get<int>();
    m.options_.tied = c.meta.at("tied").get<bool>();
    m.options_.freeze_ctx = c.meta.at("freeze_ctx").get<bool>();
    m.options_.freeze_gls = c.meta.at("freeze_gls").get<bool>();
    m.vocab_ = std::move(vocab);
    m.ctx_ = read_encoder(c, "ctx.", m.options_.encoder);
    if (!m.options_.tied) m.gls_ = read_encoder(c, "gls.", m.options_.encoder);
    if (c.meta.contains("head")) {
      LinearHead h;
      h.weight = read_matrix(c, "head.weight");
      h.bias = read_matrix(c, "head.bias");
      const auto senses = c.meta["head"].at("senses").get<std::vector<std::string>>();
      for (std::size_t i = 0; i < senses.size(); ++i) h.index[senses[i]] = static_cast<int>(i);
      for (const auto& s : c.meta["head"].at("lemmas").get<std::vector<std::string>>()) {
        const auto dot = s.rfind('.');
        auto pos = parse_pos(s.substr(dot + 1));
        if (dot == std::string::npos || !pos) throw Error(ErrorKind::format, "model: bad head lemma " + s);
        h.lemmas.insert(LemmaKey{s.substr(0, dot), *pos});
      }
      m.head = std::move(h);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::format, std::string("model checkpoint: ") + e.what());
  }
  return m;
}

Vector embed_target(const BemModel& m, const std::vector<std::string>& words, std::size_t target) {
  if (target >= words.size()) throw Error(ErrorKind::validation, "embed_target: target index out of range");
  auto input = m.encode_context(words);
  if (target >= input.word_spans.size()) {
    throw Error(ErrorKind::validation, "embed_target: target truncated by max_len");
  }
  const auto span = input.word_spans[target];
  auto res = forward(m.ctx(), {input}, false, 0);
  return pool_word(res.hidden, 0, span);
}

std::map<SenseId, Vector> embed_senses(const BemModel& m, const std::vector<SenseId>& senses,
                                       const SenseInventory& inv, std::size_t gloss_batch_size) {
  if (gloss_batch_size == 0) throw Error(ErrorKind::config, "gloss batch size must be >= 1");
  std::vector<SenseId> unique;
  std::set<SenseId> seen;
  for (const auto& s : senses) {
    if (!inv.contains(s)) throw Error(ErrorKind::validation, "embed_senses: unknown sense " + s);
    if (seen.insert(s).second) unique.push_back(s);
  }
  std::map<SenseId, Vector> out;
  for (std::size_t start = 0; start < unique.size(); start += gloss_batch_size) {
    const std::size_t end = std::min(unique.size(), start + gloss_batch_size);
    std::vector<TokenizedInput> batch;
    for (std::size_t i = start; i < end; ++i) batch.push_back(m.encode_gloss(gloss_text(inv, unique[i])));
    auto res = forward(m.gls(), batch, false, 0);
    for (std::size_t i = start; i < end; ++i) out[unique[i]] = pool_cls(res.hidden, i - start);
  }
  return out;
}

std::vector<double> score(const Vector& r_w, const std::vector<Vector>& candidates) {
  std::vector<double> phi;
  phi.reserve(candidates.size());
  for (const auto& r_s : candidates) {
    if (r_s.size() != r_w.size()) throw Error(ErrorKind::validation, "score: dimension mismatch");
    phi.push_back(static_cast<double>(r_w.dot(r_s)));
  }
  return phi;
}

ScoredCandidates score_candidates(const Vector& r_w, const std::vector<SenseId>& ids,
                                  const std::map<SenseId, Vector>& sense_vectors) {
  ScoredCandidates sc;
  sc.sense_ids = ids;
  std::vector<Vector> vecs;
  vecs.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = sense_vectors.find(id);
    if (it == sense_vectors.end()) throw Error(ErrorKind::validation, "score: no vector for sense " + id);
    vecs.push_back(it->second);
  }
  sc.scores = score(r_w, vecs);
  return sc;
}

std::size_t argmax_rank_tiebreak(const std::vector<double>& scores) {
  if (scores.empty()) throw Error(ErrorKind::validation, "argmax over an empty candidate set");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

SenseId predict(const BemModel& m, const std::vector<std::string>& words, std::size_t target,
                const LemmaKey& key, const SenseInventory& inv) {
  const auto cands = candidate_senses(inv, key);
  if (cands.empty()) throw Error(ErrorKind::validation, "predict: no candidate senses for " + key.str());
  if (cands.size() == 1) return cands.front();
  const auto r_w = embed_target(m, words, target);
  const auto vecs = embed_senses(m, cands, inv, cands.size());
  return cands[argmax_rank_tiebreak(score_candidates(r_w, cands, vecs).scores)];
}

std::map<std::string, SenseId> predict_corpus(const BemModel& m, const Corpus& c,
                                              const SenseInventory& inv, std::size_t gloss_batch_size) {
  std::vector<SenseId> all_cands;
  for (const auto& ref : labeled_instances(c)) {
    for (auto& id : candidate_senses(inv, *token_at(c, ref).lemma_key)) all_cands.push_back(std::move(id));
  }
  const auto sense_vecs = embed_senses(m, all_cands, inv, gloss_batch_size);
  std::map<std::string, SenseId> preds;
  for (const auto& sent : c.sentences) {
    bool any = false;
    for (const auto& t : sent.tokens) any = any || t.labeled();
    if (!any) continue;
    const auto input = m.encode_context(sentence_words(sent));
    const auto res = forward(m.ctx(), {input}, false, 0);
    for (std::size_t i = 0; i < sent.tokens.size(); ++i) {
      const auto& tok = sent.tokens[i];
      if (!tok.labeled()) continue;
      const auto cands = candidate_senses(inv, *tok.lemma_key);
      if (cands.empty()) continue;
      if (cands.size() == 1 || i >= input.word_spans.size()) {
        // Truncated targets fall back to rank order.
        preds[*tok.instance_id] = cands.front();
        continue;
      }
      const auto r_w = pool_word(res.hidden, 0, input.word_spans[i]);
      preds[*tok.instance_id] = cands[argmax_rank_tiebreak(score_candidates(r_w, cands, sense_vecs).scores)];
    }
  }
  return preds;
}

double log_sum_exp(const std::vector<double>& x) {
  if (x.empty()) throw Error(ErrorKind::validation, "log_sum_exp of empty vector");
  const double mx = *std::max_element(x.begin(), x.end());
  double s = 0;
  for (double v : x) s += std::exp(v - mx);
  return mx + std::log(s);
}

std::vector<double> softmax(const std::vector<double>& x) {
  const double lse = log_sum_exp(x);
  std::vector<double> p(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) p[i] = std::exp(x[i] - lse);
  return p;
}

double bem_loss(const std::vector<double>& scores, std::size_t gold, double weight) {
  if (gold >= scores.size()) throw Error(ErrorKind::validation, "bem_loss: gold index out of range");
  if (!(weight > 0)) throw Error(ErrorKind::validation, "bem_loss: weight must be positive");
  if (scores.size() == 1) return 0.0;
  return weight * (log_sum_exp(scores) - scores[gold]);
}

std::vector<double> bem_loss_grad(const std::vector<double>& scores, std::size_t gold, double weight) {
  if (gold >= scores.size()) throw Error(ErrorKind::validation, "bem_loss: gold index out of range");
  auto g = softmax(scores);
  g[gold] -= 1.0;
  for (auto& v : g) v *= weight;
  return g;
}

double BalanceWeights::of(const LemmaKey& key, const SenseId& id) const {
  auto it = weight.find(key);
  if (it == weight.end()) return 1.0;
  auto jt = it->second.find(id);
  return jt == it->second.end() ? 1.0 : jt->second;
}

BalanceWeights balance_weights(const SenseFrequencyTable& freq, const SenseInventory& inv) {
  BalanceWeights bw;
  for (const auto& key : inv.lemma_keys()) {
    const auto cands = candidate_senses(inv, key);
    const auto lemma_it = freq.per_lemma.find(key);
    std::vector<double> raw;
    double total = 0;
    for (const auto& id : cands) {
      std::int64_t n = 0;
      if (lemma_it != freq.per_lemma.end()) {
        if (auto jt = lemma_it->second.find(id); jt != lemma_it->second.end()) n = jt->second;
      }
      raw.push_back(1.0 / static_cast<double>(n + 1));
      total += raw.back();
    }
    auto& w = bw.weight[key];
    for (std::size_t i = 0; i < cands.size(); ++i) {
      w[cands[i]] = raw[i] * static_cast<double>(cands.size()) / total;
    }
  }
  return bw;
}

ScoredCandidates linear_head_logits(const LinearHead& head, const Vector& r_w,
                                    const std::vector<SenseId>& candidates) {
  if (r_w.size() != head.weight.cols()) throw Error(ErrorKind::validation, "linear head: dimension mismatch");
  ScoredCandidates sc;
  for (const auto& id : candidates) {
    auto it = head.index.find(id);
    if (it == head.index.end()) throw Error(ErrorKind::validation, "linear head: no row for sense " + id);
    sc.sense_ids.push_back(id);
    sc.scores.push_back(static_cast<double>(head.weight.row(it->second).dot(r_w) + head.bias(0, it->second)));
  }
  return sc;
}

}  // namespace bem
