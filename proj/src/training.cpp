#include "bem/training.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "bem/checkpoint.hpp"
#include "bem/common.hpp"
#include "bem/evaluation.hpp"

namespace bem {

void TrainConfig::validate() const {
  auto bad = [](const std::string& m) { throw Error(ErrorKind::config, "train config: " + m); };
  if (epochs < 1) bad("epochs must be >= 1");
  if (context_batch < 1 || gloss_batch < 1) bad("batch sizes must be >= 1");
  if (warmup_steps < 0) bad("warmup_steps must be >= 0");
  if (peak_lr < 0) bad("peak_lr must be >= 0");
  if (weight_decay < 0) bad("weight_decay must be >= 0");
  if (fixed_total_steps && *fixed_total_steps < 1) bad("fixed_total_steps must be >= 1");
}

double lr_at(const TrainConfig& cfg, long step, long total_steps) {
  if (step < 0) step = 0;
  if (step > total_steps) step = total_steps;
  if (step < cfg.warmup_steps) {
    return cfg.peak_lr * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
  }
  if (total_steps <= cfg.warmup_steps) return cfg.peak_lr;
  return cfg.peak_lr * static_cast<double>(total_steps - step) /
         static_cast<double>(total_steps - cfg.warmup_steps);
}

namespace {

struct Example {
  std::size_t context = 0;  // index into contexts
  WordSpan span;
  std::vector<std::size_t> candidates;  // indices into glosses
  std::size_t gold = 0;                 // position in candidates
  double weight = 1.0;
};

struct Moments {
  EncoderParams<float> m, v;
};

void adam_update(EncoderParams<float>& p, const EncoderParams<float>& g, Moments& mom,
                 const TrainConfig& cfg, double lr, long t) {
  const float b1 = static_cast<float>(cfg.beta1);
  const float b2 = static_cast<float>(cfg.beta2);
  const float bc1 = static_cast<float>(1.0 - std::pow(cfg.beta1, static_cast<double>(t)));
  const float bc2 = static_cast<float>(1.0 - std::pow(cfg.beta2, static_cast<double>(t)));
  const float eps = static_cast<float>(cfg.adam_eps);
  const float lr_f = static_cast<float>(lr);
  const float wd = static_cast<float>(cfg.weight_decay);
  std::vector<Mat<float>*> ps, ms, vs;
  std::vector<const Mat<float>*> gs;
  p.visit([&](const std::string&, Mat<float>& x) { ps.push_back(&x); });
  mom.m.visit([&](const std::string&, Mat<float>& x) { ms.push_back(&x); });
  mom.v.visit([&](const std::string&, Mat<float>& x) { vs.push_back(&x); });
  g.visit([&](const std::string&, const Mat<float>& x) { gs.push_back(&x); });
  for (std::size_t i = 0; i < ps.size(); ++i) {
    float* pw = ps[i]->data();
    float* mw = ms[i]->data();
    float* vw = vs[i]->data();
    const float* gw = gs[i]->data();
    const Eigen::Index n = ps[i]->size();
    for (Eigen::Index j = 0; j < n; ++j) {
      mw[j] = b1 * mw[j] + (1.0f - b1) * gw[j];
      vw[j] = b2 * vw[j] + (1.0f - b2) * gw[j] * gw[j];
      const float update = (mw[j] / bc1) / (std::sqrt(vw[j] / bc2) + eps) + wd * pw[j];
      pw[j] -= lr_f * update;
    }
  }
}

}  // namespace

struct Trainer::Impl {
  BemModel& model;
  TrainConfig cfg;
  std::vector<TokenizedInput> contexts;
  std::vector<TokenizedInput> glosses;
  std::vector<Example> examples;
  long skipped = 0;
  long step = 0;
  Moments ctx_mom, gls_mom;
  EncoderParams<float> ctx_grad, gls_grad;
  // permutation cache for the current epoch
  long cached_epoch = -1;
  std::vector<std::size_t> order;

  Impl(BemModel& m, const Corpus& train_c, const SenseInventory& inv, const SenseFrequencyTable& freq,
       TrainConfig c)
      : model(m), cfg(std::move(c)) {
    cfg.validate();
    const auto weights = balance_weights(freq, inv);
    std::map<SenseId, std::size_t> gloss_index;
    for (const auto& sent : train_c.sentences) {
      bool any = false;
      for (const auto& t : sent.tokens) any = any || t.labeled();
      if (!any) continue;
      auto input = model.encode_context(sentence_words(sent));
      const std::size_t ctx_idx = contexts.size();
      bool used = false;
      for (std::size_t i = 0; i < sent.tokens.size(); ++i) {
        const auto& tok = sent.tokens[i];
        if (!tok.labeled()) continue;
        const auto cands = candidate_senses(inv, *tok.lemma_key);
        // Lowest-rank gold sense is the loss target.
        std::size_t gold = cands.size();
        for (std::size_t j = 0; j < cands.size() && gold == cands.size(); ++j) {
          if (std::find(tok.gold.begin(), tok.gold.end(), cands[j]) != tok.gold.end()) gold = j;
        }
        if (cands.empty() || gold == cands.size() || i >= input.word_spans.size()) {
          ++skipped;
          continue;
        }
        Example ex;
        ex.context = ctx_idx;
        ex.span = input.word_spans[i];
        ex.gold = gold;
        ex.weight = cfg.balanced ? weights.of(*tok.lemma_key, cands[gold]) : 1.0;
        for (const auto& id : cands) {
          auto [it, inserted] = gloss_index.emplace(id, glosses.size());
          if (inserted) glosses.push_back(model.encode_gloss(gloss_text(inv, id)));
          ex.candidates.push_back(it->second);
        }
        examples.push_back(std::move(ex));
        used = true;
      }
      if (used) contexts.push_back(std::move(input));
    }
    if (examples.empty()) throw Error(ErrorKind::validation, "train: no usable training instances");
    const auto& ecfg = model.ctx().config;
    ctx_mom = {EncoderParams<float>::zeros(ecfg), EncoderParams<float>::zeros(ecfg)};
    ctx_grad = EncoderParams<float>::zeros(ecfg);
    if (!model.tied()) {
      gls_mom = {EncoderParams<float>::zeros(ecfg), EncoderParams<float>::zeros(ecfg)};
      gls_grad = EncoderParams<float>::zeros(ecfg);
    }
  }

  long steps_per_epoch() const {
    const long n = static_cast<long>(examples.size());
    return (n + cfg.context_batch - 1) / cfg.context_batch;
  }

  long total_steps() const {
    return cfg.fixed_total_steps ? *cfg.fixed_total_steps : cfg.epochs * steps_per_epoch();
  }

  const std::vector<std::size_t>& epoch_order(long epoch) {
    if (epoch != cached_epoch) {
      order.resize(examples.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      Rng rng(hash_combine(cfg.seed, 0xe90c0000ULL + static_cast<std::uint64_t>(epoch)));
      rng.shuffle(order);
      cached_epoch = epoch;
    }
    return order;
  }

  double train_step() {
    const long spe = steps_per_epoch();
    const long epoch = step / spe;
    const long within = step % spe;
    const auto& ord = epoch_order(epoch);
    const std::size_t begin = static_cast<std::size_t>(within * cfg.context_batch);
    const std::size_t end = std::min(ord.size(), begin + static_cast<std::size_t>(cfg.context_batch));
    std::vector<const Example*> batch;
    for (std::size_t i = begin; i < end; ++i) batch.push_back(&examples[ord[i]]);

    const bool ctx_trainable = !model.options().freeze_ctx;
    const bool gls_trainable = !model.options().freeze_gls;
    const std::uint64_t step_key = hash_combine(cfg.seed, static_cast<std::uint64_t>(step));

    // Context encoder: distinct sentences in first-use order.
    std::map<std::size_t, std::size_t> ctx_row;
    std::vector<TokenizedInput> ctx_inputs;
    for (const auto* ex : batch) {
      if (ctx_row.emplace(ex->context, ctx_inputs.size()).second) ctx_inputs.push_back(contexts[ex->context]);
    }
    auto ctx_fwd = forward(model.ctx(), ctx_inputs, true, hash_combine(step_key, 1));

    // Gloss encoder over the union of candidates, chunked by gloss_batch.
    std::map<std::size_t, std::size_t> gls_row;
    std::vector<std::size_t> gls_order;
    for (const auto* ex : batch) {
      for (std::size_t c : ex->candidates) {
        if (gls_row.emplace(c, gls_order.size()).second) gls_order.push_back(c);
      }
    }
    const std::size_t chunk = static_cast<std::size_t>(cfg.gloss_batch);
    std::vector<ForwardResult<float>> gls_fwd;
    std::vector<Vector> sense_vec(gls_order.size());
    for (std::size_t start = 0; start < gls_order.size(); start += chunk) {
      const std::size_t stop = std::min(gls_order.size(), start + chunk);
      std::vector<TokenizedInput> inputs;
      for (std::size_t i = start; i < stop; ++i) inputs.push_back(glosses[gls_order[i]]);
      gls_fwd.push_back(forward(model.gls(), inputs, true, hash_combine(step_key, 2), start));
      for (std::size_t i = start; i < stop; ++i) sense_vec[i] = pool_cls(gls_fwd.back().hidden, i - start);
    }

    // Loss: mean over the batch of weighted candidate cross-entropy.
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    const Eigen::Index d = model.ctx().config.d_model;
    std::vector<Mat<float>> d_ctx;
    for (const auto& s : ctx_fwd.hidden.states) d_ctx.push_back(Mat<float>::Zero(s.rows(), d));
    std::vector<Vector> d_sense(gls_order.size(), Vector::Zero(d));
    double loss = 0;
    for (const auto* ex : batch) {
      const std::size_t row = ctx_row[ex->context];
      const Vector r_w = pool_word(ctx_fwd.hidden, row, ex->span);
      std::vector<Vector> cand_vecs;
      for (std::size_t c : ex->candidates) cand_vecs.push_back(sense_vec[gls_row[c]]);
      const auto phi = score(r_w, cand_vecs);
      loss += bem_loss(phi, ex->gold, ex->weight) * inv_b;
      const auto dphi = bem_loss_grad(phi, ex->gold, ex->weight * inv_b);
      Vector d_rw = Vector::Zero(d);
      for (std::size_t j = 0; j < cand_vecs.size(); ++j) {
        const float g = static_cast<float>(dphi[j]);
        d_rw += g * cand_vecs[j];
        d_sense[gls_row[ex->candidates[j]]] += g * r_w;
      }
      const float share = 1.0f / static_cast<float>(ex->span.size());
      for (std::size_t t = ex->span.begin; t < ex->span.end; ++t) {
        d_ctx[row].row(static_cast<Eigen::Index>(t)) += share * d_rw;
      }
    }
    if (!std::isfinite(loss)) {
      throw Error(ErrorKind::numeric, "train: non-finite loss at step " + std::to_string(step) +
                                          " (lr " + std::to_string(lr_at(cfg, step, total_steps())) + ")");
    }

    ctx_grad.set_zero();
    if (!model.tied()) gls_grad.set_zero();
    EncoderParams<float>& gls_target = model.tied() ? ctx_grad : gls_grad;
    if (ctx_trainable) backward_accumulate(model.ctx(), ctx_fwd.record, d_ctx, ctx_grad);
    if (gls_trainable) {
      for (std::size_t ci = 0; ci < gls_fwd.size(); ++ci) {
        const std::size_t start = ci * chunk;
        std::vector<Mat<float>> d_out;
        for (std::size_t b = 0; b < gls_fwd[ci].hidden.batch(); ++b) {
          Mat<float> m = Mat<float>::Zero(gls_fwd[ci].hidden.states[b].rows(), d);
          m.row(0) = d_sense[start + b];
          d_out.push_back(std::move(m));
        }
        backward_accumulate(model.gls(), gls_fwd[ci].record, d_out, gls_target);
      }
    }

    const double lr = lr_at(cfg, step, total_steps());
    const long t = step + 1;
    if (model.tied()) {
      if (ctx_trainable || gls_trainable) adam_update(model.ctx(), ctx_grad, ctx_mom, cfg, lr, t);
    } else {
      if (ctx_trainable) adam_update(model.ctx(), ctx_grad, ctx_mom, cfg, lr, t);
      if (gls_trainable) adam_update(model.gls(), gls_grad, gls_mom, cfg, lr, t);
    }
    ++step;
    return loss;
  }
};

Trainer::Trainer(BemModel& model, const Corpus& train_c, const SenseInventory& inv,
                 const SenseFrequencyTable& freq, TrainConfig cfg)
    : impl_(std::make_unique<Impl>(model, train_c, inv, freq, std::move(cfg))) {}

Trainer::~Trainer() = default;

long Trainer::steps_per_epoch() const { return impl_->steps_per_epoch(); }
long Trainer::total_steps() const { return impl_->total_steps(); }
long Trainer::step() const { return impl_->step; }
std::size_t Trainer::instance_count() const { return impl_->examples.size(); }
long Trainer::skipped_instances() const { return impl_->skipped; }
double Trainer::train_step() { return impl_->train_step(); }

void Trainer::save_state(const std::string& path) const {
  Checkpoint c;
  c.meta["kind"] = "train-state";
  c.meta["step"] = impl_->step;
  c.meta["seed"] = impl_->cfg.seed;
  add_encoder(c, "adam.ctx.m.", impl_->ctx_mom.m);
  add_encoder(c, "adam.ctx.v.", impl_->ctx_mom.v);
  if (!impl_->model.tied()) {
    add_encoder(c, "adam.gls.m.", impl_->gls_mom.m);
    add_encoder(c, "adam.gls.v.", impl_->gls_mom.v);
  }
  save_checkpoint(c, path);
}

void Trainer::load_state(const std::string& path) {
  const auto c = load_checkpoint(path);
  if (c.meta.value("kind", "") != "train-state") throw Error(ErrorKind::format, path + ": not a train-state file");
  const auto& ecfg = impl_->model.ctx().config;
  impl_->step = c.meta.at("step").get<long>();
  impl_->ctx_mom.m = read_encoder(c, "adam.ctx.m.", ecfg);
  impl_->ctx_mom.v = read_encoder(c, "adam.ctx.v.", ecfg);
  if (!impl_->model.tied()) {
    impl_->gls_mom.m = read_encoder(c, "adam.gls.m.", ecfg);
    impl_->gls_mom.v = read_encoder(c, "adam.gls.v.", ecfg);
  }
}

namespace {

double dev_f1(const BemModel& m, const Corpus& dev, const SenseInventory& inv, std::size_t gloss_batch) {
  const auto preds = predict_corpus(m, dev, inv, gloss_batch);
  return score(preds, dev, EvalPartition{}).all.f1();
}

}  // namespace

TrainResult train(BemModel& model, const Corpus& train_c, const Corpus* dev_c, const SenseInventory& inv,
                  const SenseFrequencyTable& freq, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  Trainer trainer(model, train_c, inv, freq, cfg);
  TrainResult result;
  result.skipped_instances = trainer.skipped_instances();
  const long total = trainer.total_steps();
  const long spe = trainer.steps_per_epoch();
  result.loss_trace.reserve(static_cast<std::size_t>(total));
  int epoch = 0;
  while (trainer.step() < total) {
    result.loss_trace.push_back(trainer.train_step());
    if (trainer.step() % spe == 0 || trainer.step() == total) {
      ++epoch;
      if (dev_c) {
        const double f1 = dev_f1(model, *dev_c, inv, static_cast<std::size_t>(cfg.gloss_batch));
        result.dev_trace.push_back(f1);
        if (f1 > result.best_dev_f1) {
          result.best_dev_f1 = f1;
          result.best = model;
        }
        if (on_epoch) on_epoch(epoch, f1);
      } else if (on_epoch) {
        on_epoch(epoch, -1.0);
      }
    }
  }
  result.steps = trainer.step();
  return result;
}

long full_run_steps(const BemModel& model, const Corpus& train_c, const SenseInventory& inv,
                    const TrainConfig& cfg) {
  TrainConfig full = cfg;
  full.fixed_total_steps.reset();
  BemModel scratch = model;
  return Trainer(scratch, train_c, inv, sense_frequencies(train_c), full).total_steps();
}

std::vector<KShotRun> train_kshot(const BemModel& init, const Corpus& train_c, const std::vector<int>& ks,
                                  std::uint64_t seed, const SenseInventory& inv, const TrainConfig& cfg,
                                  const Corpus* dev_c) {
  TrainConfig run_cfg = cfg;
  run_cfg.fixed_total_steps = full_run_steps(init, train_c, inv, cfg);
  std::vector<KShotRun> runs;
  for (int k : ks) {
    if (k < 1) throw Error(ErrorKind::config, "k-shot values must be >= 1");
    const Corpus filtered = kshot_filter(train_c, k, seed);
    KShotRun run{k, init, {}};
    run.result = train(run.model, filtered, dev_c, inv, sense_frequencies(filtered), run_cfg);
    runs.push_back(std::move(run));
  }
  return runs;
}

LinearHead train_linear_head(const BemModel& frozen, const Corpus& train_c, const SenseInventory& inv,
                             const LinearTrainConfig& cfg) {
  if (cfg.epochs < 1 || cfg.batch < 1 || !(cfg.lr > 0)) throw Error(ErrorKind::config, "linear head: bad config");
  const auto freq = sense_frequencies(train_c);
  LinearHead head;
  for (const auto& [id, n] : freq.count) {
    if (n > 0) head.index.emplace(id, static_cast<int>(head.index.size()));
  }
  for (const auto& [key, senses] : freq.per_lemma) head.lemmas.insert(key);
  const Eigen::Index d = frozen.ctx().config.d_model;
  const auto n_rows = static_cast<Eigen::Index>(head.index.size());

  struct Item {
    Eigen::RowVectorXd feature;
    std::vector<int> rows;  // candidate rows covered by the head
    std::size_t gold = 0;
  };
  std::vector<Item> items;
  for (const auto& sent : train_c.sentences) {
    bool any = false;
    for (const auto& t : sent.tokens) any = any || t.labeled();
    if (!any) continue;
    const auto input = frozen.encode_context(sentence_words(sent));
    const auto res = forward(frozen.ctx(), {input}, false, 0);
    for (std::size_t i = 0; i < sent.tokens.size(); ++i) {
      const auto& tok = sent.tokens[i];
      if (!tok.labeled() || i >= input.word_spans.size()) continue;
      Item item;
      std::size_t gold = SIZE_MAX;
      for (const auto& c : candidate_senses(inv, *tok.lemma_key)) {
        auto it = head.index.find(c);
        if (it == head.index.end()) continue;
        if (gold == SIZE_MAX && std::find(tok.gold.begin(), tok.gold.end(), c) != tok.gold.end()) {
          gold = item.rows.size();
        }
        item.rows.push_back(it->second);
      }
      if (gold == SIZE_MAX) continue;
      item.gold = gold;
      item.feature = pool_word(res.hidden, 0, input.word_spans[i]).cast<double>();
      items.push_back(std::move(item));
    }
  }

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n_rows, d), mw = w, vw = w;
  Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(n_rows), mb = b, vb = b;
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  long t = 0;
  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(hash_combine(cfg.seed, 0x11ea0000ULL + static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
      Eigen::MatrixXd gw = Eigen::MatrixXd::Zero(n_rows, d);
      Eigen::RowVectorXd gb = Eigen::RowVectorXd::Zero(n_rows);
      const double scale = 1.0 / static_cast<double>(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        const auto& it = items[order[i]];
        std::vector<double> logits;
        for (int r : it.rows) logits.push_back(w.row(r).dot(it.feature) + b(r));
        const auto g = bem_loss_grad(logits, it.gold, scale);
        for (std::size_t j = 0; j < it.rows.size(); ++j) {
          gw.row(it.rows[j]) += g[j] * it.feature;
          gb(it.rows[j]) += g[j];
        }
      }
      ++t;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
      mw = b1 * mw + (1 - b1) * gw;
      vw = b2 * vw + (1 - b2) * gw.cwiseProduct(gw);
      mb = b1 * mb + (1 - b1) * gb;
      vb = b2 * vb + (1 - b2) * gb.cwiseProduct(gb);
      w.array() -= cfg.lr * (mw.array() / c1) / ((vw.array() / c2).sqrt() + eps);
      b.array() -= cfg.lr * (mb.array() / c1) / ((vb.array() / c2).sqrt() + eps);
    }
  }
  head.weight = w.cast<float>();
  head.bias = b.cast<float>();
  return head;
}

}  // namespace bem
