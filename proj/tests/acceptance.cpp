// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "bem/commands.hpp"
#include "bem/common.hpp"
#include "bem/corpus.hpp"
#include "bem/evaluation.hpp"
#include "bem/model.hpp"
#include "bem/projection.hpp"
#include "bem/training.hpp"
#include "gradient_oracle.hpp"
#include "json.hpp"
#include "test_util.hpp"

using namespace bem;
using nlohmann::json;

namespace {

// Seeded synthetic benchmark, calibrated once and then frozen.
constexpr std::uint64_t kDataSeed = 1234;
constexpr std::uint64_t kModelSeed = 7;
constexpr std::uint64_t kTrainSeed = 3;
constexpr std::uint64_t kKShotSeed = 11;

SynthConfig benchmark_data_config() {
  SynthConfig sc;
  sc.n_lemmas = 40;
  sc.min_senses = 2;
  sc.max_senses = 4;
  sc.zipf_exponent = 1.0;
  sc.train_instances = 4000;
  sc.eval_instances = 800;
  sc.zero_shot_fraction = 0.1;
  sc.vocab_size = 100;
  sc.context_ambiguity = 0.1;
  return sc;
}

ModelOptions benchmark_model_options() {
  ModelOptions mo;
  mo.encoder.d_model = 64;
  mo.encoder.n_layers = 2;
  mo.encoder.n_heads = 4;
  mo.encoder.d_ff = 256;
  mo.encoder.dropout_rate = 0.0;
  return mo;
}

TrainConfig benchmark_train_config() {
  TrainConfig tc;
  tc.epochs = 6;
  tc.context_batch = 4;
  tc.peak_lr = 5e-4;
  tc.warmup_steps = 100;
  tc.seed = kTrainSeed;
  return tc;
}

// Margins from the criteria text.
constexpr double kAllMarginOverMfs = 10.0;
constexpr double kLfsMarginOverLinear = 10.0;
constexpr double kZeroShotFactor = 2.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;
std::set<int> selected;  // empty = all

bool wanted(int id) { return selected.empty() || selected.count(id) > 0; }

void report(int id, const std::string& title, const std::function<Outcome()>& body) {
  if (!wanted(id)) return;
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  char buf[64];
  std::snprintf(buf, sizeof buf, " (%.1fs)", secs);
  std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << id << ": " << title << " -- " << o.detail << buf
            << std::endl;
}

std::string fmt(double v, int prec = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

bool same_params(const EncoderParams<float>& a, const EncoderParams<float>& b) {
  std::vector<const Mat<float>*> pa, pb;
  a.visit([&](const std::string&, const Mat<float>& m) { pa.push_back(&m); });
  b.visit([&](const std::string&, const Mat<float>& m) { pb.push_back(&m); });
  bool same = pa.size() == pb.size();
  for (std::size_t i = 0; same && i < pa.size(); ++i) same = *pa[i] == *pb[i];
  return same;
}

std::shared_ptr<const Vocab> vocab_for(const SynthData& data) {
  std::vector<std::vector<std::string>> texts;
  for (const auto& s : data.train.sentences) texts.push_back(sentence_words(s));
  for (const auto& e : data.inventory.entries()) texts.push_back(split_whitespace(e.gloss));
  return std::make_shared<const Vocab>(build_vocab(texts, 1));
}

// ---------------------------------------------------------------------------

Outcome gradient_correctness() {
  EncoderConfig cfg;
  cfg.vocab_size = 30;
  cfg.d_model = 16;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.d_ff = 32;
  cfg.max_len = 8;
  cfg.dropout_rate = 0.1;
  const auto p = init_params<double>(cfg, 5);
  // Larger-than-init perturbation so every tensor has a non-trivial gradient.
  auto q = p;
  Rng rng(6);
  q.visit([&](const std::string&, Mat<double>& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += 0.1 * rng.normal();
  });
  auto seq = [](std::vector<TokenId> ids) {
    TokenizedInput t;
    t.ids = std::move(ids);
    return t;
  };
  const std::vector<TokenizedInput> batch = {seq({kClsId, 4, 9, 17, 22, kSepId}), seq({kClsId, 11, 5, kSepId})};
  std::set<std::string> covered;
  double worst = 0;
  int n = 0;
  for (bool train : {false, true}) {
    for (const auto& r : testing::check_directions(q, batch, train, 21, 50, train ? 8 : 7, 1e-5)) {
      worst = std::max(worst, r.rel_error);
      covered.insert(r.tensor);
      ++n;
    }
  }
  std::size_t n_tensors = 0;
  q.visit([&](const std::string&, const Mat<double>&) { ++n_tensors; });
  const bool all_covered = covered.size() == n_tensors + 1;  // + the all-tensor direction
  return {worst < 1e-4 && all_covered && n >= 50,
          std::to_string(n) + " directions over " + std::to_string(covered.size() - 1) + "/" +
              std::to_string(n_tensors) + " tensors, max rel err " + sci(worst) + " (< 1e-4)"};
}

Outcome loss_identity() {
  Rng rng(2024);
  double worst = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng.below(20);
    std::vector<double> phi(n);
    for (auto& x : phi) x = rng.normal() * 4.0;
    const std::size_t gold = rng.below(n);
    const double ref = -std::log(softmax(phi)[gold]);
    worst = std::max(worst, std::abs(bem_loss(phi, gold, 1.0) - ref));
  }
  const bool single = bem_loss({0.37}, 0, 1.0) == 0.0 && bem_loss({-5.0}, 0, 1.0) == 0.0;
  const double ln2_err = std::abs(bem_loss({0.0, 0.0}, 0, 1.0) - std::log(2.0));
  return {worst <= 1e-6 && single && ln2_err <= 1e-9,
          "max |loss - (-log softmax)| " + sci(worst) + " over 1000 vectors; single-candidate loss 0: " +
              (single ? "yes" : "no") + "; |loss(0,0) - ln2| " + sci(ln2_err)};
}

Outcome ablation_mechanics() {
  SynthConfig sc;
  sc.n_lemmas = 8;
  sc.train_instances = 200;
  sc.eval_instances = 20;
  const auto data = generate_synthetic(sc, 5);
  const auto vocab = vocab_for(data);
  const auto freq = sense_frequencies(data.train);
  ModelOptions mo;
  mo.encoder.d_model = 32;
  mo.encoder.n_layers = 1;
  mo.encoder.n_heads = 2;
  mo.encoder.d_ff = 64;
  TrainConfig tc;
  tc.peak_lr = 1e-3;
  tc.warmup_steps = 2;
  tc.seed = 1;
  std::string detail;
  bool ok = true;
  for (int mode = 0; mode < 3; ++mode) {
    auto opts = mo;
    opts.freeze_ctx = mode != 1;
    opts.freeze_gls = mode != 0;
    auto m = BemModel::create(vocab, opts, 2);
    const auto init = m;
    Trainer tr(m, data.train, data.inventory, freq, tc);
    for (int i = 0; i < 10; ++i) tr.train_step();
    const bool ctx_same = same_params(m.ctx(), init.ctx());
    const bool gls_same = same_params(m.gls(), init.gls());
    ok = ok && ctx_same == opts.freeze_ctx && gls_same == opts.freeze_gls;
    detail += std::string(opts.freeze_ctx ? "freeze-ctx" : "") + (mode == 2 ? "+" : "") +
              (opts.freeze_gls ? "freeze-gls" : "") + " -> ctx " + (ctx_same ? "unchanged" : "updated") + ", gls " +
              (gls_same ? "unchanged" : "updated") + "; ";
  }
  auto tied_opts = mo;
  tied_opts.tied = true;
  auto tied = BemModel::create(vocab, tied_opts, 2);
  {
    Trainer tr(tied, data.train, data.inventory, freq, tc);
    for (int i = 0; i < 10; ++i) tr.train_step();
  }
  const auto input = tied.encode_context(sentence_words(data.eval.sentences.front()));
  const auto hc = forward(tied.ctx(), {input}, false, 0);
  const auto hg = forward(tied.gls(), {input}, false, 0);
  const bool tied_same = hc.hidden.states[0] == hg.hidden.states[0];
  ok = ok && tied_same;
  detail += std::string("tied roles identical hidden states: ") + (tied_same ? "yes" : "no");
  return {ok, detail};
}

Outcome partition_s1(const SynthData& data) {
  const auto freq = sense_frequencies(data.train);
  for (const auto& ref : labeled_instances(data.eval)) {
    if (token_at(data.eval, ref).gold.size() != 1) return {false, "benchmark eval set is not single-gold"};
  }
  const auto part = build_partition(data.eval, freq, data.train, data.inventory);
  const auto r = score(baseline_s1(data.eval, data.inventory), data.eval, part);
  return {r.mfs.f1() == 100.0 && r.lfs.f1() == 0.0,
          "S1 on " + std::to_string(r.mfs.total) + " MFS / " + std::to_string(r.lfs.total) + " LFS instances: " +
              fmt(r.mfs.f1(), 1) + " / " + fmt(r.lfs.f1(), 1)};
}

Outcome kshot_filter_check(const SynthData& data) {
  auto counts = [](const Corpus& c) {
    std::map<SenseId, long> out;
    for (const auto& ref : labeled_instances(c)) {
      for (const auto& g : token_at(c, ref).gold) ++out[g];
    }
    return out;
  };
  const auto full = counts(data.train);
  long max_count = 0;
  for (const auto& [id, n] : full) max_count = std::max(max_count, n);
  bool capped = true;
  for (int k : {1, 2, 5, 10, 50}) {
    const auto got = counts(kshot_filter(data.train, k, kKShotSeed));
    for (const auto& [id, n] : full) {
      const auto it = got.find(id);
      capped = capped && it != got.end() && it->second == std::min<long>(k, n);
    }
    capped = capped && got.size() == full.size();
  }
  const bool identity = counts(kshot_filter(data.train, static_cast<int>(max_count) + 1, kKShotSeed)) == full;
  const bool deterministic = serialize_corpus(kshot_filter(data.train, 5, kKShotSeed)) ==
                             serialize_corpus(kshot_filter(data.train, 5, kKShotSeed));
  return {capped && identity && deterministic,
          std::string("counts == min(k, n) for k in {1,2,5,10,50}: ") + (capped ? "yes" : "no") +
              "; k > max count is identity: " + (identity ? "yes" : "no") +
              "; deterministic: " + (deterministic ? "yes" : "no")};
}

struct RunScores {
  DatasetReport report;
  std::size_t steps = 0;
};

struct Benchmark {
  SynthData data;
  SenseFrequencyTable freq;
  EvalPartition part;
  RunScores standard, balanced, linear;
  std::map<int, RunScores> kshot;
  DatasetReport train_mfs, s1;
};

Benchmark run_benchmark(const SynthData& data) {
  Benchmark b;
  b.data = data;
  b.freq = sense_frequencies(data.train);
  b.part = build_partition(data.eval, b.freq, data.train, data.inventory);
  const auto vocab = vocab_for(data);
  const auto init = BemModel::create(vocab, benchmark_model_options(), kModelSeed);
  const auto tc = benchmark_train_config();
  auto eval = [&](const BemModel& m) { return score(predict_corpus(m, data.eval, data.inventory), data.eval, b.part); };
  auto log = [](const std::string& what) { std::cerr << "  [benchmark] " << what << std::endl; };

  b.train_mfs = score(baseline_training_mfs(data.eval, b.freq, data.inventory), data.eval, b.part);
  b.s1 = score(baseline_s1(data.eval, data.inventory), data.eval, b.part);
  {
    auto m = init;
    LinearTrainConfig lc;
    lc.seed = kTrainSeed;
    m.head = train_linear_head(m, data.train, data.inventory, lc);
    b.linear.report = score(predict_linear(m, data.eval, data.inventory), data.eval, b.part);
    log("linear baseline done");
  }
  for (bool balanced : {false, true}) {
    auto m = init;
    auto cfg = tc;
    cfg.balanced = balanced;
    auto res = train(m, data.train, nullptr, data.inventory, b.freq, cfg);
    auto& slot = balanced ? b.balanced : b.standard;
    slot.report = eval(m);
    slot.steps = res.loss_trace.size();
    log(std::string(balanced ? "balanced" : "standard") + " run done");
  }
  for (auto& run : train_kshot(init, data.train, {1, 5}, kKShotSeed, data.inventory, tc)) {
    b.kshot[run.k] = {eval(run.model), run.result.loss_trace.size()};
    log("k=" + std::to_string(run.k) + " run done");
  }
  return b;
}

Outcome benchmark_trends(const Benchmark& b) {
  const auto& bem = b.standard.report;
  const double all_gap = bem.all.f1() - b.train_mfs.all.f1();
  const double lfs_gap = bem.lfs.f1() - b.linear.report.lfs.f1();
  const double zs_bem = bem.zero_shot_senses.f1();
  const double zs_rank1 = b.s1.zero_shot_senses.f1();
  const bool a = all_gap >= kAllMarginOverMfs;
  const bool bb = lfs_gap >= kLfsMarginOverLinear;
  const bool c = bem.zero_shot_senses.total > 0 && zs_bem >= kZeroShotFactor * zs_rank1;
  return {a && bb && c,
          "(a) ALL " + fmt(bem.all.f1(), 1) + " vs training-MFS " + fmt(b.train_mfs.all.f1(), 1) + " (+" +
              fmt(all_gap, 1) + ", need +10) " + (a ? "ok" : "FAIL") + "; (b) LFS " + fmt(bem.lfs.f1(), 1) +
              " vs frozen-linear " + fmt(b.linear.report.lfs.f1(), 1) + " (+" + fmt(lfs_gap, 1) + ", need +10) " +
              (bb ? "ok" : "FAIL") + "; (c) zero-shot-sense acc " + fmt(zs_bem, 1) + " vs rank-1 " + fmt(zs_rank1, 1) +
              " on " + std::to_string(bem.zero_shot_senses.total) + " instances (need >= 2x) " + (c ? "ok" : "FAIL")};
}

Outcome balanced_trend(const Benchmark& b) {
  const auto& s = b.standard.report;
  const auto& w = b.balanced.report;
  const bool lfs = w.lfs.f1() >= s.lfs.f1();
  const bool mfs = w.mfs.f1() <= s.mfs.f1();
  return {lfs && mfs, "LFS balanced " + fmt(w.lfs.f1(), 1) + " >= standard " + fmt(s.lfs.f1(), 1) + ": " +
                          (lfs ? "yes" : "no") + "; MFS balanced " + fmt(w.mfs.f1(), 1) + " <= standard " +
                          fmt(s.mfs.f1(), 1) + ": " + (mfs ? "yes" : "no")};
}

Outcome fewshot_trend(const Benchmark& b) {
  const double f1 = b.kshot.at(1).report.all.f1();
  const double f5 = b.kshot.at(5).report.all.f1();
  const double ff = b.standard.report.all.f1();
  const bool order = f1 <= f5 && f5 <= ff;
  const auto steps = b.standard.steps;
  const bool parity = b.kshot.at(1).steps == steps && b.kshot.at(5).steps == steps && steps > 0;
  return {order && parity, "ALL-F1 k=1 " + fmt(f1, 1) + " <= k=5 " + fmt(f5, 1) + " <= full " + fmt(ff, 1) + ": " +
                               (order ? "yes" : "no") + "; trace lengths " + std::to_string(b.kshot.at(1).steps) +
                               "/" + std::to_string(b.kshot.at(5).steps) + "/" + std::to_string(steps)};
}

std::vector<std::string> files_in(const std::filesystem::path& dir) {
  std::vector<std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out.push_back(std::filesystem::relative(e.path(), dir).string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Runs the whole command pipeline into `root`, with per-epoch progress muted.
void pipeline(const std::string& root) {
  std::ostringstream muted;
  auto* saved = std::cerr.rdbuf(muted.rdbuf());
  struct Restore {
    std::streambuf* buf;
    ~Restore() { std::cerr.rdbuf(buf); }
  } restore{saved};
  auto at = [&](const std::string& f) { return root + "/" + f; };
  json synth = {{"n_lemmas", 8}, {"train_instances", 240}, {"eval_instances", 80}, {"seed", 17},
                {"out_dir", at("data")}};
  cli::run_command("synth", synth);
  cli::run_command("prepare", {{"train", {at("data/train.jsonl")}}, {"inventory", at("data/inventory.jsonl")},
                               {"out", at("vocab.txt")}});
  const json base = {{"train", at("data/train.jsonl")}, {"dev", at("data/eval.jsonl")},
                     {"inventory", at("data/inventory.jsonl")}, {"vocab", at("vocab.txt")},
                     {"epochs", 2}, {"d_model", 16}, {"n_layers", 1}, {"n_heads", 2}, {"d_ff", 32},
                     {"max_context_len", 24}, {"max_gloss_len", 16}, {"dropout", 0.1}, {"peak_lr", 1e-3}, {"warmup", 5}, {"seed", 4}};
  auto variant = [&](const std::string& dir, json extra) {
    json j = base;
    j["out_dir"] = at(dir);
    for (auto& [k, v] : extra.items()) j[k] = v;
    cli::run_command("train", j);
  };
  variant("run_std", json::object());
  variant("run_bal", {{"balanced", true}});
  variant("run_k1", {{"kshot", 1}});
  variant("run_tied", {{"tied", true}});
  variant("run_lin", {{"linear_baseline", true}, {"linear_epochs", 5}});
  auto eval = [&](const std::string& out, json extra) {
    json j = {{"eval", {at("data/eval.jsonl")}}, {"train_freq", at("data/train.jsonl")},
              {"inventory", at("data/inventory.jsonl")}, {"out", at(out)}};
    for (auto& [k, v] : extra.items()) j[k] = v;
    cli::run_command("eval", j);
  };
  eval("ev_bem", {{"model", at("run_std/model.ckpt")}});
  eval("ev_bal", {{"model", at("run_bal/best.ckpt")}});
  eval("ev_lin", {{"model", at("run_lin/model.ckpt")}, {"baseline", "linear"}});
  eval("ev_mfs", {{"baseline", "mfs"}});
  eval("ev_s1", {{"baseline", "s1"}});
  const auto inv = load_inventory(at("data/inventory.jsonl"));
  cli::run_command("export-embeddings", {{"model", at("run_std/model.ckpt")}, {"corpus", at("data/eval.jsonl")},
                                         {"lemma", inv.lemma_keys().front().str()},
                                         {"inventory", at("data/inventory.jsonl")}, {"project", "pca2"},
                                         {"out", at("emb.jsonl")}});
}

std::string normalize_paths(std::string text, const std::string& root) {
  for (std::size_t pos; (pos = text.find(root)) != std::string::npos;) text.replace(pos, root.size(), "<root>");
  return text;
}

Outcome determinism() {
  testing::TempDir a("acc_a"), b("acc_b");
  pipeline(a.path().string());
  pipeline(b.path().string());
  const auto fa = files_in(a.path());
  const auto fb = files_in(b.path());
  if (fa != fb) return {false, "runs produced different file sets"};
  std::vector<std::string> differing;
  for (const auto& f : fa) {
    // Config snapshots and checkpoints record their own output paths.
    const auto ta = normalize_paths(read_file((a.path() / f).string()), a.path().string());
    const auto tb = normalize_paths(read_file((b.path() / f).string()), b.path().string());
    if (ta != tb) differing.push_back(f);
  }
  std::string detail = std::to_string(fa.size()) + " files compared (traces, checkpoints, reports, predictions, dump)";
  if (!differing.empty()) detail += "; differing: " + differing.front();
  return {differing.empty(), detail};
}

Outcome pca_export() {
  Rng rng(31);
  Eigen::MatrixXd basis(2, 12), coef(40, 2);
  for (Eigen::Index i = 0; i < basis.size(); ++i) basis.data()[i] = rng.normal();
  for (Eigen::Index i = 0; i < coef.size(); ++i) coef.data()[i] = 2.0 * rng.normal();
  Eigen::RowVectorXd shift(12);
  for (Eigen::Index i = 0; i < 12; ++i) shift[i] = rng.normal();
  const Eigen::MatrixXd rank2 = (coef * basis).rowwise() + shift;
  const auto p = pca(rank2, 2);
  const double recon = (pca_reconstruct(p) - rank2).cwiseAbs().maxCoeff();
  double ortho = (p.components * p.components.transpose() - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff();

  // Row count through the export command on a trained model.
  testing::TempDir tmp("acc_pca");
  const auto root = tmp.path().string();
  pipeline(root);
  const auto inv = load_inventory(root + "/data/inventory.jsonl");
  const auto corpus = load_corpus(root + "/data/eval.jsonl", inv);
  const auto key = inv.lemma_keys().front();
  long mentions = 0;
  for (const auto& s : corpus.sentences) {
    for (const auto& t : s.tokens) mentions += t.lemma_key && *t.lemma_key == key;
  }
  const long senses = static_cast<long>(candidate_senses(inv, key).size());
  std::ifstream in(root + "/emb.jsonl");
  std::string line;
  std::getline(in, line);
  const auto header = json::parse(line);
  long rows = 0;
  Eigen::MatrixXd dump(0, header["d_model"].get<int>());
  while (std::getline(in, line)) {
    const auto r = json::parse(line);
    const auto v = r["vector"].get<std::vector<double>>();
    dump.conservativeResize(dump.rows() + 1, Eigen::NoChange);
    for (std::size_t i = 0; i < v.size(); ++i) dump(dump.rows() - 1, static_cast<Eigen::Index>(i)) = v[i];
    ++rows;
  }
  const auto q = pca(dump, 2);
  ortho = std::max(ortho, (q.components * q.components.transpose() - Eigen::MatrixXd::Identity(2, 2))
                              .cwiseAbs()
                              .maxCoeff());
  const bool ok = ortho <= 1e-8 && recon <= 1e-8 && rows == mentions + senses;
  return {ok, "orthonormality err " + sci(ortho) + ", rank-2 reconstruction err " + sci(recon) + ", rows " +
                  std::to_string(rows) + " == " + std::to_string(mentions) + " mentions + " +
                  std::to_string(senses) + " senses"};
}

}  // namespace

// Optional arguments restrict the run to the listed criterion numbers.
int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));
  std::cout << "acceptance suite" << std::endl;
  report(1, "gradient correctness (fp64 finite differences)", gradient_correctness);
  report(2, "loss identity", loss_identity);
  report(3, "ablation mechanics (freeze / tied)", ablation_mechanics);

  const auto data = generate_synthetic(benchmark_data_config(), kDataSeed);
  report(4, "partition construction (S1 = 100 / 0)", [&] { return partition_s1(data); });
  report(5, "k-shot filter", [&] { return kshot_filter_check(data); });

  std::optional<Benchmark> bench;
  std::string bench_error;
  if (wanted(6) || wanted(7) || wanted(8)) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      bench = run_benchmark(data);
    } catch (const std::exception& e) {
      bench_error = e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "      synthetic benchmark trained in " << fmt(secs, 1) << "s" << std::endl;
  }
  auto need_bench = [&](const std::function<Outcome(const Benchmark&)>& f) {
    return [&, f] { return bench ? f(*bench) : Outcome{false, "benchmark failed: " + bench_error}; };
  };
  report(6, "synthetic benchmark trends", need_bench(benchmark_trends));
  report(7, "balanced-loss trend", need_bench(balanced_trend));
  report(8, "few-shot trend with step parity", need_bench(fewshot_trend));
  report(9, "determinism of training and evaluation commands", determinism);
  report(10, "PCA export", pca_export);

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
