#include "bem/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>

#include "CLI11.hpp"
#include "bem/checkpoint.hpp"
#include "bem/common.hpp"
#include "bem/evaluation.hpp"
#include "bem/model.hpp"
#include "bem/projection.hpp"
#include "bem/tokenizer.hpp"
#include "bem/training.hpp"

namespace bem {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SynthConfig, n_lemmas, min_senses, max_senses, zipf_exponent,
                                                vocab_size, keywords_per_sense, noise_vocab_size,
                                                context_keywords, noise_words, gloss_noise_words,
                                                train_instances, eval_instances, zero_shot_fraction,
                                                zero_shot_word_share, context_ambiguity)
}  // namespace bem

namespace bem::cli {

namespace fs = std::filesystem;
using nlohmann::json;

void to_json(json& j, const SynthArgs& a) {
  j = a.synth;
  j["seed"] = a.seed;
  j["out_dir"] = a.out_dir;
}

void from_json(const json& j, SynthArgs& a) {
  json rest = j;
  a.seed = rest.value("seed", std::uint64_t{0});
  a.out_dir = rest.value("out_dir", std::string());
  rest.erase("seed");
  rest.erase("out_dir");
  a.synth = rest.get<SynthConfig>();
}

json synth_args_json(const SynthArgs& a) { return a; }
SynthArgs synth_args_from_json(const json& j) { return j.get<SynthArgs>(); }

namespace {

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw Error(ErrorKind::usage, std::string("missing required ") + flag);
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create directory " + dir + ": " + ec.message());
}

void ensure_parent(const std::string& file) {
  const auto parent = fs::path(file).parent_path();
  if (!parent.empty()) ensure_dir(parent.string());
}

std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::shared_ptr<const Vocab> vocab_for_model(const std::string& model_path, const std::string& vocab_path) {
  std::string path = vocab_path;
  if (path.empty()) {
    const auto bytes = read_file(model_path);
    const auto header = json::parse(bytes.substr(0, bytes.find('\n')), nullptr, false);
    if (!header.is_discarded()) path = header.value("vocab_path", std::string());
    if (path.empty()) throw Error(ErrorKind::usage, "missing --vocab (checkpoint records no vocab path)");
  }
  return std::make_shared<const Vocab>(load_vocab(path));
}

SenseFrequencyTable load_frequencies(const std::string& path, const SenseInventory& inv) {
  const auto text = read_file(path);
  const auto first = json::parse(text.substr(0, text.find('\n')), nullptr, false);
  if (!first.is_discarded() && first.value("format", "") == "wsd-corpus") {
    return sense_frequencies(parse_corpus(text, inv));
  }
  return parse_frequencies(text);
}

}  // namespace

void cmd_prepare(const PrepareArgs& a) {
  if (a.train.empty()) throw Error(ErrorKind::usage, "missing required --train");
  require(a.inventory, "--inventory");
  require(a.out, "--out");
  const auto inv = load_inventory(a.inventory);
  std::vector<std::vector<std::string>> texts;
  std::size_t words = 0;
  for (const auto& path : a.train) {
    const auto corpus = load_corpus(path, inv);
    for (const auto& s : corpus.sentences) {
      texts.push_back(sentence_words(s));
      words += s.tokens.size();
    }
  }
  if (words == 0) throw Error(ErrorKind::validation, "prepare: training corpus is empty");
  for (const auto& e : inv.entries()) texts.push_back(split_whitespace(e.gloss));
  const auto vocab = build_vocab(texts, a.min_freq);
  ensure_parent(a.out);
  save_vocab(vocab, a.out);
  write_file(a.out + ".config.json", json(a).dump(2) + "\n");
}

void cmd_synth(const SynthArgs& a) {
  require(a.out_dir, "--out-dir");
  const auto data = generate_synthetic(a.synth, a.seed);
  ensure_dir(a.out_dir);
  const fs::path dir(a.out_dir);
  save_inventory(data.inventory, (dir / "inventory.jsonl").string());
  save_corpus(data.train, (dir / "train.jsonl").string());
  save_corpus(data.eval, (dir / "eval.jsonl").string());
  write_file((dir / "config.json").string(), synth_args_json(a).dump(2) + "\n");
}

void cmd_train(const TrainArgs& a) {
  require(a.train, "--train");
  require(a.inventory, "--inventory");
  require(a.vocab, "--vocab");
  require(a.out_dir, "--out-dir");
  if (a.kshot < 0) throw Error(ErrorKind::config, "--kshot must be >= 1 (or 0 for full data)");
  const auto inv = load_inventory(a.inventory);
  const auto vocab = std::make_shared<const Vocab>(load_vocab(a.vocab));
  ModelOptions mo;
  mo.max_context_len = a.max_context_len;
  mo.max_gloss_len = a.max_gloss_len;
  mo.encoder.d_model = a.d_model;
  mo.encoder.n_layers = a.n_layers;
  mo.encoder.n_heads = a.n_heads;
  mo.encoder.d_ff = a.d_ff;
  mo.encoder.dropout_rate = a.dropout;
  mo.tied = a.tied;
  mo.freeze_ctx = a.freeze_ctx;
  mo.freeze_gls = a.freeze_gls;
  BemModel model = BemModel::create(vocab, mo, a.seed);

  const Corpus full = load_corpus(a.train, inv, static_cast<std::size_t>(a.max_context_len - 2));
  std::optional<Corpus> dev;
  if (!a.dev.empty()) dev = load_corpus(a.dev, inv, static_cast<std::size_t>(a.max_context_len - 2));

  TrainConfig tc;
  tc.epochs = a.epochs;
  tc.context_batch = a.context_batch;
  tc.gloss_batch = a.gloss_batch;
  tc.peak_lr = a.peak_lr;
  tc.warmup_steps = a.warmup;
  tc.weight_decay = a.weight_decay;
  tc.seed = a.seed;
  tc.balanced = a.balanced;
  if (a.fixed_total_steps > 0) tc.fixed_total_steps = a.fixed_total_steps;

  Corpus used = full;
  json metrics;
  if (a.kshot > 0) {
    tc.fixed_total_steps = full_run_steps(model, full, inv, tc);
    used = kshot_filter(full, a.kshot, a.seed);
    used.name = full.name + ".k" + std::to_string(a.kshot);
    metrics["kshot"] = a.kshot;
    metrics["fixed_total_steps"] = *tc.fixed_total_steps;
  }
  const auto freq = sense_frequencies(used);
  ensure_dir(a.out_dir);
  const fs::path dir(a.out_dir);
  write_file((dir / "config.json").string(), json(a).dump(2) + "\n");
  write_file((dir / "train_freq.json").string(), serialize_frequencies(freq));
  metrics["train_instances"] = used.instance_count();
  metrics["tied"] = a.tied;
  metrics["freeze_ctx"] = a.freeze_ctx;
  metrics["freeze_gls"] = a.freeze_gls;
  metrics["balanced"] = a.balanced;

  if (a.linear_baseline) {
    LinearTrainConfig lc;
    lc.epochs = a.linear_epochs;
    lc.batch = a.linear_batch;
    lc.lr = a.linear_lr;
    lc.seed = a.seed;
    model.head = train_linear_head(model, used, inv, lc);
    model.save((dir / "model.ckpt").string(), a.vocab);
    metrics["system"] = "linear";
    metrics["head_senses"] = model.head->index.size();
    write_file((dir / "metrics.json").string(), metrics.dump(2) + "\n");
    return;
  }

  const auto result = train(model, used, dev ? &*dev : nullptr, inv, freq, tc, [](int epoch, double f1) {
    if (f1 >= 0) std::cerr << "epoch " << epoch << " dev F1 " << fmt_g(round1(f1)) << "\n";
  });
  std::string loss_csv = "step,loss\n";
  for (std::size_t i = 0; i < result.loss_trace.size(); ++i) {
    loss_csv += std::to_string(i + 1) + "," + fmt_g(result.loss_trace[i]) + "\n";
  }
  write_file((dir / "loss.csv").string(), loss_csv);
  std::string dev_csv = "epoch,f1\n";
  for (std::size_t i = 0; i < result.dev_trace.size(); ++i) {
    dev_csv += std::to_string(i + 1) + "," + fmt_g(result.dev_trace[i]) + "\n";
  }
  write_file((dir / "dev.csv").string(), dev_csv);
  model.save((dir / "model.ckpt").string(), a.vocab);
  if (result.best) result.best->save((dir / "best.ckpt").string(), a.vocab);
  metrics["system"] = "bem";
  metrics["steps"] = result.steps;
  metrics["skipped_instances"] = result.skipped_instances;
  metrics["final_loss"] = result.loss_trace.empty() ? 0.0 : result.loss_trace.back();
  if (dev) metrics["best_dev_f1"] = round1(result.best_dev_f1);
  write_file((dir / "metrics.json").string(), metrics.dump(2) + "\n");
}

void cmd_eval(const EvalArgs& a) {
  require(a.inventory, "--inventory");
  require(a.out, "--out");
  if (a.eval.empty()) throw Error(ErrorKind::usage, "missing required --eval");
  const System system = a.baseline.empty() ? System::bem : parse_system(a.baseline);
  if ((system == System::bem || system == System::linear) && a.model.empty()) {
    throw Error(ErrorKind::usage, "--model is required for " + system_name(system));
  }
  const auto inv = load_inventory(a.inventory);
  std::optional<SenseFrequencyTable> freq;
  if (!a.train_freq.empty()) freq = load_frequencies(a.train_freq, inv);
  if (system == System::mfs && !freq) throw Error(ErrorKind::usage, "--train-freq is required for mfs");
  std::optional<BemModel> model;
  if (!a.model.empty() && (system == System::bem || system == System::linear)) {
    model = BemModel::load(a.model, vocab_for_model(a.model, a.vocab));
  }
  SystemResources res;
  res.inventory = &inv;
  res.model = model ? &*model : nullptr;
  res.freq = freq ? &*freq : nullptr;
  res.gloss_batch = static_cast<std::size_t>(a.gloss_batch);

  ensure_dir(a.out);
  const fs::path dir(a.out);
  std::vector<DatasetReport> reports;
  std::set<std::string> names;
  for (const auto& path : a.eval) {
    auto corpus = load_corpus(path, inv);
    if (corpus.name.empty()) corpus.name = fs::path(path).stem().string();
    if (!names.insert(corpus.name).second) corpus.name += "#" + std::to_string(names.size());
    names.insert(corpus.name);
    const auto preds = run_system(system, corpus, res);
    EvalPartition part = freq ? build_partition(corpus, *freq, inv)
                              : build_partition(corpus, SenseFrequencyTable{}, inv);
    if (!freq) {
      part.zero_shot_word_ids.clear();
      part.zero_shot_sense_ids.clear();
    }
    reports.push_back(score(preds, corpus, part));
    write_file((dir / ("predictions." + corpus.name + ".txt")).string(), serialize_predictions(preds));
  }
  const auto report = combine_reports(system_name(system), std::move(reports));
  write_file((dir / "report.json").string(), report_json(report));
  write_file((dir / "report.txt").string(), report_table(report));
  write_file((dir / "config.json").string(), json(a).dump(2) + "\n");
}

void cmd_export_embeddings(const ExportArgs& a) {
  require(a.model, "--model");
  require(a.corpus, "--corpus");
  require(a.lemma, "--lemma");
  require(a.inventory, "--inventory");
  require(a.out, "--out");
  if (a.project != "none" && a.project != "pca2") {
    throw Error(ErrorKind::usage, "--project must be none or pca2");
  }
  const auto inv = load_inventory(a.inventory);
  const auto model = BemModel::load(a.model, vocab_for_model(a.model, a.vocab));
  const auto corpus = load_corpus(a.corpus, inv, static_cast<std::size_t>(model.options().max_context_len - 2));

  std::string lemma = to_lower_ascii(a.lemma);
  std::optional<Pos> pos;
  if (const auto dot = lemma.rfind('.'); dot != std::string::npos) {
    if (auto p = parse_pos(lemma.substr(dot + 1))) {
      pos = p;
      lemma = lemma.substr(0, dot);
    }
  }
  auto matches = [&](const LemmaKey& k) { return k.lemma == lemma && (!pos || k.pos == *pos); };

  struct Row {
    std::string id, kind;
    json label;
    Vector vec;
  };
  std::vector<Row> rows;
  std::set<LemmaKey> keys;
  for (const auto& key : inv.lemma_keys()) {
    if (matches(key)) keys.insert(key);
  }
  std::size_t sentence_index = 0;
  for (const auto& sent : corpus.sentences) {
    std::vector<std::size_t> hits;
    for (std::size_t i = 0; i < sent.tokens.size(); ++i) {
      if (sent.tokens[i].lemma_key && matches(*sent.tokens[i].lemma_key)) hits.push_back(i);
    }
    if (!hits.empty()) {
      const auto input = model.encode_context(sentence_words(sent));
      const auto res = forward(model.ctx(), {input}, false, 0);
      for (std::size_t i : hits) {
        if (i >= input.word_spans.size()) continue;
        const auto& tok = sent.tokens[i];
        keys.insert(*tok.lemma_key);
        const std::string id = tok.instance_id ? *tok.instance_id
                                               : "s" + std::to_string(sentence_index) + ".t" + std::to_string(i);
        rows.push_back({id, "context", tok.gold.empty() ? json(nullptr) : json(tok.gold.front()),
                        pool_word(res.hidden, 0, input.word_spans[i])});
      }
    }
    ++sentence_index;
  }
  std::vector<SenseId> senses;
  for (const auto& key : keys) {
    for (auto& s : candidate_senses(inv, key)) senses.push_back(std::move(s));
  }
  if (rows.empty() && senses.empty()) {
    throw Error(ErrorKind::validation, "lemma '" + a.lemma + "' occurs in neither the corpus nor the inventory");
  }
  const auto vecs = embed_senses(model, senses, inv, 256);
  for (const auto& s : senses) rows.push_back({s, "sense", s, vecs.at(s)});

  const int d = model.ctx().config.d_model;
  json header;
  header["format"] = "embedding-dump";
  header["version"] = 1;
  header["lemma"] = a.lemma;
  header["d_model"] = d;
  header["rows"] = rows.size();
  header["projection"] = a.project;
  std::optional<PcaResult> proj;
  if (a.project == "pca2") {
    Eigen::MatrixXd data(static_cast<Eigen::Index>(rows.size()), d);
    for (std::size_t i = 0; i < rows.size(); ++i) data.row(static_cast<Eigen::Index>(i)) = rows[i].vec.cast<double>();
    proj = pca(data, std::min(2, d));
    header["explained_variance"] = proj->explained_variance;
  }
  std::string out = header.dump() + "\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    json r;
    r["id"] = rows[i].id;
    r["kind"] = rows[i].kind;
    r["label"] = rows[i].label;
    r["vector"] = std::vector<float>(rows[i].vec.data(), rows[i].vec.data() + rows[i].vec.size());
    if (proj) {
      const auto row = proj->coords.row(static_cast<Eigen::Index>(i));
      r["xy"] = std::vector<double>(row.data(), row.data() + row.size());
    }
    out += r.dump() + "\n";
  }
  ensure_parent(a.out);
  write_file(a.out, out);
  write_file(a.out + ".config.json", json(a).dump(2) + "\n");
}

namespace {

std::string option_key(const CLI::Option* opt) {
  std::string name = opt->get_name(false, true);
  auto pos = name.find("--");
  if (pos != std::string::npos) name = name.substr(pos + 2);
  for (auto& c : name) {
    if (c == '-') c = '_';
  }
  return name;
}

template <typename Args>
json overlay(json resolved, const json& layer, const std::string& source) {
  if (!layer.is_object()) throw Error(ErrorKind::config, source + ": expected a JSON object");
  for (const auto& [k, v] : layer.items()) {
    if (!resolved.contains(k)) throw Error(ErrorKind::config, source + ": unknown key '" + k + "'");
    resolved[k] = v;
  }
  return resolved;
}

template <typename Args>
Args to_args(const json& j) {
  try {
    return j.get<Args>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::config, std::string("invalid configuration value: ") + e.what());
  }
}

// defaults < config file < flags given on the command line
template <typename Args>
Args resolve(const CLI::App* sub, const Args& from_flags, const std::string& config_path) {
  json resolved = Args{};
  if (!config_path.empty()) {
    json file;
    try {
      file = json::parse(read_file(config_path));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::config, config_path + ": " + e.what());
    }
    resolved = overlay<Args>(std::move(resolved), file, config_path);
  }
  const json flags = from_flags;
  for (const auto* opt : sub->get_options()) {
    if (opt->count() == 0) continue;
    const auto key = option_key(opt);
    if (flags.contains(key)) resolved[key] = flags[key];
  }
  return to_args<Args>(resolved);
}

template <typename Args>
Args from_options(const json& options) {
  return to_args<Args>(overlay<Args>(json(Args{}), options, "options"));
}

}  // namespace

void run_command(const std::string& name, const json& options) {
  if (name == "prepare") {
    cmd_prepare(from_options<PrepareArgs>(options));
  } else if (name == "synth") {
    cmd_synth(from_options<SynthArgs>(options));
  } else if (name == "train") {
    cmd_train(from_options<TrainArgs>(options));
  } else if (name == "eval") {
    cmd_eval(from_options<EvalArgs>(options));
  } else if (name == "export-embeddings") {
    cmd_export_embeddings(from_options<ExportArgs>(options));
  } else {
    throw Error(ErrorKind::usage, "unknown command '" + name + "'");
  }
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Bi-encoder word sense disambiguation: data preparation, training, evaluation"};
  app.require_subcommand(1);

  PrepareArgs prep;
  std::string prep_cfg;
  auto* sp = app.add_subcommand("prepare", "build a subword vocabulary from corpus surfaces and glosses");
  sp->add_option("--train", prep.train, "training corpus file(s)");
  sp->add_option("--inventory", prep.inventory, "sense inventory (JSON lines)");
  sp->add_option("--min-freq", prep.min_freq, "minimum whole-word frequency");
  sp->add_option("--out", prep.out, "output vocab file");
  sp->add_option("--config", prep_cfg, "JSON config overlay");

  SynthArgs syn;
  std::string syn_cfg;
  auto* ss = app.add_subcommand("synth", "generate a seeded synthetic corpus and inventory");
  ss->add_option("--config", syn_cfg, "generator config (JSON)");
  ss->add_option("--seed", syn.seed, "random seed");
  ss->add_option("--out-dir", syn.out_dir, "output directory");

  TrainArgs tr;
  std::string tr_cfg;
  auto* st = app.add_subcommand("train", "train the bi-encoder (or the frozen linear baseline)");
  st->add_option("--train", tr.train, "training corpus");
  st->add_option("--dev", tr.dev, "development corpus (model selection)");
  st->add_option("--inventory", tr.inventory, "sense inventory");
  st->add_option("--vocab", tr.vocab, "vocab file from `prepare`");
  st->add_option("--out-dir", tr.out_dir, "run directory");
  st->add_flag("--balanced", tr.balanced, "inverse-frequency weighted loss");
  st->add_flag("--tied", tr.tied, "share one encoder for both roles");
  st->add_flag("--freeze-ctx", tr.freeze_ctx, "do not update the context encoder");
  st->add_flag("--freeze-gls", tr.freeze_gls, "do not update the gloss encoder");
  st->add_flag("--linear-baseline", tr.linear_baseline, "train a linear head on the frozen initial encoder");
  st->add_option("--kshot", tr.kshot, "keep at most K examples per sense; step count matches the full run");
  st->add_option("--seed", tr.seed, "random seed");
  st->add_option("--epochs", tr.epochs);
  st->add_option("--context-batch", tr.context_batch);
  st->add_option("--gloss-batch", tr.gloss_batch);
  st->add_option("--peak-lr", tr.peak_lr);
  st->add_option("--warmup", tr.warmup, "warmup steps");
  st->add_option("--weight-decay", tr.weight_decay);
  st->add_option("--fixed-total-steps", tr.fixed_total_steps);
  st->add_option("--d-model", tr.d_model);
  st->add_option("--n-layers", tr.n_layers);
  st->add_option("--n-heads", tr.n_heads);
  st->add_option("--d-ff", tr.d_ff);
  st->add_option("--dropout", tr.dropout);
  st->add_option("--max-context-len", tr.max_context_len);
  st->add_option("--max-gloss-len", tr.max_gloss_len);
  st->add_option("--linear-epochs", tr.linear_epochs);
  st->add_option("--linear-batch", tr.linear_batch);
  st->add_option("--linear-lr", tr.linear_lr);
  st->add_option("--config", tr_cfg, "JSON config overlay");

  EvalArgs ev;
  std::string ev_cfg;
  auto* se = app.add_subcommand("eval", "score a model or baseline on one or more evaluation sets");
  se->add_option("--model", ev.model, "model checkpoint (bem, or linear with --baseline linear)");
  se->add_option("--baseline", ev.baseline, "s1 | mfs | linear");
  se->add_option("--eval", ev.eval, "evaluation corpora");
  se->add_option("--train-freq", ev.train_freq, "training sense frequencies (JSON) or training corpus");
  se->add_option("--inventory", ev.inventory, "sense inventory");
  se->add_option("--vocab", ev.vocab, "vocab file (defaults to the one recorded in the checkpoint)");
  se->add_option("--out", ev.out, "output directory");
  se->add_option("--gloss-batch", ev.gloss_batch);
  se->add_option("--config", ev_cfg, "JSON config overlay");

  ExportArgs ex;
  std::string ex_cfg;
  auto* sx = app.add_subcommand("export-embeddings", "dump context and sense vectors for one lemma");
  sx->add_option("--model", ex.model, "model checkpoint");
  sx->add_option("--corpus", ex.corpus, "corpus with mentions of the lemma");
  sx->add_option("--lemma", ex.lemma, "lemma or lemma.pos");
  sx->add_option("--inventory", ex.inventory, "sense inventory");
  sx->add_option("--vocab", ex.vocab, "vocab file (defaults to the one recorded in the checkpoint)");
  sx->add_option("--project", ex.project, "none | pca2");
  sx->add_option("--out", ex.out, "output JSON-lines file");
  sx->add_option("--config", ex_cfg, "JSON config overlay");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  }

  try {
    if (sp->parsed()) cmd_prepare(resolve(sp, prep, prep_cfg));
    if (ss->parsed()) cmd_synth(resolve(ss, syn, syn_cfg));
    if (st->parsed()) cmd_train(resolve(st, tr, tr_cfg));
    if (se->parsed()) cmd_eval(resolve(se, ev, ev_cfg));
    if (sx->parsed()) cmd_export_embeddings(resolve(sx, ex, ex_cfg));
  } catch (const Error& e) {
    std::cerr << "error: " << error_kind_name(e.kind()) << ": " << e.what() << "\n";
    return e.kind() == ErrorKind::usage ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace bem::cli
