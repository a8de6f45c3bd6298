#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bem/corpus.hpp"
#include "json.hpp"

// Sub-command implementations behind the `bem` executable. Each command
// writes a resolved-config snapshot next to its outputs.
namespace bem::cli {

struct PrepareArgs {
  std::vector<std::string> train;
  std::string inventory;
  int min_freq = 1;
  std::string out;
};

struct SynthArgs {
  SynthConfig synth;
  std::uint64_t seed = 0;
  std::string out_dir;
};

struct TrainArgs {
  std::string train;
  std::string dev;
  std::string inventory;
  std::string vocab;
  std::string out_dir;
  bool balanced = false;
  bool tied = false;
  bool freeze_ctx = false;
  bool freeze_gls = false;
  bool linear_baseline = false;
  int kshot = 0;  // 0 = full data
  std::uint64_t seed = 0;
  int epochs = 20;
  int context_batch = 4;
  int gloss_batch = 256;
  double peak_lr = 1e-4;
  int warmup = 100;
  double weight_decay = 0.0;
  long fixed_total_steps = 0;  // 0 = derived from epochs
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 256;
  double dropout = 0.1;
  int max_context_len = 64;
  int max_gloss_len = 32;
  int linear_epochs = 100;
  int linear_batch = 32;
  double linear_lr = 1e-3;
};

struct EvalArgs {
  std::string model;
  std::string baseline;  // s1 | mfs | linear; empty = bem
  std::vector<std::string> eval;
  std::string train_freq;  // sense-frequency JSON or a training corpus
  std::string inventory;
  std::string vocab;  // defaults to the path recorded in the checkpoint
  std::string out;
  int gloss_batch = 256;
};

struct ExportArgs {
  std::string model;
  std::string corpus;
  std::string lemma;  // "plant" or "plant.noun"
  std::string inventory;
  std::string vocab;
  std::string project = "none";  // none | pca2
  std::string out;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PrepareArgs, train, inventory, min_freq, out)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainArgs, train, dev, inventory, vocab, out_dir, balanced,
                                                tied, freeze_ctx, freeze_gls, linear_baseline, kshot, seed,
                                                epochs, context_batch, gloss_batch, peak_lr, warmup,
                                                weight_decay, fixed_total_steps, d_model, n_layers, n_heads,
                                                d_ff, dropout, max_context_len, max_gloss_len, linear_epochs,
                                                linear_batch, linear_lr)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EvalArgs, model, baseline, eval, train_freq, inventory, vocab,
                                                out, gloss_batch)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ExportArgs, model, corpus, lemma, inventory, vocab, project, out)

nlohmann::json synth_args_json(const SynthArgs& a);
SynthArgs synth_args_from_json(const nlohmann::json& j);

void cmd_prepare(const PrepareArgs& a);
void cmd_synth(const SynthArgs& a);
void cmd_train(const TrainArgs& a);
void cmd_eval(const EvalArgs& a);
void cmd_export_embeddings(const ExportArgs& a);

// Runs one sub-command from a JSON object of option values (keys use the
// underscore form, e.g. "out_dir"); unknown keys are rejected.
void run_command(const std::string& name, const nlohmann::json& options);

// Entry point used by the executable; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace bem::cli
