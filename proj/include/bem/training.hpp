#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bem/corpus.hpp"
#include "bem/model.hpp"

namespace bem {

struct TrainConfig {
  int epochs = 20;
  int context_batch = 4;
  int gloss_batch = 256;
  double peak_lr = 1e-4;
  int warmup_steps = 100;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  bool balanced = false;
  std::optional<long> fixed_total_steps;

  void validate() const;
};

// Linear ramp 0 -> peak over warmup_steps, then linear decay to 0 at total.
double lr_at(const TrainConfig& cfg, long step, long total_steps);

struct TrainResult {
  std::vector<double> loss_trace;  // one entry per optimizer step
  std::vector<double> dev_trace;   // ALL-F1 per epoch
  long steps = 0;
  long skipped_instances = 0;
  double best_dev_f1 = -1.0;
  std::optional<BemModel> best;  // parameters at the best dev epoch
};

// Step-level driver. Batches are drawn from a per-epoch seeded permutation
// and dropout keys from (seed, step), so a run is reproducible from
// (model, moments, step) alone.
class Trainer {
 public:
  Trainer(BemModel& model, const Corpus& train_c, const SenseInventory& inv,
          const SenseFrequencyTable& freq, TrainConfig cfg);
  ~Trainer();
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  long steps_per_epoch() const;
  long total_steps() const;
  long step() const;
  std::size_t instance_count() const;
  long skipped_instances() const;

  // One optimizer update; returns the (weighted) mean batch loss.
  double train_step();

  void save_state(const std::string& path) const;
  void load_state(const std::string& path);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

using EpochCallback = std::function<void(int epoch, double dev_f1)>;

TrainResult train(BemModel& model, const Corpus& train_c, const Corpus* dev_c,
                  const SenseInventory& inv, const SenseFrequencyTable& freq,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

// Number of optimizer steps a full-data run over `train_c` would take.
long full_run_steps(const BemModel& model, const Corpus& train_c, const SenseInventory& inv,
                    const TrainConfig& cfg);

struct KShotRun {
  int k = 0;
  BemModel model;
  TrainResult result;
};

// Each run trains a copy of `init` on kshot_filter(train_c, k, seed) for
// exactly the full-data run's step count.
std::vector<KShotRun> train_kshot(const BemModel& init, const Corpus& train_c,
                                  const std::vector<int>& ks, std::uint64_t seed,
                                  const SenseInventory& inv, const TrainConfig& cfg,
                                  const Corpus* dev_c = nullptr);

struct LinearTrainConfig {
  int epochs = 100;
  int batch = 32;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

// Softmax classifier over frozen context-encoder features, restricted to each
// lemma's candidates that occur in training.
LinearHead train_linear_head(const BemModel& frozen, const Corpus& train_c, const SenseInventory& inv,
                             const LinearTrainConfig& cfg);

}  // namespace bem
