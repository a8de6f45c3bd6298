#pragma once

#include <map>
#include <string>
#include <vector>

#include "bem/corpus.hpp"
#include "bem/lexicon.hpp"
#include "bem/model.hpp"

namespace bem {

// instance_id -> predicted sense; absent ids are unattempted.
using PredictionSet = std::map<std::string, SenseId>;

// Micro counts for one bucket. Percentages are derived on demand.
struct Metrics {
  long total = 0;      // gold-labeled instances
  long attempted = 0;  // instances with a prediction
  long correct = 0;    // prediction in the gold set

  double precision() const;
  double recall() const;
  double f1() const;  // 0 when P + R == 0
  Metrics& operator+=(const Metrics& o);
};

struct DatasetReport {
  std::string name;
  Metrics all;
  std::map<Pos, Metrics> by_pos;
  Metrics mfs, lfs, zero_shot_words, zero_shot_senses;

  DatasetReport& operator+=(const DatasetReport& o);
};

struct EvalReport {
  std::string system;
  std::vector<DatasetReport> datasets;
  DatasetReport combined;  // "ALL": count-wise concatenation of the datasets
};

DatasetReport score(const PredictionSet& preds, const Corpus& eval_c, const EvalPartition& part);
EvalReport combine_reports(std::string system, std::vector<DatasetReport> datasets);

PredictionSet baseline_s1(const Corpus& eval_c, const SenseInventory& inv);
PredictionSet baseline_training_mfs(const Corpus& eval_c, const SenseFrequencyTable& freq,
                                    const SenseInventory& inv);

enum class System { bem, linear, s1, mfs };
System parse_system(const std::string& name);
std::string system_name(System s);

struct SystemResources {
  const SenseInventory* inventory = nullptr;
  const BemModel* model = nullptr;          // bem and linear
  const SenseFrequencyTable* freq = nullptr;  // mfs
  std::size_t gloss_batch = 256;
};

PredictionSet run_system(System system, const Corpus& eval_c, const SystemResources& res);

// Linear-head predictions; lemmas outside the head fall back to rank 1.
PredictionSet predict_linear(const BemModel& m, const Corpus& eval_c, const SenseInventory& inv);

double round1(double pct);
std::string report_json(const EvalReport& r);
std::string report_table(const EvalReport& r);

std::string serialize_predictions(const PredictionSet& p);
PredictionSet parse_predictions(const std::string& text);

}  // namespace bem
