#include "bem/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "bem/common.hpp"
#include "json.hpp"

namespace bem {

double Metrics::precision() const {
  return attempted == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(attempted);
}

double Metrics::recall() const {
  return total == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

double Metrics::f1() const {
  const double p = precision(), r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

Metrics& Metrics::operator+=(const Metrics& o) {
  total += o.total;
  attempted += o.attempted;
  correct += o.correct;
  return *this;
}

DatasetReport& DatasetReport::operator+=(const DatasetReport& o) {
  all += o.all;
  for (const auto& [pos, m] : o.by_pos) by_pos[pos] += m;
  mfs += o.mfs;
  lfs += o.lfs;
  zero_shot_words += o.zero_shot_words;
  zero_shot_senses += o.zero_shot_senses;
  return *this;
}

DatasetReport score(const PredictionSet& preds, const Corpus& eval_c, const EvalPartition& part) {
  DatasetReport r;
  r.name = eval_c.name;
  std::set<std::string> known;
  for (const auto& ref : labeled_instances(eval_c)) {
    const auto& tok = token_at(eval_c, ref);
    const auto& id = *tok.instance_id;
    known.insert(id);
    Metrics m;
    m.total = 1;
    if (auto it = preds.find(id); it != preds.end()) {
      m.attempted = 1;
      m.correct = std::find(tok.gold.begin(), tok.gold.end(), it->second) != tok.gold.end() ? 1 : 0;
    }
    r.all += m;
    r.by_pos[tok.lemma_key->pos] += m;
    if (part.mfs_ids.count(id)) r.mfs += m;
    if (part.lfs_ids.count(id)) r.lfs += m;
    if (part.zero_shot_word_ids.count(id)) r.zero_shot_words += m;
    if (part.zero_shot_sense_ids.count(id)) r.zero_shot_senses += m;
  }
  for (const auto& [id, _] : preds) {
    if (!known.count(id)) {
      throw Error(ErrorKind::validation, "prediction for unknown instance id " + id + " in " + eval_c.name);
    }
  }
  return r;
}

EvalReport combine_reports(std::string system, std::vector<DatasetReport> datasets) {
  EvalReport r;
  r.system = std::move(system);
  r.combined.name = "ALL";
  for (const auto& d : datasets) r.combined += d;
  r.datasets = std::move(datasets);
  return r;
}

PredictionSet baseline_s1(const Corpus& eval_c, const SenseInventory& inv) {
  PredictionSet p;
  for (const auto& ref : labeled_instances(eval_c)) {
    const auto& tok = token_at(eval_c, ref);
    if (inv.knows(*tok.lemma_key)) p[*tok.instance_id] = first_sense(inv, *tok.lemma_key);
  }
  return p;
}

PredictionSet baseline_training_mfs(const Corpus& eval_c, const SenseFrequencyTable& freq,
                                    const SenseInventory& inv) {
  PredictionSet p;
  for (const auto& ref : labeled_instances(eval_c)) {
    const auto& tok = token_at(eval_c, ref);
    if (inv.knows(*tok.lemma_key)) p[*tok.instance_id] = training_mfs(freq, *tok.lemma_key, inv);
  }
  return p;
}

System parse_system(const std::string& name) {
  if (name == "bem") return System::bem;
  if (name == "linear") return System::linear;
  if (name == "s1") return System::s1;
  if (name == "mfs") return System::mfs;
  throw Error(ErrorKind::usage, "unknown system '" + name + "' (expected bem, linear, s1, mfs)");
}

std::string system_name(System s) {
  switch (s) {
    case System::bem: return "bem";
    case System::linear: return "linear";
    case System::s1: return "s1";
    case System::mfs: return "mfs";
  }
  return "?";
}

PredictionSet predict_linear(const BemModel& m, const Corpus& eval_c, const SenseInventory& inv) {
  if (!m.head) throw Error(ErrorKind::config, "linear baseline: checkpoint has no linear head");
  const auto& head = *m.head;
  PredictionSet preds;
  for (const auto& sent : eval_c.sentences) {
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
      std::vector<SenseId> covered;
      for (const auto& c : cands) {
        if (head.covers(c)) covered.push_back(c);
      }
      if (!head.lemmas.count(*tok.lemma_key) || covered.empty() || i >= input.word_spans.size()) {
        preds[*tok.instance_id] = cands.front();
        continue;
      }
      const auto r_w = pool_word(res.hidden, 0, input.word_spans[i]);
      const auto sc = linear_head_logits(head, r_w, covered);
      preds[*tok.instance_id] = covered[argmax_rank_tiebreak(sc.scores)];
    }
  }
  return preds;
}

PredictionSet run_system(System system, const Corpus& eval_c, const SystemResources& res) {
  if (!res.inventory) throw Error(ErrorKind::config, "run_system: inventory required");
  switch (system) {
    case System::s1:
      return baseline_s1(eval_c, *res.inventory);
    case System::mfs:
      if (!res.freq) throw Error(ErrorKind::config, "mfs baseline requires training frequencies");
      return baseline_training_mfs(eval_c, *res.freq, *res.inventory);
    case System::bem:
      if (!res.model) throw Error(ErrorKind::config, "bem requires a model checkpoint");
      return predict_corpus(*res.model, eval_c, *res.inventory, res.gloss_batch);
    case System::linear:
      if (!res.model) throw Error(ErrorKind::config, "linear baseline requires a model checkpoint");
      return predict_linear(*res.model, eval_c, *res.inventory);
  }
  return {};
}

double round1(double pct) { return std::round(pct * 10.0) / 10.0; }

namespace {

nlohmann::ordered_json metrics_json(const Metrics& m) {
  nlohmann::ordered_json j;
  j["total"] = m.total;
  j["attempted"] = m.attempted;
  j["correct"] = m.correct;
  j["precision"] = round1(m.precision());
  j["recall"] = round1(m.recall());
  j["f1"] = round1(m.f1());
  return j;
}

nlohmann::ordered_json dataset_json(const DatasetReport& d) {
  nlohmann::ordered_json j;
  j["name"] = d.name;
  j["all"] = metrics_json(d.all);
  nlohmann::ordered_json pos = nlohmann::ordered_json::object();
  for (Pos p : {Pos::noun, Pos::verb, Pos::adj, Pos::adv}) {
    auto it = d.by_pos.find(p);
    pos[std::string(pos_name(p))] = metrics_json(it == d.by_pos.end() ? Metrics{} : it->second);
  }
  j["pos"] = std::move(pos);
  j["mfs"] = metrics_json(d.mfs);
  j["lfs"] = metrics_json(d.lfs);
  j["zero_shot_words"] = metrics_json(d.zero_shot_words);
  j["zero_shot_senses"] = metrics_json(d.zero_shot_senses);
  return j;
}

std::string pct(const Metrics& m) {
  if (m.total == 0) return "-";
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.1f", round1(m.f1()));
  return buf;
}

std::string pad(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
}

}  // namespace

std::string report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["format"] = "wsd-eval-report";
  j["version"] = 1;
  j["system"] = r.system;
  nlohmann::ordered_json ds = nlohmann::ordered_json::array();
  for (const auto& d : r.datasets) ds.push_back(dataset_json(d));
  j["datasets"] = std::move(ds);
  j["ALL"] = dataset_json(r.combined);
  return j.dump(2) + "\n";
}

std::string report_table(const EvalReport& r) {
  std::ostringstream out;
  std::size_t name_w = 12;
  for (const auto& d : r.datasets) name_w = std::max(name_w, d.name.size() + 1);
  out << "system: " << r.system << "\n\n";
  out << "F1 (%) per dataset and on the concatenation\n";
  out << std::string(name_w, ' ');
  for (const auto& d : r.datasets) out << pad(d.name, std::max<std::size_t>(d.name.size(), 6) + 2);
  for (const char* h : {"Nouns", "Verbs", "Adj.", "Adv.", "ALL"}) out << pad(h, 8);
  out << "\n" << std::string(name_w, ' ');
  for (const auto& d : r.datasets) out << pad(pct(d.all), std::max<std::size_t>(d.name.size(), 6) + 2);
  for (Pos p : {Pos::noun, Pos::verb, Pos::adj, Pos::adv}) {
    auto it = r.combined.by_pos.find(p);
    out << pad(it == r.combined.by_pos.end() ? "-" : pct(it->second), 8);
  }
  out << pad(pct(r.combined.all), 8) << "\n\n";
  out << "F1 (%) on ALL subsets\n";
  out << std::string(name_w, ' ') << pad("MFS", 8) << pad("LFS", 8) << pad("ZS-Words", 10)
      << pad("ZS-Senses", 11) << "\n";
  out << std::string(name_w, ' ') << pad(pct(r.combined.mfs), 8) << pad(pct(r.combined.lfs), 8)
      << pad(pct(r.combined.zero_shot_words), 10) << pad(pct(r.combined.zero_shot_senses), 11) << "\n\n";
  out << "counts (total/attempted/correct)\n";
  auto counts = [&](const std::string& label, const Metrics& m) {
    out << "  " << label << ": " << m.total << "/" << m.attempted << "/" << m.correct << "\n";
  };
  for (const auto& d : r.datasets) counts(d.name, d.all);
  counts("ALL", r.combined.all);
  counts("MFS", r.combined.mfs);
  counts("LFS", r.combined.lfs);
  counts("ZS-Words", r.combined.zero_shot_words);
  counts("ZS-Senses", r.combined.zero_shot_senses);
  return out.str();
}

std::string serialize_predictions(const PredictionSet& p) {
  std::string out;
  for (const auto& [id, sense] : p) out += id + " " + sense + "\n";
  return out;
}

PredictionSet parse_predictions(const std::string& text) {
  PredictionSet p;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = split_whitespace(line);
    if (fields.empty()) continue;
    if (fields.size() < 2) {
      throw Error(ErrorKind::format, "predictions line " + std::to_string(line_no) + ": expected 'instance_id sense_id'");
    }
    // Scorer convention: the first listed sense is the prediction.
    p.emplace(fields[0], fields[1]);
  }
  return p;
}

}  // namespace bem
