#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>

#include "bem/commands.hpp"
#include "bem/common.hpp"
#include "bem/evaluation.hpp"
#include "bem/model.hpp"
#include "bem/projection.hpp"
#include "bem/training.hpp"
#include "json.hpp"

namespace py = pybind11;
using namespace bem;

namespace {

py::array_t<float> to_numpy(const Vector& v) {
  py::array_t<float> out(v.size());
  std::copy(v.data(), v.data() + v.size(), out.mutable_data());
  return out;
}

LemmaKey make_key(const std::string& lemma, const std::string& pos) {
  auto p = parse_pos(pos);
  if (!p) throw Error(ErrorKind::usage, "bad part of speech '" + pos + "'");
  return LemmaKey{to_lower_ascii(lemma), *p};
}

struct PyModel {
  BemModel model;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bi-encoder word sense disambiguation core";

  static py::exception<Error> error_type(m, "BemError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error_type, (std::string(error_kind_name(e.kind())) + ": " + e.what()).c_str());
    }
  });

  m.def(
      "run_command",
      [](const std::string& name, const std::string& options_json) {
        cli::run_command(name, nlohmann::json::parse(options_json));
      },
      py::arg("name"), py::arg("options_json"),
      "Run a sub-command (prepare, synth, train, eval, export-embeddings) from JSON options.");

  m.def(
      "run_cli", [](std::vector<std::string> args) {
        args.insert(args.begin(), "bem");
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        return cli::run_cli(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"));

  m.def("bem_loss", &bem_loss, py::arg("scores"), py::arg("gold"), py::arg("weight") = 1.0);
  m.def("bem_loss_grad", &bem_loss_grad, py::arg("scores"), py::arg("gold"), py::arg("weight") = 1.0);
  m.def("softmax", &softmax, py::arg("scores"));
  m.def(
      "lr_at",
      [](double peak_lr, int warmup_steps, long step, long total_steps) {
        TrainConfig cfg;
        cfg.peak_lr = peak_lr;
        cfg.warmup_steps = warmup_steps;
        return lr_at(cfg, step, total_steps);
      },
      py::arg("peak_lr"), py::arg("warmup_steps"), py::arg("step"), py::arg("total_steps"));

  m.def(
      "pca",
      [](const Eigen::MatrixXd& data, int k) {
        auto r = pca(data, k);
        py::dict out;
        out["mean"] = Eigen::MatrixXd(r.mean);
        out["components"] = r.components;
        out["coords"] = r.coords;
        out["explained_variance"] = r.explained_variance;
        return out;
      },
      py::arg("data"), py::arg("n_components") = 2);

  py::class_<SenseInventory>(m, "Inventory")
      .def_static("load", &load_inventory, py::arg("path"))
      .def("__len__", &SenseInventory::size)
      .def("__contains__", &SenseInventory::contains)
      .def(
          "senses",
          [](const SenseInventory& inv, const std::string& lemma, const std::string& pos) {
            return candidate_senses(inv, make_key(lemma, pos));
          },
          py::arg("lemma"), py::arg("pos"))
      .def(
          "gloss", [](const SenseInventory& inv, const std::string& id) { return gloss_text(inv, id); },
          py::arg("sense_id"));

  py::class_<PyModel>(m, "Model")
      .def_static(
          "load",
          [](const std::string& path, const std::string& vocab_path) {
            auto vocab = std::make_shared<const Vocab>(load_vocab(vocab_path));
            return PyModel{BemModel::load(path, vocab)};
          },
          py::arg("path"), py::arg("vocab_path"))
      .def_property_readonly("d_model", [](const PyModel& pm) { return pm.model.ctx().config.d_model; })
      .def_property_readonly("tied", [](const PyModel& pm) { return pm.model.tied(); })
      .def(
          "embed_context",
          [](const PyModel& pm, const std::vector<std::string>& words, std::size_t target) {
            return to_numpy(embed_target(pm.model, words, target));
          },
          py::arg("words"), py::arg("target"))
      .def(
          "embed_senses",
          [](const PyModel& pm, const std::vector<SenseId>& ids, const SenseInventory& inv) {
            py::dict out;
            for (const auto& [id, v] : embed_senses(pm.model, ids, inv, 256)) out[py::str(id)] = to_numpy(v);
            return out;
          },
          py::arg("sense_ids"), py::arg("inventory"))
      .def(
          "score",
          [](const PyModel& pm, const std::vector<std::string>& words, std::size_t target, const std::string& lemma,
             const std::string& pos, const SenseInventory& inv) {
            const auto ids = candidate_senses(inv, make_key(lemma, pos));
            const auto r_w = embed_target(pm.model, words, target);
            const auto sc = score_candidates(r_w, ids, embed_senses(pm.model, ids, inv, 256));
            std::vector<std::pair<SenseId, double>> out;
            for (std::size_t i = 0; i < sc.sense_ids.size(); ++i) out.emplace_back(sc.sense_ids[i], sc.scores[i]);
            return out;
          },
          py::arg("words"), py::arg("target"), py::arg("lemma"), py::arg("pos"), py::arg("inventory"))
      .def(
          "predict",
          [](const PyModel& pm, const std::vector<std::string>& words, std::size_t target, const std::string& lemma,
             const std::string& pos, const SenseInventory& inv) {
            return predict(pm.model, words, target, make_key(lemma, pos), inv);
          },
          py::arg("words"), py::arg("target"), py::arg("lemma"), py::arg("pos"), py::arg("inventory"));
}
