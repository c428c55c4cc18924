#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>

#include "msgcoop/descriptions.hpp"
#include "msgcoop/eval.hpp"
#include "msgcoop/objective.hpp"
#include "msgcoop/selfcheck.hpp"
#include "msgcoop/trainer.hpp"

namespace py = pybind11;
using namespace msgcoop;

namespace {

Mat mat_from_rows(const std::vector<std::vector<double>>& rows) {
  Mat m(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols) throw DimensionError("ragged row list");
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

std::vector<std::vector<double>> mat_to_rows(const Mat& m) {
  std::vector<std::vector<double>> rows(m.rows);
  for (std::size_t r = 0; r < m.rows; ++r) rows[r].assign(m.row(r).begin(), m.row(r).end());
  return rows;
}

py::dict report_to_dict(const EvalReport& report) {
  py::dict per_class;
  for (const auto& [name, acc] : report.per_class) per_class[py::str(name)] = acc;
  py::dict out;
  out["base"] = report.base_acc;
  out["novel"] = report.novel_acc;
  out["hm"] = report.harmonic_mean;
  out["per_class"] = per_class;
  return out;
}

py::dict losses_to_dict(const LossReport& report) {
  py::dict out;
  out["l_ce"] = report.l_ce;
  out["l_sg"] = report.l_sg;
  out["l_div"] = report.l_div;
  out["l_total"] = report.l_total;
  out["diversity_disabled"] = report.diversity_disabled;
  return out;
}

struct EncoderBundle {
  Tokenizer tokenizer;
  FrozenEncoder encoder;
  explicit EncoderBundle(const TrainConfig& cfg)
      : tokenizer(cfg.vocab, cfg.seed_encoder),
        encoder(cfg.encoder_dims(), cfg.seed_encoder, cfg.identity_image_encoder) {}
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "multi-prompt semantic-guided context optimization core";

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);

  m.def("l2_normalize", [](const Vec& v) { return l2_normalize(v); }, py::arg("v"));
  m.def("cosine_sim", &cosine_sim, py::arg("a"), py::arg("b"));
  m.def("harmonic_mean", &harmonic_mean, py::arg("base"), py::arg("novel"));

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_static("desk_default", &TrainConfig::desk_default)
      .def_static("paper_default", &TrainConfig::paper_default)
      .def_static("from_file",
                  [](const std::string& path) { return TrainConfig::from_file(path); },
                  py::arg("path"))
      .def("save", &TrainConfig::save, py::arg("path"))
      .def("validate", &TrainConfig::validate)
      .def("set", &TrainConfig::apply_key, py::arg("key"), py::arg("value"))
      .def("to_json", [](const TrainConfig& cfg) { return cfg.to_json().dump(); })
      .def_readwrite("n_prompts", &TrainConfig::n_prompts)
      .def_readwrite("ctx_len", &TrainConfig::ctx_len)
      .def_readwrite("tau", &TrainConfig::tau)
      .def_readwrite("sigma_init", &TrainConfig::sigma_init)
      .def_readwrite("lr", &TrainConfig::lr)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("shots", &TrainConfig::shots)
      .def_readwrite("test_per_class", &TrainConfig::test_per_class)
      .def_readwrite("n_classes", &TrainConfig::n_classes)
      .def_readwrite("sigma_data", &TrainConfig::sigma_data)
      .def_readwrite("lambda_sg", &TrainConfig::lambda_sg)
      .def_readwrite("lambda_div", &TrainConfig::lambda_div)
      .def_readwrite("k_descriptions", &TrainConfig::k_descriptions)
      .def_readwrite("seed_encoder", &TrainConfig::seed_encoder)
      .def_readwrite("seed_data", &TrainConfig::seed_data)
      .def_readwrite("seed_init", &TrainConfig::seed_init)
      .def_readwrite("threads", &TrainConfig::threads);

  py::class_<SyntheticDataset>(m, "SyntheticDataset")
      .def_readonly("class_names", &SyntheticDataset::class_names)
      .def_readonly("base_classes", &SyntheticDataset::base_classes)
      .def_readonly("novel_classes", &SyntheticDataset::novel_classes)
      .def_readonly("descriptions", &SyntheticDataset::descriptions)
      .def("save", &SyntheticDataset::save, py::arg("path"))
      .def_static("load", &SyntheticDataset::load, py::arg("path"))
      .def("fingerprint", &SyntheticDataset::fingerprint)
      .def("to_json", [](const SyntheticDataset& ds) { return ds.to_json().dump(); });

  m.def(
      "generate_dataset",
      [](std::size_t n_classes, std::size_t shots, std::size_t test_per_class, double sigma_data,
         std::size_t feature_dim, std::uint64_t seed) {
        return generate_dataset(n_classes, shots, test_per_class, sigma_data, feature_dim, seed);
      },
      py::arg("n_classes"), py::arg("shots"), py::arg("test_per_class"), py::arg("sigma_data"),
      py::arg("feature_dim"), py::arg("seed"));
  m.def("dataset_from_config", &dataset_from_config, py::arg("config"));

  py::class_<Checkpoint>(m, "Checkpoint")
      .def_readonly("epoch", &Checkpoint::epoch)
      .def_readonly("config", &Checkpoint::config)
      .def("save", &Checkpoint::save, py::arg("path"))
      .def_static("load", &Checkpoint::load, py::arg("path"))
      .def("history",
           [](const Checkpoint& ckpt) {
             py::list rows;
             for (const EpochStats& s : ckpt.history) {
               py::dict row;
               row["epoch"] = s.epoch;
               row["l_ce"] = s.l_ce;
               row["l_sg"] = s.l_sg;
               row["l_div"] = s.l_div;
               row["l_total"] = s.l_total;
               rows.append(row);
             }
             return rows;
           })
      .def("context",
           [](const Checkpoint& ckpt) {
             py::list prompts;
             for (const Mat& ctx : ckpt.bank.context) prompts.append(mat_to_rows(ctx));
             return prompts;
           })
      .def("to_json", [](const Checkpoint& ckpt) { return ckpt.to_json().dump(); });

  m.def(
      "train",
      [](const TrainConfig& cfg, const SyntheticDataset& dataset,
         const std::string& metrics_path) {
        if (metrics_path.empty()) return train(cfg, dataset);
        std::ofstream metrics(metrics_path);
        if (!metrics) throw DomainError("cannot write " + metrics_path);
        return train(cfg, dataset, nullptr, &metrics);
      },
      py::arg("config"), py::arg("dataset"), py::arg("metrics_path") = std::string());
  m.def(
      "resume",
      [](const Checkpoint& ckpt, const TrainConfig& requested, const SyntheticDataset& dataset) {
        return resume(ckpt, requested, dataset);
      },
      py::arg("checkpoint"), py::arg("config"), py::arg("dataset"));

  m.def(
      "evaluate",
      [](const Checkpoint& ckpt, const SyntheticDataset& dataset) {
        const TrainerWorld world = build_world(ckpt.config, dataset, nullptr);
        return report_to_dict(evaluate(ckpt.bank, world.full_catalog, world.encoder, dataset,
                                       ckpt.config.tau, ckpt.config.threads));
      },
      py::arg("checkpoint"), py::arg("dataset"));
  m.def(
      "zero_shot",
      [](const TrainConfig& cfg, const SyntheticDataset& dataset, const std::string& tmpl) {
        const EncoderBundle bundle(cfg);
        const ClassCatalog catalog =
            make_catalog(dataset.class_names, bundle.tokenizer, bundle.encoder);
        return report_to_dict(
            zero_shot_baseline(catalog, bundle.tokenizer, bundle.encoder, dataset, tmpl, cfg.tau));
      },
      py::arg("config"), py::arg("dataset"), py::arg("template") = "a photo of a {cls}");

  m.def(
      "losses",
      [](const TrainConfig& cfg, const SyntheticDataset& dataset) {
        const TrainerWorld world = build_world(cfg, dataset, nullptr);
        const ContextBank bank =
            init_context(cfg.init_template, cfg.n_prompts, cfg.ctx_len, cfg.sigma_init,
                         cfg.seed_init, world.tokenizer, world.encoder);
        const std::vector<Vec>* refs = world.references ? &*world.references : nullptr;
        return losses_to_dict(total_loss(bank, world.base_catalog, world.encoder,
                                         world.train_pool, refs,
                                         {cfg.lambda_sg, cfg.lambda_div}, cfg.tau, false));
      },
      py::arg("config"), py::arg("dataset"));

  m.def(
      "gradcheck",
      [](std::uint64_t seed, double step) {
        GradcheckConfig cfg;
        cfg.seed = seed;
        cfg.step = step;
        return run_gradcheck(cfg).max_rel_error;
      },
      py::arg("seed") = 7, py::arg("step") = 1e-5);

  m.def("selftest", [] {
    py::list rows;
    for (const CheckResult& r : run_selftest()) {
      py::dict row;
      row["name"] = r.name;
      row["passed"] = r.passed;
      row["detail"] = r.detail;
      rows.append(row);
    }
    return rows;
  });

  py::class_<Tokenizer>(m, "Tokenizer")
      .def(py::init<std::size_t, std::uint64_t>(), py::arg("vocab_size"), py::arg("seed"))
      .def("tokenize",
           [](const Tokenizer& tok, const std::string& text) { return tok.tokenize(text).ids; });

  py::class_<FrozenEncoder>(m, "FrozenEncoder")
      .def(py::init([](const TrainConfig& cfg) {
             return FrozenEncoder(cfg.encoder_dims(), cfg.seed_encoder,
                                  cfg.identity_image_encoder);
           }),
           py::arg("config"))
      .def("encode_text",
           [](const FrozenEncoder& enc, const std::vector<std::vector<double>>& rows) {
             return enc.encode_text(mat_from_rows(rows));
           })
      .def("encode_image", &FrozenEncoder::encode_image)
      .def("embed_tokens",
           [](const FrozenEncoder& enc, const std::vector<std::uint32_t>& ids) {
             return mat_to_rows(enc.embed_tokens(TokenSeq{ids}));
           })
      .def("encode_sentence",
           [](const FrozenEncoder& enc, const Tokenizer& tok, const std::string& text) {
             return enc.encode_text(enc.embed_tokens(tok.tokenize(text)));
           })
      .def("dump_json", [](const FrozenEncoder& enc) { return enc.dump().dump(); });

  m.def(
      "instantiate_templates",
      [](const std::string& class_name, const std::string& category) {
        return instantiate_templates(DescriptionRequest(class_name, category));
      },
      py::arg("class_name"), py::arg("category"));
  m.def(
      "filter_topk",
      [](const std::vector<std::string>& raw, std::size_t k, const TrainConfig& cfg) {
        const EncoderBundle bundle(cfg);
        const FilterResult result = filter_topk(raw, k, bundle.tokenizer, bundle.encoder);
        return py::make_tuple(result.selected, result.mean_sims);
      },
      py::arg("raw"), py::arg("k"), py::arg("config"));
  m.def(
      "semantic_reference",
      [](const std::vector<std::string>& selected, const TrainConfig& cfg) {
        const EncoderBundle bundle(cfg);
        return semantic_reference(selected, bundle.tokenizer, bundle.encoder);
      },
      py::arg("selected"), py::arg("config"));

  m.attr("__version__") = "0.1.0";
}
