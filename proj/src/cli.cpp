#include "msgcoop/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "msgcoop/descriptions.hpp"
#include "msgcoop/eval.hpp"
#include "msgcoop/plot.hpp"
#include "msgcoop/selfcheck.hpp"
#include "msgcoop/trainer.hpp"

namespace msgcoop {

namespace {

using Overrides = std::map<std::string, std::string>;

struct ConfigArgs {
  std::string config_path;
  std::shared_ptr<Overrides> overrides = std::make_shared<Overrides>();
};

// One flag per config key; values are kept as strings and funneled through
// TrainConfig::apply_key so the file and the flags share one parser.
void add_config_flags(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("--config", args.config_path, "key = value config file");
  const json keys = TrainConfig().to_json();
  for (const auto& [key, value] : keys.items()) {
    const std::string name = "--" + key;
    auto overrides = args.overrides;
    const std::string captured_key = key;
    cmd->add_option_function<std::string>(
        name,
        [overrides, captured_key](const std::string& v) { (*overrides)[captured_key] = v; },
        "override config key " + key);
  }
}

TrainConfig resolve_config(const ConfigArgs& args, TrainConfig base = TrainConfig::desk_default()) {
  if (!args.config_path.empty()) {
    base = TrainConfig::from_file(args.config_path, std::move(base));
    base.validate();  // a broken config file is a domain error
  }
  try {
    for (const auto& [key, value] : *args.overrides) base.apply_key(key, value);
    base.validate();
  } catch (const DomainError& e) {
    throw UsageError(e.what());  // a broken flag value is a usage error
  }
  return base;
}

std::vector<std::string> read_class_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("classes: cannot open " + path);
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    const auto begin = line.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) continue;
    const auto end = line.find_last_not_of(" \t\r\n");
    const std::string name = line.substr(begin, end - begin + 1);
    if (!name.empty() && name[0] != '#') names.push_back(name);
  }
  if (names.empty()) throw DomainError("classes: no class names in " + path);
  return names;
}

std::string env_or_empty(const char* name) {
  const char* value = std::getenv(name);
  return value ? value : "";
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write " + path);
  out << content;
}

int cmd_generate_descriptions(const std::string& classes_path, const std::string& category,
                              const std::string& out_path, const std::string& fixtures_path,
                              int samples, int max_words, const std::string& model,
                              const std::string& cassette) {
  const auto names = read_class_list(classes_path);

  std::unique_ptr<LlmClient> client;
  if (!fixtures_path.empty()) {
    client = std::make_unique<FixtureClient>(FixtureClient::from_file(fixtures_path));
  } else {
    HttpClientConfig http;
    http.url = env_or_empty("MSGCOOP_LLM_URL");
    http.api_key = env_or_empty("MSGCOOP_LLM_API_KEY");
    if (!model.empty()) http.model = model;
    http.cassette_path = cassette;
    if (http.url.empty()) {
      throw DomainError(
          "no description source: pass --offline-fixtures or set MSGCOOP_LLM_URL");
    }
    client = std::make_unique<HttpLlmClient>(http);
  }

  std::vector<DescriptionSet> sets;
  for (const auto& name : names) {
    DescriptionRequest request(name, category);
    request.samples_per_template = samples;
    request.max_words = max_words;
    DescriptionSet set;
    set.class_name = name;
    set.category = category;
    set.raw = fetch_descriptions(request, *client);
    sets.push_back(std::move(set));
  }
  save_description_sets(sets, out_path);

  json summary;
  summary["classes"] = sets.size();
  summary["raw_per_class"] = sets.empty() ? 0 : sets[0].raw.size();
  summary["out"] = out_path;
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_filter(const std::string& in_path, std::size_t k, const std::string& out_path,
               const ConfigArgs& config_args) {
  const TrainConfig config = resolve_config(config_args);
  const Tokenizer tokenizer(config.vocab, config.seed_encoder);
  const FrozenEncoder encoder(config.encoder_dims(), config.seed_encoder,
                              config.identity_image_encoder);

  auto sets = load_description_sets(in_path);
  for (auto& set : sets) {
    const FilterResult result = filter_topk(set.raw, k, tokenizer, encoder);
    set.selected = result.selected;
    set.mean_sims = result.mean_sims;
  }
  save_description_sets(sets, out_path);

  json summary;
  summary["classes"] = sets.size();
  summary["k"] = k;
  summary["out"] = out_path;
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_train(const ConfigArgs& config_args, const std::string& dataset_path,
              const std::string& descriptions_path, const std::string& out_path,
              const std::string& metrics_path, const std::string& resume_path,
              const std::string& dump_dataset_path, const std::string& dump_encoder_path) {
  TrainConfig base = TrainConfig::desk_default();
  std::optional<Checkpoint> previous;
  if (!resume_path.empty()) {
    previous = Checkpoint::load(resume_path);
    base = previous->config;
  }
  const TrainConfig config = resolve_config(config_args, base);

  const SyntheticDataset dataset =
      dataset_path.empty() ? dataset_from_config(config) : SyntheticDataset::load(dataset_path);
  if (!dump_dataset_path.empty()) dataset.save(dump_dataset_path);

  std::vector<DescriptionSet> sets;
  const std::vector<DescriptionSet>* sets_ptr = nullptr;
  if (!descriptions_path.empty()) {
    sets = load_description_sets(descriptions_path);
    sets_ptr = &sets;
  }

  if (!dump_encoder_path.empty()) {
    const FrozenEncoder encoder(config.encoder_dims(), config.seed_encoder,
                                config.identity_image_encoder);
    write_text(dump_encoder_path, encoder.dump().dump(2) + "\n");
  }

  std::ofstream metrics;
  if (!metrics_path.empty()) {
    metrics.open(metrics_path);
    if (!metrics) throw DomainError("cannot write " + metrics_path);
  }

  const Checkpoint ckpt =
      previous ? resume(*previous, config, dataset, sets_ptr,
                        metrics.is_open() ? &metrics : nullptr, &std::cerr)
               : train(config, dataset, sets_ptr, metrics.is_open() ? &metrics : nullptr,
                       &std::cerr);
  ckpt.save(out_path);

  json summary;
  summary["epochs"] = ckpt.epoch;
  summary["l_total_first"] = ckpt.history.empty() ? 0.0 : ckpt.history.front().l_total;
  summary["l_total_final"] = ckpt.history.empty() ? 0.0 : ckpt.history.back().l_total;
  summary["checkpoint"] = out_path;
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& dataset_path,
             const std::string& out_path, const std::string& csv_path, bool zero_shot,
             const std::string& zero_shot_template, const ConfigArgs& config_args) {
  TrainConfig config = TrainConfig::desk_default();
  std::optional<Checkpoint> ckpt;
  if (!checkpoint_path.empty()) {
    ckpt = Checkpoint::load(checkpoint_path);
    config = ckpt->config;
  } else if (!zero_shot) {
    throw UsageError("eval: --checkpoint is required unless --zero-shot is given");
  }
  config = resolve_config(config_args, config);

  const SyntheticDataset dataset =
      dataset_path.empty() ? dataset_from_config(config) : SyntheticDataset::load(dataset_path);
  const Tokenizer tokenizer(config.vocab, config.seed_encoder);
  const FrozenEncoder encoder(config.encoder_dims(), config.seed_encoder,
                              config.identity_image_encoder);
  const ClassCatalog catalog = make_catalog(dataset.class_names, tokenizer, encoder);

  const EvalReport report =
      zero_shot ? zero_shot_baseline(catalog, tokenizer, encoder, dataset, zero_shot_template,
                                     config.tau)
                : evaluate(ckpt->bank, catalog, encoder, dataset, config.tau, config.threads);

  const std::string rendered = report.to_json().dump();
  std::cout << rendered << "\n";
  if (!out_path.empty()) write_text(out_path, report.to_json().dump(2) + "\n");
  if (!csv_path.empty()) {
    const bool fresh = !std::filesystem::exists(csv_path);
    std::ofstream csv(csv_path, std::ios::app);
    if (!csv) throw DomainError("cannot write " + csv_path);
    if (fresh) csv << "base,novel,hm\n";
    csv << report.csv_row() << "\n";
  }
  return 0;
}

int cmd_ablate(const ConfigArgs& config_args, const std::string& axis,
               const std::string& values_csv, const std::string& out_dir,
               const std::string& dataset_path, const std::string& descriptions_path) {
  const TrainConfig config = resolve_config(config_args);

  std::vector<std::string> values;
  std::string token;
  std::istringstream stream(values_csv);
  while (std::getline(stream, token, ',')) {
    if (!token.empty()) values.push_back(token);
  }
  if (values.empty()) throw UsageError("ablate: --values must list at least one value");

  const SyntheticDataset dataset =
      dataset_path.empty() ? dataset_from_config(config) : SyntheticDataset::load(dataset_path);
  std::vector<DescriptionSet> sets;
  const std::vector<DescriptionSet>* sets_ptr = nullptr;
  if (!descriptions_path.empty()) {
    sets = load_description_sets(descriptions_path);
    sets_ptr = &sets;
  }

  const auto rows = ablate(config, axis, values, dataset, sets_ptr, &std::cerr);

  std::filesystem::create_directories(out_dir);
  const std::string csv_path = out_dir + "/ablate_" + axis + ".csv";
  write_text(csv_path, ablation_csv(rows));

  const std::string svg_path = out_dir + "/ablate_" + axis + ".svg";
  std::vector<std::string> labels;
  std::vector<double> base, novel, hm;
  for (const auto& row : rows) {
    labels.push_back(row.value);
    base.push_back(row.base_acc);
    novel.push_back(row.novel_acc);
    hm.push_back(row.harmonic_mean);
  }
  bool plotted = write_line_plot_svg(svg_path, "sweep over " + axis, labels,
                                     {{"base", base}, {"novel", novel}, {"hm", hm}});
  if (!plotted) {
    std::cerr << "warning: could not write plot " << svg_path << "; CSV only\n";
  }

  json summary;
  summary["axis"] = axis;
  summary["rows"] = rows.size();
  summary["csv"] = csv_path;
  if (plotted) summary["svg"] = svg_path;
  for (const auto& row : rows) {
    if (row.diversity_disabled) {
      summary["diversity_disabled_values"].push_back(row.value);
    }
  }
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_gradcheck(const GradcheckConfig& config, double tolerance) {
  const GradCheckResult result = run_gradcheck(config);
  char line[128];
  std::snprintf(line, sizeof(line), "max_rel_error=%.6e\nworst_coordinate=%zu\ntolerance=%.1e",
                result.max_rel_error, result.worst_coordinate, tolerance);
  std::cout << line << "\n";
  if (result.max_rel_error < tolerance) return 0;
  std::cerr << "gradcheck: exceeded tolerance\n";
  return 1;
}

int cmd_selftest() {
  const auto results = run_selftest();
  bool all_passed = true;
  for (const auto& r : results) {
    std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << "\n";
    all_passed = all_passed && r.passed;
  }
  return all_passed ? 0 : 1;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"multi-prompt semantic-guided context optimization"};
  app.require_subcommand(1);
  int exit_code = 0;

  // generate-descriptions
  auto* gen = app.add_subcommand("generate-descriptions",
                                 "instantiate the question templates and collect descriptions");
  auto gen_classes = std::make_shared<std::string>();
  auto gen_category = std::make_shared<std::string>();
  auto gen_out = std::make_shared<std::string>();
  auto gen_fixtures = std::make_shared<std::string>();
  auto gen_samples = std::make_shared<int>(2);
  auto gen_max_words = std::make_shared<int>(kDescriptionMaxWords);
  auto gen_model = std::make_shared<std::string>();
  auto gen_cassette = std::make_shared<std::string>();
  gen->add_option("--classes", *gen_classes, "file with one class name per line")->required();
  gen->add_option("--category", *gen_category, "dataset super-category")->required();
  gen->add_option("--out", *gen_out, "output description JSON")->required();
  gen->add_option("--offline-fixtures", *gen_fixtures, "fixture JSON instead of a live endpoint");
  gen->add_option("--samples", *gen_samples, "samples per template")
      ->check(CLI::PositiveNumber);
  gen->add_option("--max-words", *gen_max_words, "word cap per description")
      ->check(CLI::PositiveNumber);
  gen->add_option("--model", *gen_model, "model name for the live endpoint");
  gen->add_option("--cassette", *gen_cassette, "JSONL cassette for live request/response pairs");
  gen->callback([=, &exit_code] {
    exit_code = cmd_generate_descriptions(*gen_classes, *gen_category, *gen_out, *gen_fixtures,
                                          *gen_samples, *gen_max_words, *gen_model,
                                          *gen_cassette);
  });

  // filter
  auto* filter = app.add_subcommand("filter", "keep the top-k most consistent descriptions");
  auto filter_in = std::make_shared<std::string>();
  auto filter_out = std::make_shared<std::string>();
  auto filter_k = std::make_shared<std::size_t>(4);
  auto filter_cfg = std::make_shared<ConfigArgs>();
  filter->add_option("--in", *filter_in, "description JSON to filter")->required();
  filter->add_option("--k", *filter_k, "descriptions to keep per class")
      ->check(CLI::PositiveNumber);
  filter->add_option("--out", *filter_out, "output description JSON")->required();
  add_config_flags(filter, *filter_cfg);
  filter->callback(
      [=, &exit_code] { exit_code = cmd_filter(*filter_in, *filter_k, *filter_out, *filter_cfg); });

  // train
  auto* train_cmd = app.add_subcommand("train", "optimize the context bank");
  auto train_cfg = std::make_shared<ConfigArgs>();
  auto train_dataset = std::make_shared<std::string>();
  auto train_descriptions = std::make_shared<std::string>();
  auto train_out = std::make_shared<std::string>("checkpoint.json");
  auto train_metrics = std::make_shared<std::string>();
  auto train_resume = std::make_shared<std::string>();
  auto train_dump_dataset = std::make_shared<std::string>();
  auto train_dump_encoder = std::make_shared<std::string>();
  add_config_flags(train_cmd, *train_cfg);
  train_cmd->add_option("--dataset", *train_dataset,
                        "dataset JSON (synthesized from the config when omitted)");
  train_cmd->add_option("--descriptions", *train_descriptions, "description JSON for guidance");
  train_cmd->add_option("--out", *train_out, "checkpoint output path");
  train_cmd->add_option("--metrics", *train_metrics, "per-epoch loss CSV path");
  train_cmd->add_option("--resume", *train_resume, "checkpoint to continue from");
  train_cmd->add_option("--dump-dataset", *train_dump_dataset, "save the dataset used");
  train_cmd->add_option("--dump-encoder", *train_dump_encoder, "save the encoder parameter dump");
  train_cmd->callback([=, &exit_code] {
    exit_code = cmd_train(*train_cfg, *train_dataset, *train_descriptions, *train_out,
                          *train_metrics, *train_resume, *train_dump_dataset, *train_dump_encoder);
  });

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "base-to-novel evaluation of a checkpoint");
  auto eval_ckpt = std::make_shared<std::string>();
  auto eval_dataset = std::make_shared<std::string>();
  auto eval_out = std::make_shared<std::string>();
  auto eval_csv = std::make_shared<std::string>();
  auto eval_zero_shot = std::make_shared<bool>(false);
  auto eval_template = std::make_shared<std::string>("a photo of a {cls}");
  auto eval_cfg = std::make_shared<ConfigArgs>();
  eval_cmd->add_option("--checkpoint", *eval_ckpt, "trained checkpoint JSON");
  eval_cmd->add_option("--dataset", *eval_dataset,
                       "dataset JSON (synthesized from the config when omitted)");
  eval_cmd->add_option("--out", *eval_out, "write the report JSON here");
  eval_cmd->add_option("--csv", *eval_csv, "append a base,novel,hm row here");
  eval_cmd->add_flag("--zero-shot", *eval_zero_shot, "score hand-crafted prompts instead");
  eval_cmd->add_option("--template", *eval_template, "zero-shot template containing {cls}");
  add_config_flags(eval_cmd, *eval_cfg);
  eval_cmd->callback([=, &exit_code] {
    exit_code = cmd_eval(*eval_ckpt, *eval_dataset, *eval_out, *eval_csv, *eval_zero_shot,
                         *eval_template, *eval_cfg);
  });

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "sweep N, lambda_div or guidance");
  auto ablate_cfg = std::make_shared<ConfigArgs>();
  auto ablate_axis = std::make_shared<std::string>();
  auto ablate_values = std::make_shared<std::string>();
  auto ablate_out_dir = std::make_shared<std::string>(".");
  auto ablate_dataset = std::make_shared<std::string>();
  auto ablate_descriptions = std::make_shared<std::string>();
  ablate_cmd->add_option("--axis", *ablate_axis, "N, lambda_div or guidance")
      ->required()
      ->check(CLI::IsMember({"N", "lambda_div", "guidance"}));
  ablate_cmd->add_option("--values", *ablate_values, "comma-separated sweep values")->required();
  ablate_cmd->add_option("--out-dir", *ablate_out_dir, "directory for CSV and SVG outputs");
  ablate_cmd->add_option("--dataset", *ablate_dataset, "dataset JSON");
  ablate_cmd->add_option("--descriptions", *ablate_descriptions, "description JSON for guidance");
  add_config_flags(ablate_cmd, *ablate_cfg);
  ablate_cmd->callback([=, &exit_code] {
    exit_code = cmd_ablate(*ablate_cfg, *ablate_axis, *ablate_values, *ablate_out_dir,
                           *ablate_dataset, *ablate_descriptions);
  });

  // gradcheck
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of the gradient");
  auto grad_config = std::make_shared<GradcheckConfig>();
  auto grad_tol = std::make_shared<double>(1e-4);
  grad_cmd->add_option("--seed", grad_config->seed, "instance seed");
  grad_cmd->add_option("--n_prompts", grad_config->num_prompts, "prompt count");
  grad_cmd->add_option("--n_classes", grad_config->num_classes, "class count");
  grad_cmd->add_option("--ctx_len", grad_config->ctx_len, "context length");
  grad_cmd->add_option("--token_dim", grad_config->token_dim, "token embedding dim");
  grad_cmd->add_option("--hidden_dim", grad_config->hidden, "hidden dim");
  grad_cmd->add_option("--embed_dim", grad_config->embed, "output embedding dim");
  grad_cmd->add_option("--batch_size", grad_config->batch, "batch size");
  grad_cmd->add_option("--tau", grad_config->tau, "logit temperature");
  grad_cmd->add_option("--lambda_sg", grad_config->lambda_sg, "guidance weight");
  grad_cmd->add_option("--lambda_div", grad_config->lambda_div, "diversity weight");
  grad_cmd->add_option("--step", grad_config->step, "finite-difference step");
  grad_cmd->add_option("--tol", *grad_tol, "pass/fail tolerance");
  grad_cmd->callback([=, &exit_code] { exit_code = cmd_gradcheck(*grad_config, *grad_tol); });

  // selftest
  auto* self_cmd = app.add_subcommand("selftest", "run the file-free property suite");
  self_cmd->callback([&exit_code] { exit_code = cmd_selftest(); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return exit_code;
}

}  // namespace msgcoop
