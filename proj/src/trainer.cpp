#include "msgcoop/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "msgcoop/rng.hpp"

namespace msgcoop {

namespace {

std::string format_double(double v) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const std::uint64_t parsed = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    throw DomainError("config: bad unsigned value for " + key + ": '" + value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double parsed = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    throw DomainError("config: bad numeric value for " + key + ": '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw DomainError("config: bad boolean value for " + key + ": '" + value + "'");
}

}  // namespace

GuidanceSource parse_guidance(const std::string& value) {
  if (value == "llm" || value == "llm-fixture") return GuidanceSource::kLlm;
  if (value == "handcrafted") return GuidanceSource::kHandcrafted;
  if (value == "none") return GuidanceSource::kNone;
  throw DomainError("guidance must be one of llm, handcrafted, none (got '" + value + "')");
}

std::string to_string(GuidanceSource value) {
  switch (value) {
    case GuidanceSource::kLlm: return "llm";
    case GuidanceSource::kHandcrafted: return "handcrafted";
    case GuidanceSource::kNone: return "none";
  }
  return "none";
}

TrainConfig TrainConfig::desk_default() { return TrainConfig{}; }

TrainConfig TrainConfig::paper_default() {
  TrainConfig cfg;
  cfg.epochs = 100;
  cfg.batch_size = 128;
  cfg.lr = 0.002;
  return cfg;
}

void TrainConfig::validate() const {
  if (lr < 0.0 || !std::isfinite(lr)) throw DomainError("config: lr must be nonnegative");
  if (epochs < 1) throw DomainError("config: epochs must be at least 1");
  if (batch_size < 1) throw DomainError("config: batch_size must be at least 1");
  if (n_prompts < 1) throw DomainError("config: n_prompts must be at least 1");
  if (ctx_len < 1) throw DomainError("config: ctx_len must be at least 1");
  if (shots < 1) throw DomainError("config: shots must be at least 1");
  if (test_per_class < 1) throw DomainError("config: test_per_class must be at least 1");
  if (n_classes < 2 || n_classes % 2 != 0) {
    throw DomainError("config: n_classes must be even and at least 2");
  }
  if (tau <= 0.0) throw DomainError("config: tau must be positive");
  if (sigma_init < 0.0) throw DomainError("config: sigma_init must be nonnegative");
  if (sigma_data < 0.0) throw DomainError("config: sigma_data must be nonnegative");
  if (lambda_sg < 0.0 || lambda_div < 0.0) {
    throw DomainError("config: loss weights must be nonnegative");
  }
  if (k_descriptions < 1) throw DomainError("config: k_descriptions must be at least 1");
  if (samples_per_template < 1) {
    throw DomainError("config: samples_per_template must be at least 1");
  }
  if (threads < 1) throw DomainError("config: threads must be at least 1");
  if (identity_image_encoder && image_dim != embed_dim) {
    throw DomainError("config: identity_image_encoder requires image_dim == embed_dim");
  }
}

EncoderDims TrainConfig::encoder_dims() const {
  return EncoderDims{vocab, token_dim, hidden_dim, embed_dim, image_dim};
}

json TrainConfig::to_json() const {
  json j;
  j["n_prompts"] = n_prompts;
  j["ctx_len"] = ctx_len;
  j["vocab"] = vocab;
  j["token_dim"] = token_dim;
  j["hidden_dim"] = hidden_dim;
  j["embed_dim"] = embed_dim;
  j["image_dim"] = image_dim;
  j["tau"] = tau;
  j["sigma_init"] = sigma_init;
  j["lr"] = lr;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["shots"] = shots;
  j["test_per_class"] = test_per_class;
  j["n_classes"] = n_classes;
  j["sigma_data"] = sigma_data;
  j["lambda_sg"] = lambda_sg;
  j["lambda_div"] = lambda_div;
  j["k_descriptions"] = k_descriptions;
  j["samples_per_template"] = samples_per_template;
  j["seed_encoder"] = seed_encoder;
  j["seed_data"] = seed_data;
  j["seed_init"] = seed_init;
  j["guidance"] = to_string(guidance);
  j["init_template"] = init_template;
  j["handcrafted_template"] = handcrafted_template;
  j["identity_image_encoder"] = identity_image_encoder;
  j["threads"] = threads;
  return j;
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig cfg;
  cfg.n_prompts = j.at("n_prompts").get<std::size_t>();
  cfg.ctx_len = j.at("ctx_len").get<std::size_t>();
  cfg.vocab = j.at("vocab").get<std::size_t>();
  cfg.token_dim = j.at("token_dim").get<std::size_t>();
  cfg.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  cfg.embed_dim = j.at("embed_dim").get<std::size_t>();
  cfg.image_dim = j.at("image_dim").get<std::size_t>();
  cfg.tau = j.at("tau").get<double>();
  cfg.sigma_init = j.at("sigma_init").get<double>();
  cfg.lr = j.at("lr").get<double>();
  cfg.epochs = j.at("epochs").get<std::size_t>();
  cfg.batch_size = j.at("batch_size").get<std::size_t>();
  cfg.shots = j.at("shots").get<std::size_t>();
  cfg.test_per_class = j.at("test_per_class").get<std::size_t>();
  cfg.n_classes = j.at("n_classes").get<std::size_t>();
  cfg.sigma_data = j.at("sigma_data").get<double>();
  cfg.lambda_sg = j.at("lambda_sg").get<double>();
  cfg.lambda_div = j.at("lambda_div").get<double>();
  cfg.k_descriptions = j.at("k_descriptions").get<std::size_t>();
  cfg.samples_per_template = j.at("samples_per_template").get<std::size_t>();
  cfg.seed_encoder = j.at("seed_encoder").get<std::uint64_t>();
  cfg.seed_data = j.at("seed_data").get<std::uint64_t>();
  cfg.seed_init = j.at("seed_init").get<std::uint64_t>();
  cfg.guidance = parse_guidance(j.at("guidance").get<std::string>());
  cfg.init_template = j.at("init_template").get<std::string>();
  cfg.handcrafted_template = j.at("handcrafted_template").get<std::string>();
  cfg.identity_image_encoder = j.at("identity_image_encoder").get<bool>();
  cfg.threads = j.at("threads").get<unsigned>();
  return cfg;
}

void TrainConfig::apply_key(const std::string& key, const std::string& value) {
  if (key == "n_prompts") n_prompts = parse_u64(key, value);
  else if (key == "ctx_len") ctx_len = parse_u64(key, value);
  else if (key == "vocab") vocab = parse_u64(key, value);
  else if (key == "token_dim") token_dim = parse_u64(key, value);
  else if (key == "hidden_dim") hidden_dim = parse_u64(key, value);
  else if (key == "embed_dim") embed_dim = parse_u64(key, value);
  else if (key == "image_dim") image_dim = parse_u64(key, value);
  else if (key == "tau") tau = parse_double(key, value);
  else if (key == "sigma_init") sigma_init = parse_double(key, value);
  else if (key == "lr") lr = parse_double(key, value);
  else if (key == "epochs") epochs = parse_u64(key, value);
  else if (key == "batch_size") batch_size = parse_u64(key, value);
  else if (key == "shots") shots = parse_u64(key, value);
  else if (key == "test_per_class") test_per_class = parse_u64(key, value);
  else if (key == "n_classes") n_classes = parse_u64(key, value);
  else if (key == "sigma_data") sigma_data = parse_double(key, value);
  else if (key == "lambda_sg") lambda_sg = parse_double(key, value);
  else if (key == "lambda_div") lambda_div = parse_double(key, value);
  else if (key == "k_descriptions") k_descriptions = parse_u64(key, value);
  else if (key == "samples_per_template") samples_per_template = parse_u64(key, value);
  else if (key == "seed_encoder") seed_encoder = parse_u64(key, value);
  else if (key == "seed_data") seed_data = parse_u64(key, value);
  else if (key == "seed_init") seed_init = parse_u64(key, value);
  else if (key == "guidance") guidance = parse_guidance(value);
  else if (key == "init_template") init_template = value;
  else if (key == "handcrafted_template") handcrafted_template = value;
  else if (key == "identity_image_encoder") identity_image_encoder = parse_bool(key, value);
  else if (key == "threads") threads = static_cast<unsigned>(parse_u64(key, value));
  else throw DomainError("config: unknown key '" + key + "'");
}

TrainConfig TrainConfig::from_file(const std::string& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw DomainError("config: cannot open " + path);
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw DomainError("config: expected key = value at " + path + ":" +
                        std::to_string(line_number));
    }
    base.apply_key(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
  return base;
}

void TrainConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DomainError("config: cannot write " + path);
  const json j = to_json();
  for (const auto& [key, value] : j.items()) {
    if (value.is_string()) {
      out << key << " = " << value.get<std::string>() << '\n';
    } else {
      out << key << " = " << value.dump() << '\n';
    }
  }
}

std::uint64_t TrainConfig::fingerprint() const {
  json j = to_json();
  j.erase("epochs");
  j.erase("threads");
  return fnv1a64(j.dump());
}

json Checkpoint::to_json() const {
  json j;
  j["version"] = kVersion;
  j["config"] = config.to_json();
  j["epoch"] = epoch;
  json prompts = json::array();
  for (const Mat& ctx : bank.context) {
    json rows = json::array();
    for (std::size_t r = 0; r < ctx.rows; ++r) {
      rows.push_back(json(std::vector<double>(ctx.row(r).begin(), ctx.row(r).end())));
    }
    prompts.push_back(std::move(rows));
  }
  j["context"] = std::move(prompts);
  json hist = json::array();
  for (const EpochStats& s : history) {
    hist.push_back(json{{"epoch", s.epoch},
                        {"l_ce", s.l_ce},
                        {"l_sg", s.l_sg},
                        {"l_div", s.l_div},
                        {"l_total", s.l_total}});
  }
  j["history"] = std::move(hist);
  j["shuffle_state"] = shuffle_state;
  char fp[20];
  std::snprintf(fp, sizeof(fp), "%016llx", static_cast<unsigned long long>(config_fingerprint));
  j["config_fingerprint"] = fp;
  std::snprintf(fp, sizeof(fp), "%016llx", static_cast<unsigned long long>(dataset_fingerprint));
  j["dataset_fingerprint"] = fp;
  return j;
}

Checkpoint Checkpoint::from_json(const json& j) {
  if (j.at("version").get<std::string>() != kVersion) {
    throw DomainError("checkpoint: version mismatch (expected " + std::string(kVersion) +
                      ", found " + j.at("version").get<std::string>() + ")");
  }
  Checkpoint ckpt;
  ckpt.config = TrainConfig::from_json(j.at("config"));
  ckpt.epoch = j.at("epoch").get<std::size_t>();
  const auto& prompts = j.at("context");
  ckpt.bank.num_prompts = prompts.size();
  ckpt.bank.ctx_len = ckpt.config.ctx_len;
  ckpt.bank.dim = ckpt.config.token_dim;
  for (const auto& rows : prompts) {
    Mat ctx(rows.size(), rows.empty() ? 0 : rows.at(0).size());
    std::size_t r = 0;
    for (const auto& row : rows) {
      for (std::size_t c = 0; c < ctx.cols; ++c) ctx.at(r, c) = row.at(c).get<double>();
      ++r;
    }
    require_finite(ctx.data, "checkpoint context");
    ckpt.bank.context.push_back(std::move(ctx));
  }
  for (const auto& s : j.at("history")) {
    ckpt.history.push_back(EpochStats{s.at("epoch").get<std::size_t>(),
                                      s.at("l_ce").get<double>(), s.at("l_sg").get<double>(),
                                      s.at("l_div").get<double>(), s.at("l_total").get<double>()});
  }
  ckpt.shuffle_state = j.at("shuffle_state").get<std::uint64_t>();
  ckpt.config_fingerprint =
      std::stoull(j.at("config_fingerprint").get<std::string>(), nullptr, 16);
  ckpt.dataset_fingerprint =
      std::stoull(j.at("dataset_fingerprint").get<std::string>(), nullptr, 16);
  return ckpt;
}

void Checkpoint::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DomainError("checkpoint: cannot write " + path);
  out << to_json().dump(2) << '\n';
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("checkpoint: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DomainError("checkpoint: invalid JSON in " + path + " (" + e.what() + ")");
  }
  return from_json(j);
}

SyntheticDataset dataset_from_config(const TrainConfig& config) {
  SyntheticDataset dataset =
      generate_dataset(config.n_classes, config.shots, config.test_per_class, config.sigma_data,
                       config.image_dim, config.seed_data);
  if (!config.identity_image_encoder) return dataset;

  // Identity image branch: simulate the image-text alignment a contrastively
  // pretrained dual encoder would provide. Each class's cluster direction is
  // its name's text embedding blended with that class's seeded random
  // direction, so zero-shot scoring is informative but far from saturated.
  const double mix = 1.4;
  const Tokenizer tokenizer(config.vocab, config.seed_encoder);
  const FrozenEncoder encoder(config.encoder_dims(), config.seed_encoder,
                              config.identity_image_encoder);
  std::vector<Vec> prototypes;
  prototypes.reserve(dataset.class_names.size());
  for (std::size_t i = 0; i < dataset.class_names.size(); ++i) {
    const Vec anchor =
        encoder.encode_text(encoder.embed_tokens(tokenizer.tokenize(dataset.class_names[i])));
    Vec blended(anchor.size());
    for (std::size_t c = 0; c < anchor.size(); ++c) {
      blended[c] = anchor[c] + mix * dataset.prototypes[i][c];
    }
    prototypes.push_back(l2_normalize(blended));
  }
  return generate_dataset(config.n_classes, config.shots, config.test_per_class,
                          config.sigma_data, config.image_dim, config.seed_data, &prototypes);
}

TrainerWorld build_world(const TrainConfig& config, const SyntheticDataset& dataset,
                         const std::vector<DescriptionSet>* descriptions) {
  if (dataset.feature_dim != config.image_dim) {
    throw DimensionError("train: dataset feature_dim does not match config image_dim");
  }
  TrainerWorld world{
      Tokenizer(config.vocab, config.seed_encoder),
      FrozenEncoder(config.encoder_dims(), config.seed_encoder, config.identity_image_encoder),
      {},
      {},
      std::nullopt,
      {},
  };
  world.full_catalog = make_catalog(dataset.class_names, world.tokenizer, world.encoder);

  std::vector<std::string> base_names;
  for (const std::size_t idx : dataset.base_classes) {
    base_names.push_back(dataset.class_names[idx]);
    world.base_catalog.names.push_back(world.full_catalog.names[idx]);
    world.base_catalog.tokens.push_back(world.full_catalog.tokens[idx]);
  }

  if (config.guidance == GuidanceSource::kLlm) {
    std::map<std::string, const DescriptionSet*> by_name;
    if (descriptions) {
      for (const auto& set : *descriptions) by_name[set.class_name] = &set;
    }
    std::vector<Vec> refs;
    for (std::size_t local = 0; local < dataset.base_classes.size(); ++local) {
      const std::size_t idx = dataset.base_classes[local];
      const std::string& name = dataset.class_names[idx];
      std::vector<std::string> selected;
      if (const auto it = by_name.find(name); it != by_name.end()) {
        selected = it->second->selected.empty()
                       ? filter_topk(it->second->raw, config.k_descriptions, world.tokenizer,
                                     world.encoder)
                             .selected
                       : it->second->selected;
      } else if (!dataset.descriptions[idx].empty()) {
        // No description file: fall back to the dataset's own pools.
        selected = filter_topk(dataset.descriptions[idx], config.k_descriptions, world.tokenizer,
                               world.encoder)
                       .selected;
      } else {
        throw DomainError("train: missing descriptions for base class '" + name +
                          "' under llm guidance");
      }
      refs.push_back(semantic_reference(selected, world.tokenizer, world.encoder));
    }
    world.references = std::move(refs);
  } else if (config.guidance == GuidanceSource::kHandcrafted) {
    std::vector<Vec> refs;
    for (const std::size_t idx : dataset.base_classes) {
      refs.push_back(handcrafted_reference(dataset.class_names[idx], config.handcrafted_template,
                                           world.tokenizer, world.encoder));
    }
    world.references = std::move(refs);
  }

  for (std::size_t local = 0; local < dataset.base_classes.size(); ++local) {
    for (const Vec& sample : dataset.train[dataset.base_classes[local]]) {
      world.train_pool.images.push_back(world.encoder.encode_image(sample));
      world.train_pool.labels.push_back(local);
    }
  }
  if (world.train_pool.images.empty()) throw DomainError("train: no base-class samples");
  return world;
}

namespace {

void run_epochs(const TrainConfig& config, const TrainerWorld& world, ContextBank& bank,
                SplitMix64& shuffle_rng, std::vector<EpochStats>& history,
                std::size_t first_epoch, std::size_t last_epoch, std::ostream* metrics,
                std::ostream* log) {
  const LossWeights weights{config.lambda_sg, config.lambda_div};
  const std::vector<Vec>* refs = world.references ? &*world.references : nullptr;
  const std::size_t pool = world.train_pool.images.size();
  std::vector<std::size_t> order(pool);

  for (std::size_t epoch = first_epoch; epoch <= last_epoch; ++epoch) {
    for (std::size_t i = 0; i < pool; ++i) order[i] = i;
    for (std::size_t i = pool - 1; i > 0; --i) {
      const std::size_t j = shuffle_rng.below(i + 1);
      std::swap(order[i], order[j]);
    }

    EpochStats stats{epoch, 0.0, 0.0, 0.0, 0.0};
    std::size_t batches = 0;
    for (std::size_t start = 0; start < pool; start += config.batch_size) {
      const std::size_t end = std::min(pool, start + config.batch_size);
      EncodedBatch batch;
      batch.images.reserve(end - start);
      batch.labels.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        batch.images.push_back(world.train_pool.images[order[i]]);
        batch.labels.push_back(world.train_pool.labels[order[i]]);
      }

      const LossReport report = total_loss(bank, world.base_catalog, world.encoder, batch, refs,
                                           weights, config.tau, true);
      if (!std::isfinite(report.l_total)) {
        throw DomainError("train: non-finite loss at epoch " + std::to_string(epoch) +
                          ", batch " + std::to_string(batches));
      }
      const Grad& grad = *report.grad;
      for (std::size_t n = 0; n < bank.num_prompts; ++n) {
        for (std::size_t idx = 0; idx < bank.context[n].data.size(); ++idx) {
          bank.context[n].data[idx] -=
              config.lr * grad.data[n * bank.ctx_len * bank.dim + idx];
        }
      }
      stats.l_ce += report.l_ce;
      stats.l_sg += report.l_sg;
      stats.l_div += report.l_div;
      stats.l_total += report.l_total;
      ++batches;
    }
    stats.l_ce /= static_cast<double>(batches);
    stats.l_sg /= static_cast<double>(batches);
    stats.l_div /= static_cast<double>(batches);
    stats.l_total /= static_cast<double>(batches);
    history.push_back(stats);

    if (metrics) {
      *metrics << stats.epoch << ',' << format_double(stats.l_ce) << ','
               << format_double(stats.l_sg) << ',' << format_double(stats.l_div) << ','
               << format_double(stats.l_total) << '\n';
    }
    if (log) {
      *log << "epoch " << stats.epoch << "/" << last_epoch << " l_total="
           << format_double(stats.l_total) << "\n";
    }
  }
}

}  // namespace

Checkpoint train(const TrainConfig& config, const SyntheticDataset& dataset,
                 const std::vector<DescriptionSet>* descriptions, std::ostream* metrics,
                 std::ostream* log) {
  config.validate();
  const TrainerWorld world = build_world(config, dataset, descriptions);

  Checkpoint ckpt;
  ckpt.config = config;
  ckpt.config_fingerprint = config.fingerprint();
  ckpt.dataset_fingerprint = dataset.fingerprint();
  ckpt.bank = init_context(config.init_template, config.n_prompts, config.ctx_len,
                           config.sigma_init, config.seed_init, world.tokenizer, world.encoder);

  SplitMix64 shuffle_rng(derive_seed(config.seed_data, "shuffle"));
  if (metrics) *metrics << "epoch,l_ce,l_sg,l_div,l_total\n";
  run_epochs(config, world, ckpt.bank, shuffle_rng, ckpt.history, 1, config.epochs, metrics, log);
  ckpt.epoch = config.epochs;
  ckpt.shuffle_state = shuffle_rng.state;
  return ckpt;
}

Checkpoint resume(const Checkpoint& checkpoint, const TrainConfig& requested,
                  const SyntheticDataset& dataset, const std::vector<DescriptionSet>* descriptions,
                  std::ostream* metrics, std::ostream* log) {
  requested.validate();
  if (requested.fingerprint() != checkpoint.config_fingerprint) {
    throw DomainError("resume: config fingerprint mismatch (a non-resumable setting changed)");
  }
  if (dataset.fingerprint() != checkpoint.dataset_fingerprint) {
    throw DomainError("resume: dataset fingerprint mismatch");
  }
  if (requested.epochs < checkpoint.epoch) {
    throw DomainError("resume: requested epochs " + std::to_string(requested.epochs) +
                      " is before checkpoint epoch " + std::to_string(checkpoint.epoch));
  }

  Checkpoint ckpt = checkpoint;
  ckpt.config = requested;
  if (requested.epochs == checkpoint.epoch) return ckpt;

  const TrainerWorld world = build_world(requested, dataset, descriptions);
  SplitMix64 shuffle_rng;
  shuffle_rng.state = checkpoint.shuffle_state;
  run_epochs(requested, world, ckpt.bank, shuffle_rng, ckpt.history, checkpoint.epoch + 1,
             requested.epochs, metrics, log);
  ckpt.epoch = requested.epochs;
  ckpt.shuffle_state = shuffle_rng.state;
  return ckpt;
}

std::vector<AblationRow> ablate(const TrainConfig& base_config, const std::string& axis,
                                const std::vector<std::string>& values,
                                const SyntheticDataset& dataset,
                                const std::vector<DescriptionSet>* descriptions,
                                std::ostream* log) {
  if (values.empty()) throw DomainError("ablate: no values given");
  std::vector<AblationRow> rows;
  for (const std::string& value : values) {
    TrainConfig config = base_config;
    if (axis == "N") {
      config.n_prompts = parse_u64("N", value);
    } else if (axis == "lambda_div") {
      config.lambda_div = parse_double("lambda_div", value);
    } else if (axis == "guidance") {
      config.guidance = parse_guidance(value);
    } else {
      throw DomainError("ablate: unknown axis '" + axis + "' (expected N, lambda_div, guidance)");
    }
    if (log) *log << "ablate " << axis << " = " << value << "\n";

    const Checkpoint ckpt = train(config, dataset, descriptions, nullptr, nullptr);
    const TrainerWorld world = build_world(config, dataset, descriptions);
    const EvalReport report =
        evaluate(ckpt.bank, world.full_catalog, world.encoder, dataset, config.tau,
                 config.threads);

    AblationRow row;
    row.axis = axis;
    row.value = value;
    row.base_acc = report.base_acc;
    row.novel_acc = report.novel_acc;
    row.harmonic_mean = report.harmonic_mean;
    const EpochStats& last = ckpt.history.back();
    row.l_ce = last.l_ce;
    row.l_sg = last.l_sg;
    row.l_div = last.l_div;
    row.l_total = last.l_total;
    row.diversity_disabled = config.n_prompts < 2;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "axis,value,base_acc,novel_acc,hm,l_ce,l_sg,l_div,l_total,diversity_disabled\n";
  for (const AblationRow& row : rows) {
    char line[256];
    std::snprintf(line, sizeof(line), "%s,%s,%.2f,%.2f,%.2f,%.6f,%.6f,%.6f,%.6f,%s\n",
                  row.axis.c_str(), row.value.c_str(), row.base_acc, row.novel_acc,
                  row.harmonic_mean, row.l_ce, row.l_sg, row.l_div, row.l_total,
                  row.diversity_disabled ? "true" : "false");
    out << line;
  }
  return out.str();
}

}  // namespace msgcoop
