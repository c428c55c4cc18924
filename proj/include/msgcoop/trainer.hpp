#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "msgcoop/descriptions.hpp"
#include "msgcoop/encoder.hpp"
#include "msgcoop/eval.hpp"
#include "msgcoop/objective.hpp"
#include "msgcoop/prompt.hpp"

namespace msgcoop {

enum class GuidanceSource { kLlm, kHandcrafted, kNone };

GuidanceSource parse_guidance(const std::string& value);  // accepts "llm-fixture" as "llm"
std::string to_string(GuidanceSource value);

// Every field maps 1:1 to a config-file key and a CLI flag of the same name.
struct TrainConfig {
  std::size_t n_prompts = 4;      // N
  std::size_t ctx_len = 4;        // M
  std::size_t vocab = 4096;       // V
  std::size_t token_dim = 32;     // d
  std::size_t hidden_dim = 64;    // h
  std::size_t embed_dim = 64;     // e
  std::size_t image_dim = 64;     // f
  double tau = 30.0;
  double sigma_init = 0.02;
  double lr = 1.0;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  std::size_t shots = 16;
  std::size_t test_per_class = 20;
  std::size_t n_classes = 10;
  double sigma_data = 0.15;
  double lambda_sg = 8.0;
  double lambda_div = 1.0;
  std::size_t k_descriptions = 4;
  std::size_t samples_per_template = 2;
  std::uint64_t seed_encoder = 1;
  std::uint64_t seed_data = 2;
  std::uint64_t seed_init = 3;
  GuidanceSource guidance = GuidanceSource::kLlm;
  std::string init_template = "a photo of a";
  std::string handcrafted_template = "a photo of {cls}";
  bool identity_image_encoder = true;
  unsigned threads = 1;

  // Desk-scale benchmark defaults (the struct initializers above).
  static TrainConfig desk_default();
  // Published-experiment scale: batch 128, 100 epochs, lr 0.002.
  static TrainConfig paper_default();

  void validate() const;
  EncoderDims encoder_dims() const;

  json to_json() const;
  static TrainConfig from_json(const json& j);

  void apply_key(const std::string& key, const std::string& value);
  static TrainConfig from_file(const std::string& path, TrainConfig base = desk_default());
  void save(const std::string& path) const;

  // FNV over the canonical dump minus epochs and threads; resume refuses a
  // checkpoint whose fingerprint disagrees.
  std::uint64_t fingerprint() const;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double l_ce = 0.0;
  double l_sg = 0.0;
  double l_div = 0.0;
  double l_total = 0.0;
};

struct Checkpoint {
  static constexpr const char* kVersion = "msgcoop-checkpoint-v1";

  TrainConfig config;
  ContextBank bank;
  std::size_t epoch = 0;
  std::vector<EpochStats> history;
  std::uint64_t shuffle_state = 0;
  std::uint64_t config_fingerprint = 0;
  std::uint64_t dataset_fingerprint = 0;

  json to_json() const;
  static Checkpoint from_json(const json& j);
  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

// Everything rebuilt deterministically from (config, dataset, descriptions).
struct TrainerWorld {
  Tokenizer tokenizer;
  FrozenEncoder encoder;
  ClassCatalog full_catalog;   // all dataset classes, dataset order
  ClassCatalog base_catalog;   // base split only
  std::optional<std::vector<Vec>> references;  // per base class, when guided
  EncodedBatch train_pool;     // all base-split train samples, encoded once
};

TrainerWorld build_world(const TrainConfig& config, const SyntheticDataset& dataset,
                         const std::vector<DescriptionSet>* descriptions);

// Generates the config's synthetic dataset (seeded by seed_data).
SyntheticDataset dataset_from_config(const TrainConfig& config);

// Plain SGD on the context bank, everything else frozen. Per-epoch statistics
// are batch means; metrics (when given) receives one CSV row per epoch.
Checkpoint train(const TrainConfig& config, const SyntheticDataset& dataset,
                 const std::vector<DescriptionSet>* descriptions = nullptr,
                 std::ostream* metrics = nullptr, std::ostream* log = nullptr);

// Continues a checkpoint to requested.epochs as if never interrupted.
// requested must fingerprint-match the checkpoint's config, and the dataset
// must fingerprint-match the one trained on.
Checkpoint resume(const Checkpoint& checkpoint, const TrainConfig& requested,
                  const SyntheticDataset& dataset,
                  const std::vector<DescriptionSet>* descriptions = nullptr,
                  std::ostream* metrics = nullptr, std::ostream* log = nullptr);

struct AblationRow {
  std::string axis;
  std::string value;
  double base_acc = 0.0;
  double novel_acc = 0.0;
  double harmonic_mean = 0.0;
  double l_ce = 0.0;
  double l_sg = 0.0;
  double l_div = 0.0;
  double l_total = 0.0;
  bool diversity_disabled = false;
};

// One training run per value with shared seeds; axis is one of
// "N", "lambda_div", "guidance".
std::vector<AblationRow> ablate(const TrainConfig& base_config, const std::string& axis,
                                const std::vector<std::string>& values,
                                const SyntheticDataset& dataset,
                                const std::vector<DescriptionSet>* descriptions = nullptr,
                                std::ostream* log = nullptr);

std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace msgcoop
