#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "msgcoop/encoder.hpp"
#include "msgcoop/numeric.hpp"
#include "msgcoop/prompt.hpp"

namespace msgcoop {

// Clustered unit vectors around per-class prototypes, split half base / half
// novel, with per-class word-salad description pools so guidance references
// genuinely differ per class without a live LLM.
struct SyntheticDataset {
  std::size_t feature_dim = 0;
  double sigma_data = 0.0;
  std::uint64_t seed = 0;
  std::string category = "synthetic objects";
  std::vector<std::string> class_names;
  std::vector<Vec> prototypes;              // unit vectors, one per class
  std::vector<std::vector<Vec>> train;      // [class][shot]
  std::vector<std::vector<Vec>> test;       // [class][sample]
  std::vector<std::vector<std::string>> descriptions;  // [class][sentence]
  std::vector<std::size_t> base_classes;
  std::vector<std::size_t> novel_classes;

  json to_json() const;
  static SyntheticDataset from_json(const json& j);
  void save(const std::string& path) const;
  static SyntheticDataset load(const std::string& path);

  // FNV over the canonical JSON dump; anchors checkpoint/resume validation.
  std::uint64_t fingerprint() const;
};

// Deterministic from the seed. n_classes must be an even count >= 2; the
// first half of the classes is the base split. Class names are unique
// pronounceable word pairs; every description mentions the class's own words.
// prototype_override, when given, supplies the cluster directions (unit
// vectors, one per class) in place of the seeded random ones.
SyntheticDataset generate_dataset(std::size_t n_classes, std::size_t shots,
                                  std::size_t test_per_class, double sigma_data,
                                  std::size_t feature_dim, std::uint64_t seed,
                                  const std::vector<Vec>* prototype_override = nullptr);

struct EvalReport {
  double base_acc = 0.0;      // percent
  double novel_acc = 0.0;     // percent
  double harmonic_mean = 0.0; // percent
  std::map<std::string, double> per_class;

  json to_json() const;
  std::string csv_row() const;  // base,novel,hm
};

// 2BN/(B+N), 0 when B+N is 0.
double harmonic_mean(double base, double novel);

// Base test samples are classified among base classes and novel test samples
// among novel classes (contexts transfer zero-shot to novel class names).
// The catalog must cover the dataset's classes in dataset order. Read-only.
EvalReport evaluate(const ContextBank& bank, const ClassCatalog& catalog,
                    const FrozenEncoder& encoder, const SyntheticDataset& dataset, double tau,
                    unsigned threads = 1);

// Same protocol with hand-crafted per-class prompts instead of learned
// contexts; class_template must contain {cls}.
EvalReport zero_shot_baseline(const ClassCatalog& catalog, const Tokenizer& tokenizer,
                              const FrozenEncoder& encoder, const SyntheticDataset& dataset,
                              const std::string& class_template, double tau);

}  // namespace msgcoop
