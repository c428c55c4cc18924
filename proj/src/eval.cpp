#include "msgcoop/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include "msgcoop/descriptions.hpp"
#include "msgcoop/rng.hpp"

namespace msgcoop {

namespace {

const std::vector<std::string>& consonants() {
  static const std::vector<std::string> c = {"b", "d", "f", "g", "k", "l", "m",
                                             "n", "p", "r", "s", "t", "v", "z"};
  return c;
}

const std::vector<std::string>& vowels() {
  static const std::vector<std::string> v = {"a", "e", "i", "o", "u"};
  return v;
}

std::string make_word(SplitMix64& rng) {
  const std::size_t syllables = 2 + rng.below(2);
  std::string word;
  for (std::size_t s = 0; s < syllables; ++s) {
    word += consonants()[rng.below(consonants().size())];
    word += vowels()[rng.below(vowels().size())];
  }
  return word;
}

Vec random_unit(SplitMix64& rng, std::size_t dim) {
  while (true) {
    Vec v(dim);
    for (double& x : v) x = rng.gaussian();
    bool degenerate = false;
    Vec unit = l2_normalize(v, &degenerate);
    if (!degenerate) return unit;
  }
}

Vec sample_around(const Vec& prototype, double sigma, SplitMix64& rng) {
  if (sigma == 0.0) return prototype;
  while (true) {
    Vec v = prototype;
    for (double& x : v) x += rng.gaussian(0.0, sigma);
    bool degenerate = false;
    Vec unit = l2_normalize(v, &degenerate);
    if (!degenerate) return unit;
  }
}

// Word-salad sentences that always mention the class's own name words, so the
// class's reference embedding is anchored to its name tokens.
std::vector<std::string> make_descriptions(const std::string& class_name,
                                           const std::vector<std::string>& pool,
                                           std::size_t count, SplitMix64& rng) {
  static const std::vector<std::string> leads = {"a", "the", "this", "every"};
  static const std::vector<std::string> joins = {"with", "showing", "bearing", "carrying"};
  std::set<std::string> unique;
  std::vector<std::string> sentences;
  while (sentences.size() < count) {
    std::string s = leads[rng.below(leads.size())] + " " + class_name + " " +
                    joins[rng.below(joins.size())];
    const std::size_t extras = 2 + rng.below(3);
    for (std::size_t i = 0; i < extras; ++i) s += " " + pool[rng.below(pool.size())];
    if (unique.insert(s).second) sentences.push_back(std::move(s));
  }
  return sentences;
}

json vecs_to_json(const std::vector<Vec>& vs) {
  json out = json::array();
  for (const Vec& v : vs) out.push_back(v);
  return out;
}

}  // namespace

SyntheticDataset generate_dataset(std::size_t n_classes, std::size_t shots,
                                  std::size_t test_per_class, double sigma_data,
                                  std::size_t feature_dim, std::uint64_t seed,
                                  const std::vector<Vec>* prototype_override) {
  if (n_classes < 2 || n_classes % 2 != 0) {
    throw DomainError("generate_dataset: class count must be even and at least 2");
  }
  if (shots == 0 || test_per_class == 0) {
    throw DomainError("generate_dataset: shots and test_per_class must be positive");
  }
  if (sigma_data < 0.0) throw DomainError("generate_dataset: sigma_data must be nonnegative");
  if (feature_dim == 0) throw DomainError("generate_dataset: feature_dim must be positive");
  if (prototype_override && prototype_override->size() != n_classes) {
    throw DomainError("generate_dataset: prototype override must cover every class");
  }

  SyntheticDataset ds;
  ds.feature_dim = feature_dim;
  ds.sigma_data = sigma_data;
  ds.seed = seed;

  SplitMix64 rng(seed);
  std::set<std::string> used_names;
  for (std::size_t i = 0; i < n_classes; ++i) {
    std::string name;
    do {
      name = make_word(rng) + " " + make_word(rng);
    } while (!used_names.insert(name).second);
    ds.class_names.push_back(name);
  }

  const std::size_t descriptions_per_class = 10;
  for (std::size_t i = 0; i < n_classes; ++i) {
    ds.prototypes.push_back(prototype_override ? (*prototype_override)[i]
                                               : random_unit(rng, feature_dim));
    std::vector<Vec> train_samples, test_samples;
    for (std::size_t s = 0; s < shots; ++s) {
      train_samples.push_back(sample_around(ds.prototypes[i], sigma_data, rng));
    }
    for (std::size_t s = 0; s < test_per_class; ++s) {
      test_samples.push_back(sample_around(ds.prototypes[i], sigma_data, rng));
    }
    ds.train.push_back(std::move(train_samples));
    ds.test.push_back(std::move(test_samples));

    std::vector<std::string> pool;
    for (int w = 0; w < 6; ++w) pool.push_back(make_word(rng));
    ds.descriptions.push_back(
        make_descriptions(ds.class_names[i], pool, descriptions_per_class, rng));
  }

  const std::size_t base_count = n_classes / 2;
  for (std::size_t i = 0; i < n_classes; ++i) {
    (i < base_count ? ds.base_classes : ds.novel_classes).push_back(i);
  }
  return ds;
}

json SyntheticDataset::to_json() const {
  json j;
  j["version"] = "msgcoop-dataset-v1";
  j["feature_dim"] = feature_dim;
  j["sigma_data"] = sigma_data;
  j["seed"] = seed;
  j["category"] = category;
  json classes = json::array();
  for (std::size_t i = 0; i < class_names.size(); ++i) {
    json c;
    c["name"] = class_names[i];
    c["split"] = std::find(base_classes.begin(), base_classes.end(), i) != base_classes.end()
                     ? "base"
                     : "novel";
    c["prototype"] = prototypes[i];
    c["train"] = vecs_to_json(train[i]);
    c["test"] = vecs_to_json(test[i]);
    c["descriptions"] = descriptions[i];
    classes.push_back(std::move(c));
  }
  j["classes"] = std::move(classes);
  return j;
}

SyntheticDataset SyntheticDataset::from_json(const json& j) {
  if (j.at("version").get<std::string>() != "msgcoop-dataset-v1") {
    throw DomainError("dataset: unsupported version");
  }
  SyntheticDataset ds;
  ds.feature_dim = j.at("feature_dim").get<std::size_t>();
  ds.sigma_data = j.at("sigma_data").get<double>();
  ds.seed = j.at("seed").get<std::uint64_t>();
  ds.category = j.at("category").get<std::string>();
  std::size_t index = 0;
  for (const auto& c : j.at("classes")) {
    ds.class_names.push_back(c.at("name").get<std::string>());
    ds.prototypes.push_back(c.at("prototype").get<Vec>());
    ds.train.push_back(c.at("train").get<std::vector<Vec>>());
    ds.test.push_back(c.at("test").get<std::vector<Vec>>());
    ds.descriptions.push_back(c.value("descriptions", std::vector<std::string>{}));
    const auto split = c.at("split").get<std::string>();
    if (split == "base") {
      ds.base_classes.push_back(index);
    } else if (split == "novel") {
      ds.novel_classes.push_back(index);
    } else {
      throw DomainError("dataset: unknown split '" + split + "'");
    }
    require_finite(ds.prototypes.back(), "dataset prototype");
    for (const Vec& v : ds.train.back()) require_finite(v, "dataset train sample");
    for (const Vec& v : ds.test.back()) require_finite(v, "dataset test sample");
    ++index;
  }
  if (ds.base_classes.empty() || ds.novel_classes.empty()) {
    throw DomainError("dataset: both base and novel splits must be non-empty");
  }
  return ds;
}

void SyntheticDataset::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DomainError("dataset: cannot write " + path);
  out << to_json().dump(2) << '\n';
}

SyntheticDataset SyntheticDataset::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("dataset: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DomainError("dataset: invalid JSON in " + path + " (" + e.what() + ")");
  }
  return from_json(j);
}

std::uint64_t SyntheticDataset::fingerprint() const { return fnv1a64(to_json().dump()); }

double harmonic_mean(double base, double novel) {
  if (base + novel <= 0.0) return 0.0;
  return 2.0 * base * novel / (base + novel);
}

json EvalReport::to_json() const {
  json j;
  j["base"] = base_acc;
  j["novel"] = novel_acc;
  j["hm"] = harmonic_mean;
  json per = json::object();
  for (const auto& [name, acc] : per_class) per[name] = acc;
  j["per_class"] = std::move(per);
  return j;
}

std::string EvalReport::csv_row() const {
  char buffer[96];
  std::snprintf(buffer, sizeof(buffer), "%.2f,%.2f,%.2f", base_acc, novel_acc, harmonic_mean);
  return buffer;
}

namespace {

// Accuracy of one split, classifying only among that split's classes.
double split_accuracy(const std::vector<std::size_t>& split, const SoftEmbeddings& soft,
                      const FrozenEncoder& encoder, const SyntheticDataset& dataset, double tau,
                      unsigned threads, std::map<std::string, double>* per_class) {
  std::size_t total = 0;
  std::vector<std::pair<std::size_t, std::size_t>> flat;  // (local label, sample index in class)
  std::vector<const Vec*> samples;
  std::vector<std::size_t> labels;
  for (std::size_t local = 0; local < split.size(); ++local) {
    for (const Vec& sample : dataset.test[split[local]]) {
      samples.push_back(&sample);
      labels.push_back(local);
    }
  }
  total = samples.size();
  if (total == 0) throw DomainError("evaluate: empty test set");

  std::vector<unsigned char> correct(total, 0);
  parallel_for(total, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t s = begin; s < end; ++s) {
      const Vec image = encoder.encode_image(*samples[s]);
      const Vec logits = ensemble_logits(image, soft, tau);
      correct[s] = predict(logits) == labels[s] ? 1 : 0;
    }
  });

  std::size_t hits = 0;
  std::vector<std::size_t> class_hits(split.size(), 0);
  std::vector<std::size_t> class_totals(split.size(), 0);
  for (std::size_t s = 0; s < total; ++s) {
    hits += correct[s];
    class_hits[labels[s]] += correct[s];
    class_totals[labels[s]] += 1;
  }
  if (per_class) {
    for (std::size_t local = 0; local < split.size(); ++local) {
      (*per_class)[dataset.class_names[split[local]]] =
          100.0 * static_cast<double>(class_hits[local]) /
          static_cast<double>(class_totals[local]);
    }
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(total);
}

SoftEmbeddings soft_for_split(const ContextBank& bank, const ClassCatalog& catalog,
                              const std::vector<std::size_t>& split,
                              const FrozenEncoder& encoder) {
  ClassCatalog sub;
  for (const std::size_t idx : split) {
    if (idx >= catalog.size()) throw DomainError("evaluate: catalog does not cover the dataset");
    sub.names.push_back(catalog.names[idx]);
    sub.tokens.push_back(catalog.tokens[idx]);
  }
  return encode_all(bank, sub, encoder);
}

}  // namespace

EvalReport evaluate(const ContextBank& bank, const ClassCatalog& catalog,
                    const FrozenEncoder& encoder, const SyntheticDataset& dataset, double tau,
                    unsigned threads) {
  EvalReport report;
  const auto base_soft = soft_for_split(bank, catalog, dataset.base_classes, encoder);
  const auto novel_soft = soft_for_split(bank, catalog, dataset.novel_classes, encoder);
  report.base_acc = split_accuracy(dataset.base_classes, base_soft, encoder, dataset, tau,
                                   threads, &report.per_class);
  report.novel_acc = split_accuracy(dataset.novel_classes, novel_soft, encoder, dataset, tau,
                                    threads, &report.per_class);
  report.harmonic_mean = harmonic_mean(report.base_acc, report.novel_acc);
  return report;
}

EvalReport zero_shot_baseline(const ClassCatalog& catalog, const Tokenizer& tokenizer,
                              const FrozenEncoder& encoder, const SyntheticDataset& dataset,
                              const std::string& class_template, double tau) {
  // Hand-crafted prompts stand in for the learned ensemble: one embedding per
  // class, expressed as a single-prompt SoftEmbeddings per split.
  const auto soft_for = [&](const std::vector<std::size_t>& split) {
    SoftEmbeddings soft;
    soft.num_classes = split.size();
    soft.num_prompts = 1;
    for (const std::size_t idx : split) {
      soft.embeddings.push_back(
          {handcrafted_reference(dataset.class_names[idx], class_template, tokenizer, encoder)});
      soft.mean.push_back(soft.embeddings.back()[0]);
    }
    return soft;
  };
  if (catalog.size() != dataset.class_names.size()) {
    throw DomainError("zero_shot_baseline: catalog does not cover the dataset");
  }
  EvalReport report;
  report.base_acc = split_accuracy(dataset.base_classes, soft_for(dataset.base_classes), encoder,
                                   dataset, tau, 1, &report.per_class);
  report.novel_acc = split_accuracy(dataset.novel_classes, soft_for(dataset.novel_classes),
                                    encoder, dataset, tau, 1, &report.per_class);
  report.harmonic_mean = harmonic_mean(report.base_acc, report.novel_acc);
  return report;
}

}  // namespace msgcoop
