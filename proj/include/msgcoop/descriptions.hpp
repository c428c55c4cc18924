#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "msgcoop/encoder.hpp"
#include "msgcoop/numeric.hpp"

namespace msgcoop {

// The five complementary question templates instantiated per class. Each must
// contain [CLASS] and [CATEGORY] exactly once.
const std::array<std::string, 5>& description_templates();

inline constexpr int kDescriptionMaxWords = 20;

struct DescriptionRequest {
  std::string class_name;
  std::string category;                  // dataset super-category, e.g. "types of pets"
  std::vector<std::string> templates;    // defaults to description_templates()
  int max_words = kDescriptionMaxWords;
  int samples_per_template = 2;

  DescriptionRequest(std::string cls, std::string cat);
};

std::vector<std::string> instantiate_templates(const DescriptionRequest& request);

// First max_words whitespace-separated words, rejoined with single spaces.
std::string truncate_words(const std::string& text, int max_words);

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string complete(const std::string& system_prompt, const std::string& user_prompt,
                               const std::string& class_name, std::size_t template_index,
                               std::size_t sample_index) = 0;
};

// Offline client reading canned responses keyed by (class, template index,
// sample index). Fixture layout:
//   {"version": "msgcoop-fixtures-v1",
//    "classes": {"<name>": [[s00, s01, ...], ... one array per template]}}
class FixtureClient : public LlmClient {
 public:
  explicit FixtureClient(json fixtures);
  static FixtureClient from_file(const std::string& path);

  std::string complete(const std::string& system_prompt, const std::string& user_prompt,
                       const std::string& class_name, std::size_t template_index,
                       std::size_t sample_index) override;

 private:
  json fixtures_;
};

struct HttpClientConfig {
  std::string url;            // full endpoint, e.g. http://host:port/v1/chat/completions
  std::string api_key;        // sent as a bearer token when non-empty
  std::string model = "gpt-4";
  int max_retries = 3;
  int backoff_initial_ms = 200;
  std::string cassette_path;  // when non-empty, request/response pairs append here as JSONL
};

// Chat-completion client with exponential backoff. Every exchange can be
// recorded to a cassette for later replay as fixtures.
class HttpLlmClient : public LlmClient {
 public:
  explicit HttpLlmClient(HttpClientConfig config);

  std::string complete(const std::string& system_prompt, const std::string& user_prompt,
                       const std::string& class_name, std::size_t template_index,
                       std::size_t sample_index) override;

 private:
  HttpClientConfig config_;
};

// System prompt used for live generation.
std::string description_system_prompt(int max_words);

// K = templates x samples_per_template responses, template-major order, each
// truncated to max_words. Empty responses are an error.
std::vector<std::string> fetch_descriptions(const DescriptionRequest& request, LlmClient& client);

// Rebuilds a fixture JSON from a cassette recorded by HttpLlmClient.
json cassette_to_fixtures(const std::string& cassette_path);

struct FilterResult {
  std::vector<std::string> selected;
  std::vector<std::size_t> selected_indices;  // into the raw list, rank order
  std::vector<double> mean_sims;              // one per raw description
};

// Mean pairwise cosine of text-encoder embeddings; keeps the min(k, K)
// descriptions with the highest mean similarity, ties to the lower index.
// A single raw description is kept with its mean defined as 0.
FilterResult filter_topk(const std::vector<std::string>& raw, std::size_t k,
                         const Tokenizer& tokenizer, const FrozenEncoder& encoder);

// Scoring core over already-encoded descriptions; `selected` is left empty.
FilterResult filter_topk_embedded(const std::vector<Vec>& embeddings, std::size_t k);

// Plain mean of the selected descriptions' unit embeddings; not re-normalized.
Vec semantic_reference(const std::vector<std::string>& selected, const Tokenizer& tokenizer,
                       const FrozenEncoder& encoder);

// Reference from a fixed template such as "a photo of {cls}".
Vec handcrafted_reference(const std::string& class_name, const std::string& reference_template,
                          const Tokenizer& tokenizer, const FrozenEncoder& encoder);

struct DescriptionSet {
  std::string class_name;
  std::string category;
  std::vector<std::string> raw;
  std::vector<std::string> selected;
  std::vector<double> mean_sims;

  json to_json() const;
  static DescriptionSet from_json(const json& j);
};

// File format: a JSON array of per-class objects.
std::vector<DescriptionSet> load_description_sets(const std::string& path);
void save_description_sets(const std::vector<DescriptionSet>& sets, const std::string& path);

}  // namespace msgcoop
