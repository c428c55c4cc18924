#include "msgcoop/descriptions.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "httplib.h"

namespace msgcoop {

namespace {

std::size_t count_occurrences(const std::string& text, const std::string& needle) {
  std::size_t count = 0;
  for (std::size_t pos = text.find(needle); pos != std::string::npos;
       pos = text.find(needle, pos + needle.size())) {
    ++count;
  }
  return count;
}

std::string replace_once(std::string text, const std::string& needle, const std::string& value) {
  const std::size_t pos = text.find(needle);
  text.replace(pos, needle.size(), value);
  return text;
}

json load_json_file(const std::string& path, const std::string& what) {
  std::ifstream in(path);
  if (!in) throw DomainError(what + ": cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DomainError(what + ": invalid JSON in " + path + " (" + e.what() + ")");
  }
  return j;
}

}  // namespace

const std::array<std::string, 5>& description_templates() {
  static const std::array<std::string, 5> templates = {
      "What does [CLASS] look like among all [CATEGORY]?",
      "What visual cue is unique to [CLASS] among all [CATEGORY]?",
      "What are the distinct features of [CLASS] for recognition among all [CATEGORY]?",
      "How can you identify [CLASS] in appearance among all [CATEGORY]?",
      "What are the differences between [CLASS] and other [CATEGORY] in appearance?",
  };
  return templates;
}

DescriptionRequest::DescriptionRequest(std::string cls, std::string cat)
    : class_name(std::move(cls)),
      category(std::move(cat)),
      templates(description_templates().begin(), description_templates().end()) {}

std::vector<std::string> instantiate_templates(const DescriptionRequest& request) {
  std::vector<std::string> prompts;
  prompts.reserve(request.templates.size());
  for (const auto& tmpl : request.templates) {
    if (count_occurrences(tmpl, "[CLASS]") != 1 || count_occurrences(tmpl, "[CATEGORY]") != 1) {
      throw DomainError("template must contain [CLASS] and [CATEGORY] exactly once: " + tmpl);
    }
    std::string prompt = replace_once(tmpl, "[CLASS]", request.class_name);
    prompt = replace_once(prompt, "[CATEGORY]", request.category);
    prompts.push_back(std::move(prompt));
  }
  return prompts;
}

std::string truncate_words(const std::string& text, int max_words) {
  std::istringstream in(text);
  std::string word, out;
  int kept = 0;
  while (kept < max_words && in >> word) {
    if (kept > 0) out += ' ';
    out += word;
    ++kept;
  }
  return out;
}

FixtureClient::FixtureClient(json fixtures) : fixtures_(std::move(fixtures)) {
  if (!fixtures_.contains("classes")) throw DomainError("fixtures: missing 'classes' object");
}

FixtureClient FixtureClient::from_file(const std::string& path) {
  return FixtureClient(load_json_file(path, "fixtures"));
}

std::string FixtureClient::complete(const std::string&, const std::string&,
                                    const std::string& class_name, std::size_t template_index,
                                    std::size_t sample_index) {
  const auto& classes = fixtures_.at("classes");
  if (!classes.contains(class_name)) {
    throw DomainError("fixtures: no entry for class '" + class_name + "'");
  }
  const auto& per_template = classes.at(class_name);
  if (template_index >= per_template.size() ||
      sample_index >= per_template.at(template_index).size()) {
    throw DomainError("fixtures: missing response for class '" + class_name + "', template " +
                      std::to_string(template_index) + ", sample " +
                      std::to_string(sample_index));
  }
  return per_template.at(template_index).at(sample_index).get<std::string>();
}

std::string description_system_prompt(int max_words) {
  return "You are an expert in visual feature analysis. Answer with a single sentence of at most " +
         std::to_string(max_words) + " words.";
}

HttpLlmClient::HttpLlmClient(HttpClientConfig config) : config_(std::move(config)) {
  if (config_.url.empty()) throw DomainError("llm client: endpoint URL is empty");
}

std::string HttpLlmClient::complete(const std::string& system_prompt,
                                    const std::string& user_prompt, const std::string& class_name,
                                    std::size_t template_index, std::size_t sample_index) {
  // Split scheme://host[:port] from the path.
  const std::size_t scheme_end = config_.url.find("://");
  if (scheme_end == std::string::npos) throw DomainError("llm client: bad URL " + config_.url);
  const std::size_t path_start = config_.url.find('/', scheme_end + 3);
  const std::string base =
      path_start == std::string::npos ? config_.url : config_.url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : config_.url.substr(path_start);

  json body;
  body["model"] = config_.model;
  body["messages"] = json::array({json{{"role", "system"}, {"content", system_prompt}},
                                  json{{"role", "user"}, {"content", user_prompt}}});
  const std::string payload = body.dump();

  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(
          std::chrono::milliseconds(config_.backoff_initial_ms << (attempt - 1)));
    }
    httplib::Client client(base);
    client.set_connection_timeout(10);
    client.set_read_timeout(60);
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
    const auto res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    json parsed;
    try {
      parsed = json::parse(res->body);
    } catch (const json::exception& e) {
      last_error = std::string("bad response JSON: ") + e.what();
      continue;
    }
    std::string content;
    try {
      content = parsed.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
      last_error = "response missing choices[0].message.content";
      continue;
    }

    if (!config_.cassette_path.empty()) {
      std::ofstream cassette(config_.cassette_path, std::ios::app);
      json entry;
      entry["class"] = class_name;
      entry["template_index"] = template_index;
      entry["sample_index"] = sample_index;
      entry["request"] = body;
      entry["response"] = parsed;
      cassette << entry.dump() << '\n';
    }
    return content;
  }
  throw DomainError("llm client: request failed after " + std::to_string(config_.max_retries + 1) +
                    " attempts (" + last_error + ")");
}

std::vector<std::string> fetch_descriptions(const DescriptionRequest& request, LlmClient& client) {
  if (request.samples_per_template < 1) {
    throw DomainError("fetch_descriptions: samples_per_template must be at least 1");
  }
  const auto prompts = instantiate_templates(request);
  const std::string system_prompt = description_system_prompt(request.max_words);
  std::vector<std::string> raw;
  raw.reserve(prompts.size() * static_cast<std::size_t>(request.samples_per_template));
  for (std::size_t t = 0; t < prompts.size(); ++t) {
    for (std::size_t s = 0; s < static_cast<std::size_t>(request.samples_per_template); ++s) {
      std::string response =
          client.complete(system_prompt, prompts[t], request.class_name, t, s);
      response = truncate_words(response, request.max_words);
      if (response.empty()) {
        throw DomainError("fetch_descriptions: empty response for class '" + request.class_name +
                          "', template " + std::to_string(t));
      }
      raw.push_back(std::move(response));
    }
  }
  return raw;
}

json cassette_to_fixtures(const std::string& cassette_path) {
  std::ifstream in(cassette_path);
  if (!in) throw DomainError("cassette: cannot open " + cassette_path);
  json classes = json::object();
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json entry = json::parse(line);
    const auto cls = entry.at("class").get<std::string>();
    const auto t = entry.at("template_index").get<std::size_t>();
    const auto s = entry.at("sample_index").get<std::size_t>();
    const auto content =
        entry.at("response").at("choices").at(0).at("message").at("content").get<std::string>();
    auto& per_template = classes[cls];
    while (per_template.size() <= t) per_template.push_back(json::array());
    auto& samples = per_template.at(t);
    while (samples.size() <= s) samples.push_back("");
    samples.at(s) = content;
  }
  json fixtures;
  fixtures["version"] = "msgcoop-fixtures-v1";
  fixtures["classes"] = std::move(classes);
  return fixtures;
}

FilterResult filter_topk_embedded(const std::vector<Vec>& embeddings, std::size_t k) {
  const std::size_t total = embeddings.size();
  if (total == 0) throw DomainError("filter_topk: no descriptions to filter");

  FilterResult result;
  result.mean_sims.assign(total, 0.0);

  if (total == 1) {
    if (k >= 1) result.selected_indices = {0};
    return result;
  }

  for (std::size_t i = 0; i < total; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < total; ++j) {
      if (j == i) continue;
      sum += cosine_sim(embeddings[i], embeddings[j]);
    }
    result.mean_sims[i] = sum / static_cast<double>(total - 1);
  }

  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (result.mean_sims[a] != result.mean_sims[b]) {
      return result.mean_sims[a] > result.mean_sims[b];
    }
    return a < b;
  });
  const std::size_t keep = std::min(k, total);
  result.selected_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep));
  return result;
}

FilterResult filter_topk(const std::vector<std::string>& raw, std::size_t k,
                         const Tokenizer& tokenizer, const FrozenEncoder& encoder) {
  std::vector<Vec> embeddings;
  embeddings.reserve(raw.size());
  for (const auto& text : raw) {
    embeddings.push_back(encoder.encode_text(encoder.embed_tokens(tokenizer.tokenize(text))));
  }
  FilterResult result = filter_topk_embedded(embeddings, k);
  result.selected.reserve(result.selected_indices.size());
  for (const std::size_t idx : result.selected_indices) result.selected.push_back(raw[idx]);
  return result;
}

Vec semantic_reference(const std::vector<std::string>& selected, const Tokenizer& tokenizer,
                       const FrozenEncoder& encoder) {
  if (selected.empty()) throw DomainError("semantic_reference: no descriptions selected");
  Vec mean(encoder.dims().embed, 0.0);
  for (const auto& text : selected) {
    const Vec embedding = encoder.encode_text(encoder.embed_tokens(tokenizer.tokenize(text)));
    for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += embedding[c];
  }
  for (double& x : mean) x /= static_cast<double>(selected.size());
  return mean;
}

Vec handcrafted_reference(const std::string& class_name, const std::string& reference_template,
                          const Tokenizer& tokenizer, const FrozenEncoder& encoder) {
  if (count_occurrences(reference_template, "{cls}") != 1) {
    throw DomainError("handcrafted reference template must contain {cls} exactly once: " +
                      reference_template);
  }
  const std::string text = replace_once(reference_template, "{cls}", class_name);
  return encoder.encode_text(encoder.embed_tokens(tokenizer.tokenize(text)));
}

json DescriptionSet::to_json() const {
  json j;
  j["class"] = class_name;
  j["category"] = category;
  j["raw"] = raw;
  j["selected"] = selected;
  j["mean_sims"] = mean_sims;
  return j;
}

DescriptionSet DescriptionSet::from_json(const json& j) {
  DescriptionSet set;
  set.class_name = j.at("class").get<std::string>();
  set.category = j.at("category").get<std::string>();
  set.raw = j.at("raw").get<std::vector<std::string>>();
  set.selected = j.value("selected", std::vector<std::string>{});
  set.mean_sims = j.value("mean_sims", std::vector<double>{});
  return set;
}

std::vector<DescriptionSet> load_description_sets(const std::string& path) {
  const json j = load_json_file(path, "descriptions");
  if (!j.is_array()) throw DomainError("descriptions: expected a JSON array in " + path);
  std::vector<DescriptionSet> sets;
  sets.reserve(j.size());
  for (const auto& item : j) sets.push_back(DescriptionSet::from_json(item));
  return sets;
}

void save_description_sets(const std::vector<DescriptionSet>& sets, const std::string& path) {
  json j = json::array();
  for (const auto& set : sets) j.push_back(set.to_json());
  std::ofstream out(path);
  if (!out) throw DomainError("descriptions: cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace msgcoop
