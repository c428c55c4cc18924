#include "msgcoop/descriptions.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "msgcoop/rng.hpp"

using namespace msgcoop;

namespace {

struct Fixture {
  Tokenizer tokenizer{4096, 11};
  FrozenEncoder encoder{EncoderDims{4096, 8, 16, 16, 16}, 11};
};

json make_fixture_json(const std::string& cls, std::size_t samples_per_template,
                       const std::string& stem) {
  json per_template = json::array();
  for (std::size_t t = 0; t < 5; ++t) {
    json samples = json::array();
    for (std::size_t s = 0; s < samples_per_template; ++s) {
      samples.push_back(stem + " t" + std::to_string(t) + " s" + std::to_string(s));
    }
    per_template.push_back(samples);
  }
  json fixtures;
  fixtures["version"] = "msgcoop-fixtures-v1";
  fixtures["classes"] = json{{cls, per_template}};
  return fixtures;
}

std::string random_sentence(SplitMix64& rng) {
  static const std::vector<std::string> pool = {
      "small", "large",  "striped", "spotted", "glossy", "matte",  "round", "angular",
      "crest", "plume",  "ears",    "tail",    "bright", "dull",   "wing",  "snout",
      "fur",   "scales", "beak",    "paws",    "ridged", "smooth", "long",  "short"};
  std::string out = "a";
  const std::size_t words = 4 + rng.below(8);
  for (std::size_t i = 0; i < words; ++i) out += " " + pool[rng.below(pool.size())];
  return out;
}

// Independent scoring: explicit double loop, then selection sort.
std::pair<std::vector<std::size_t>, std::vector<double>> brute_force_filter(
    const std::vector<std::string>& raw, std::size_t k, const Tokenizer& tokenizer,
    const FrozenEncoder& encoder) {
  const std::size_t total = raw.size();
  std::vector<Vec> emb;
  for (const auto& text : raw) {
    emb.push_back(encoder.encode_text(encoder.embed_tokens(tokenizer.tokenize(text))));
  }
  std::vector<double> means(total, 0.0);
  if (total > 1) {
    for (std::size_t i = 0; i < total; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < total; ++j) {
        if (i != j) sum += cosine_sim(emb[i], emb[j]);
      }
      means[i] = sum / static_cast<double>(total - 1);
    }
  }
  std::vector<std::size_t> remaining(total);
  for (std::size_t i = 0; i < total; ++i) remaining[i] = i;
  std::vector<std::size_t> picked;
  while (picked.size() < std::min(k, total)) {
    std::size_t best = 0;
    for (std::size_t pos = 1; pos < remaining.size(); ++pos) {
      if (means[remaining[pos]] > means[remaining[best]]) best = pos;
    }
    picked.push_back(remaining[best]);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return {picked, means};
}

}  // namespace

TEST_CASE("instantiate_templates substitutes both placeholders") {
  DescriptionRequest req("beagle", "types of pets");
  const auto prompts = instantiate_templates(req);
  REQUIRE(prompts.size() == 5);
  CHECK(prompts[0] == "What does beagle look like among all types of pets?");
  CHECK(prompts[1] == "What visual cue is unique to beagle among all types of pets?");

  DescriptionRequest spaced("maine coon cat", "types of pets");
  const auto spaced_prompts = instantiate_templates(spaced);
  CHECK(spaced_prompts[0] == "What does maine coon cat look like among all types of pets?");

  DescriptionRequest bad("x", "y");
  bad.templates = {"no placeholders here"};
  CHECK_THROWS_AS(instantiate_templates(bad), DomainError);
  bad.templates = {"[CLASS] [CLASS] among [CATEGORY]"};
  CHECK_THROWS_AS(instantiate_templates(bad), DomainError);
}

TEST_CASE("truncate_words caps at the word limit") {
  std::string long_text;
  for (int i = 0; i < 25; ++i) long_text += "w" + std::to_string(i) + " ";
  const std::string cut = truncate_words(long_text, 20);
  std::size_t words = 1;
  for (const char ch : cut) words += ch == ' ' ? 1 : 0;
  CHECK(words == 20);
  CHECK(cut.substr(0, 5) == "w0 w1");
  CHECK(truncate_words("short sentence", 20) == "short sentence");
}

TEST_CASE("fetch_descriptions reads fixtures in template-major order") {
  FixtureClient client(make_fixture_json("beagle", 1, "desc"));
  DescriptionRequest req("beagle", "types of pets");
  req.samples_per_template = 1;
  const auto raw = fetch_descriptions(req, client);
  REQUIRE(raw.size() == 5);
  for (std::size_t t = 0; t < 5; ++t) CHECK(raw[t] == "desc t" + std::to_string(t) + " s0");
}

TEST_CASE("fetch_descriptions truncates long fixture lines") {
  std::string long_line;
  for (int i = 0; i < 25; ++i) long_line += "word" + std::to_string(i) + " ";
  json fixtures = make_fixture_json("beagle", 1, "x");
  fixtures["classes"]["beagle"][2][0] = long_line;
  FixtureClient client(fixtures);
  DescriptionRequest req("beagle", "types of pets");
  req.samples_per_template = 1;
  const auto raw = fetch_descriptions(req, client);
  std::size_t words = 1;
  for (const char ch : raw[2]) words += ch == ' ' ? 1 : 0;
  CHECK(words == 20);
}

TEST_CASE("fetch_descriptions errors on missing fixtures and empty responses") {
  FixtureClient client(make_fixture_json("beagle", 1, "desc"));
  DescriptionRequest other("husky", "types of pets");
  other.samples_per_template = 1;
  CHECK_THROWS_AS(fetch_descriptions(other, client), DomainError);

  DescriptionRequest too_many("beagle", "types of pets");
  too_many.samples_per_template = 2;
  CHECK_THROWS_AS(fetch_descriptions(too_many, client), DomainError);

  json fixtures = make_fixture_json("beagle", 1, "x");
  fixtures["classes"]["beagle"][0][0] = "   ";
  FixtureClient blank(fixtures);
  DescriptionRequest req("beagle", "types of pets");
  req.samples_per_template = 1;
  CHECK_THROWS_AS(fetch_descriptions(req, blank), DomainError);
}

TEST_CASE("filter scoring matches hand-computed means on prescribed cosines") {
  // Unit vectors with cos(1,2)=0.9, cos(1,3)=0.1, cos(2,3)=0.2.
  const double y = 0.11 / std::sqrt(0.19);
  const Vec w1 = {1.0, 0.0, 0.0};
  const Vec w2 = {0.9, std::sqrt(0.19), 0.0};
  const Vec w3 = {0.1, y, std::sqrt(1.0 - 0.01 - y * y)};
  const auto result = filter_topk_embedded({w1, w2, w3}, 2);

  CHECK(result.mean_sims[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(result.mean_sims[1] == doctest::Approx(0.55).epsilon(1e-12));
  CHECK(result.mean_sims[2] == doctest::Approx(0.15).epsilon(1e-12));
  REQUIRE(result.selected_indices.size() == 2);
  CHECK(result.selected_indices[0] == 1);
  CHECK(result.selected_indices[1] == 0);
}

TEST_CASE("identical descriptions tie-break by original index") {
  Fixture fx;
  const std::vector<std::string> raw(5, "same words every time");
  const auto result = filter_topk(raw, 3, fx.tokenizer, fx.encoder);
  CHECK(result.selected_indices == std::vector<std::size_t>{0, 1, 2});
  for (std::size_t i = 1; i < 5; ++i) CHECK(result.mean_sims[i] == result.mean_sims[0]);
}

TEST_CASE("filter_topk equals the brute-force oracle on random sets") {
  Fixture fx;
  SplitMix64 rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t total = 1 + rng.below(8);
    const std::size_t k = 1 + rng.below(total);
    std::vector<std::string> raw;
    for (std::size_t i = 0; i < total; ++i) raw.push_back(random_sentence(rng));

    const auto got = filter_topk(raw, k, fx.tokenizer, fx.encoder);
    const auto [expected_indices, expected_means] =
        brute_force_filter(raw, k, fx.tokenizer, fx.encoder);
    CHECK(got.selected_indices == expected_indices);
    for (std::size_t i = 0; i < total; ++i) {
      CHECK(got.mean_sims[i] == doctest::Approx(expected_means[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("filter_topk with k = K keeps everything") {
  Fixture fx;
  SplitMix64 rng(32);
  std::vector<std::string> raw;
  for (int i = 0; i < 6; ++i) raw.push_back(random_sentence(rng));
  const auto result = filter_topk(raw, raw.size(), fx.tokenizer, fx.encoder);
  CHECK(result.selected_indices.size() == raw.size());
  std::vector<std::string> sorted_selected = result.selected;
  std::vector<std::string> sorted_raw = raw;
  std::sort(sorted_selected.begin(), sorted_selected.end());
  std::sort(sorted_raw.begin(), sorted_raw.end());
  CHECK(sorted_selected == sorted_raw);
}

TEST_CASE("filter_topk is permutation consistent") {
  Fixture fx;
  SplitMix64 rng(33);
  std::vector<std::string> raw;
  for (int i = 0; i < 6; ++i) raw.push_back(random_sentence(rng));
  const auto base = filter_topk(raw, 3, fx.tokenizer, fx.encoder);

  // Rotate by two.
  std::vector<std::string> rotated(raw.begin() + 2, raw.end());
  rotated.insert(rotated.end(), raw.begin(), raw.begin() + 2);
  const auto rot = filter_topk(rotated, 3, fx.tokenizer, fx.encoder);

  for (std::size_t i = 0; i < raw.size(); ++i) {
    const std::size_t j = (i + raw.size() - 2) % raw.size();
    CHECK(rot.mean_sims[j] == doctest::Approx(base.mean_sims[i]).epsilon(1e-12));
  }
  std::vector<std::string> a = base.selected;
  std::vector<std::string> b = rot.selected;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  CHECK(a == b);
}

TEST_CASE("filter_topk single description") {
  Fixture fx;
  const auto result = filter_topk({"only one"}, 4, fx.tokenizer, fx.encoder);
  CHECK(result.selected == std::vector<std::string>{"only one"});
  CHECK(result.mean_sims == std::vector<double>{0.0});
}

TEST_CASE("semantic_reference is the plain mean of unit embeddings") {
  Fixture fx;
  const std::vector<std::string> selected = {"glossy black feathers", "a narrow ridged beak"};
  const Vec ref = semantic_reference(selected, fx.tokenizer, fx.encoder);

  const Vec e1 = fx.encoder.encode_text(
      fx.encoder.embed_tokens(fx.tokenizer.tokenize(selected[0])));
  const Vec e2 = fx.encoder.encode_text(
      fx.encoder.embed_tokens(fx.tokenizer.tokenize(selected[1])));
  for (std::size_t c = 0; c < ref.size(); ++c) {
    CHECK(ref[c] == doctest::Approx((e1[c] + e2[c]) / 2.0).epsilon(1e-14));
  }
  // ||mean||^2 = (1 + cos) / 2 for two unit vectors.
  const double expected_norm = std::sqrt((1.0 + cosine_sim(e1, e2)) / 2.0);
  CHECK(norm2(ref) == doctest::Approx(expected_norm).epsilon(1e-12));
  CHECK(norm2(ref) <= 1.0 + 1e-12);

  const Vec single = semantic_reference({selected[0]}, fx.tokenizer, fx.encoder);
  CHECK(single == e1);
  const Vec twice = semantic_reference({selected[0], selected[0]}, fx.tokenizer, fx.encoder);
  for (std::size_t c = 0; c < twice.size(); ++c) {
    CHECK(twice[c] == doctest::Approx(e1[c]).epsilon(1e-15));
  }
  CHECK_THROWS_AS(semantic_reference({}, fx.tokenizer, fx.encoder), DomainError);
}

TEST_CASE("semantic_reference norm never exceeds one") {
  Fixture fx;
  SplitMix64 rng(34);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::string> selected;
    const std::size_t count = 1 + rng.below(6);
    for (std::size_t i = 0; i < count; ++i) selected.push_back(random_sentence(rng));
    CHECK(norm2(semantic_reference(selected, fx.tokenizer, fx.encoder)) <= 1.0 + 1e-12);
  }
}

TEST_CASE("handcrafted_reference substitutes the class name") {
  Fixture fx;
  const Vec ref = handcrafted_reference("beagle", "a photo of {cls}", fx.tokenizer, fx.encoder);
  const Vec direct = fx.encoder.encode_text(
      fx.encoder.embed_tokens(fx.tokenizer.tokenize("a photo of beagle")));
  CHECK(ref == direct);
  CHECK(std::abs(norm2(ref) - 1.0) <= 1e-12);
  CHECK(ref == handcrafted_reference("beagle", "a photo of {cls}", fx.tokenizer, fx.encoder));
  CHECK_THROWS_AS(handcrafted_reference("beagle", "a photo of", fx.tokenizer, fx.encoder),
                  DomainError);
}

TEST_CASE("description sets round-trip through files") {
  const std::string path = "test_descriptions_roundtrip.json";
  std::vector<DescriptionSet> sets(2);
  sets[0] = {"beagle", "types of pets", {"r1", "r2"}, {"r2"}, {0.1, 0.4}};
  sets[1] = {"husky", "types of pets", {"h1"}, {"h1"}, {0.0}};
  save_description_sets(sets, path);
  const auto loaded = load_description_sets(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].class_name == "beagle");
  CHECK(loaded[0].selected == std::vector<std::string>{"r2"});
  CHECK(loaded[1].mean_sims == std::vector<double>{0.0});
  std::filesystem::remove(path);
}

TEST_CASE("http client round trip against a local endpoint") {
  std::atomic<int> failures_left{1};
  std::string seen_body;
  httplib::Server server;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    if (failures_left.fetch_sub(1) > 0) {
      res.status = 500;
      return;
    }
    seen_body = req.body;
    const json body = json::parse(req.body);
    json reply;
    reply["choices"] = json::array(
        {json{{"message", json{{"content", "echo: " + body.at("messages").at(1).at("content")
                                                          .get<std::string>()}}}}});
    res.set_content(reply.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  const std::string cassette = "test_cassette.jsonl";
  std::filesystem::remove(cassette);
  HttpClientConfig config;
  config.url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  config.api_key = "test-key";
  config.backoff_initial_ms = 1;
  config.cassette_path = cassette;
  HttpLlmClient client(config);

  DescriptionRequest req("beagle", "types of pets");
  req.samples_per_template = 1;
  const auto raw = fetch_descriptions(req, client);
  REQUIRE(raw.size() == 5);
  CHECK(raw[0] == "echo: What does beagle look like among all types of pets?");

  // The request body carries the instantiated template verbatim plus the
  // system prompt naming the expert role.
  const json body = json::parse(seen_body);
  CHECK(body.at("messages").at(1).at("content").get<std::string>() ==
        "What are the differences between beagle and other types of pets in appearance?");
  CHECK(body.at("messages").at(0).at("content").get<std::string>().find(
            "expert in visual feature analysis") != std::string::npos);
  CHECK(body.at("model").get<std::string>() == "gpt-4");

  // Cassette replays into fixtures that reproduce the same responses offline.
  const json fixtures = cassette_to_fixtures(cassette);
  FixtureClient replay(fixtures);
  const auto offline = fetch_descriptions(req, replay);
  CHECK(offline == raw);

  server.stop();
  server_thread.join();
  std::filesystem::remove(cassette);
}

TEST_CASE("http client gives up after exhausting retries") {
  httplib::Server server;
  server.Post("/v1/chat/completions", [](const httplib::Request&, httplib::Response& res) {
    res.status = 503;
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  HttpClientConfig config;
  config.url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  config.max_retries = 2;
  config.backoff_initial_ms = 1;
  HttpLlmClient client(config);
  CHECK_THROWS_AS(client.complete("s", "u", "beagle", 0, 0), DomainError);

  server.stop();
  server_thread.join();
}
