#include "msgcoop/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "msgcoop/descriptions.hpp"
#include "msgcoop/trainer.hpp"

using namespace msgcoop;

namespace {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "msgcoop");
  std::vector<char*> argv;
  for (auto& arg : args) argv.push_back(arg.data());

  std::ostringstream captured_out, captured_err;
  auto* old_out = std::cout.rdbuf(captured_out.rdbuf());
  auto* old_err = std::cerr.rdbuf(captured_err.rdbuf());
  const int code = run_cli(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  return {code, captured_out.str(), captured_err.str()};
}

struct TempDir {
  std::filesystem::path path;
  TempDir() : path(std::filesystem::temp_directory_path() / "msgcoop_cli_test") {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string write_tiny_config(const TempDir& dir) {
  TrainConfig cfg;
  cfg.n_prompts = 2;
  cfg.ctx_len = 4;
  cfg.vocab = 512;
  cfg.token_dim = 8;
  cfg.hidden_dim = 16;
  cfg.embed_dim = 16;
  cfg.image_dim = 16;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  cfg.shots = 3;
  cfg.test_per_class = 4;
  cfg.n_classes = 4;
  cfg.k_descriptions = 3;
  const std::string path = dir.file("tiny.cfg");
  cfg.save(path);
  return path;
}

}  // namespace

TEST_CASE("cli rejects missing and unknown verbs") {
  CHECK(run({}).code == 2);
  CHECK(run({"dance"}).code == 2);
  CHECK(run({"train", "--no-such-flag", "1"}).code == 2);
}

TEST_CASE("cli help exits cleanly") {
  const auto result = run({"--help"});
  CHECK(result.code == 0);
}

TEST_CASE("cli gradcheck passes at the default tolerance") {
  const auto result = run({"gradcheck", "--seed", "7"});
  CHECK(result.code == 0);
  CHECK(result.out.find("max_rel_error=") != std::string::npos);
}

TEST_CASE("cli train validates flag values") {
  CHECK(run({"train", "--lr", "-1"}).code == 2);
  const auto result = run({"train", "--lr", "-1"});
  CHECK(result.err.find("lr") != std::string::npos);
  CHECK(run({"train", "--guidance", "psychic"}).code == 2);
}

TEST_CASE("cli train, eval and resume round-trip") {
  TempDir dir;
  const std::string config = write_tiny_config(dir);
  const std::string ckpt = dir.file("ckpt.json");
  const std::string metrics = dir.file("metrics.csv");
  const std::string dataset = dir.file("dataset.json");

  const auto trained = run({"train", "--config", config, "--out", ckpt, "--metrics", metrics,
                            "--dump-dataset", dataset});
  CHECK(trained.code == 0);
  CHECK(std::filesystem::exists(ckpt));
  CHECK(std::filesystem::exists(metrics));
  CHECK(std::filesystem::exists(dataset));
  CHECK(trained.out.find("\"epochs\":3") != std::string::npos);

  std::ifstream metrics_in(metrics);
  std::string header;
  std::getline(metrics_in, header);
  CHECK(header == "epoch,l_ce,l_sg,l_div,l_total");

  const std::string report = dir.file("report.json");
  const auto evaluated =
      run({"eval", "--checkpoint", ckpt, "--dataset", dataset, "--out", report});
  CHECK(evaluated.code == 0);
  CHECK(std::filesystem::exists(report));
  CHECK(evaluated.out.find("\"hm\":") != std::string::npos);

  // Extending the run through --resume matches a longer uninterrupted run.
  const std::string ckpt6 = dir.file("ckpt6.json");
  const auto resumed =
      run({"train", "--resume", ckpt, "--epochs", "6", "--out", ckpt6, "--dataset", dataset});
  CHECK(resumed.code == 0);
  const std::string full6 = dir.file("full6.json");
  const auto direct = run({"train", "--config", config, "--epochs", "6", "--out", full6,
                           "--dataset", dataset});
  CHECK(direct.code == 0);
  std::ifstream a(ckpt6), b(full6);
  const std::string a_text((std::istreambuf_iterator<char>(a)), {});
  const std::string b_text((std::istreambuf_iterator<char>(b)), {});
  CHECK(a_text == b_text);

  // Changing a fingerprinted key at resume time is a domain error.
  const auto mismatched = run({"train", "--resume", ckpt, "--epochs", "6", "--lambda_div", "9",
                               "--dataset", dataset, "--out", dir.file("bad.json")});
  CHECK(mismatched.code == 1);
  CHECK(mismatched.err.find("fingerprint") != std::string::npos);
}

TEST_CASE("cli zero-shot eval needs no checkpoint") {
  TempDir dir;
  const std::string config = write_tiny_config(dir);
  const auto result = run({"eval", "--zero-shot", "--config", config});
  CHECK(result.code == 0);
  CHECK(result.out.find("\"base\":") != std::string::npos);

  CHECK(run({"eval", "--config", config}).code == 2);
}

TEST_CASE("cli description pipeline runs offline") {
  TempDir dir;
  const std::string classes = dir.file("classes.txt");
  {
    std::ofstream out(classes);
    out << "# two pets\nbeagle\nhusky\n";
  }
  const std::string fixtures = dir.file("fixtures.json");
  {
    json per_template = json::array();
    for (int t = 0; t < 5; ++t) {
      per_template.push_back(json::array({"glossy coat with t" + std::to_string(t),
                                          "narrow snout and t" + std::to_string(t)}));
    }
    json fx;
    fx["version"] = "msgcoop-fixtures-v1";
    fx["classes"] = json{{"beagle", per_template}, {"husky", per_template}};
    std::ofstream out(fixtures);
    out << fx.dump(2);
  }

  const std::string raw = dir.file("raw.json");
  const auto generated = run({"generate-descriptions", "--classes", classes, "--category",
                              "types of pets", "--out", raw, "--offline-fixtures", fixtures});
  CHECK(generated.code == 0);
  const auto raw_sets = load_description_sets(raw);
  REQUIRE(raw_sets.size() == 2);
  CHECK(raw_sets[0].raw.size() == 10);
  CHECK(raw_sets[0].selected.empty());

  const std::string filtered = dir.file("filtered.json");
  const auto filter_run = run({"filter", "--in", raw, "--k", "4", "--out", filtered});
  CHECK(filter_run.code == 0);
  const auto filtered_sets = load_description_sets(filtered);
  REQUIRE(filtered_sets.size() == 2);
  CHECK(filtered_sets[0].selected.size() == 4);
  CHECK(filtered_sets[0].mean_sims.size() == 10);

  // Filtered descriptions feed training under llm guidance.
  const std::string config = write_tiny_config(dir);
  CHECK(run({"filter", "--in", raw, "--k", "0", "--out", filtered}).code == 2);

  const auto missing = run({"generate-descriptions", "--classes", classes, "--category", "x",
                            "--out", raw});
  CHECK(missing.code == 1);  // no fixtures and no endpoint configured

  // Offline mode is byte-deterministic.
  const std::string raw2 = dir.file("raw2.json");
  const std::string filtered2 = dir.file("filtered2.json");
  CHECK(run({"generate-descriptions", "--classes", classes, "--category", "types of pets",
             "--out", raw2, "--offline-fixtures", fixtures})
            .code == 0);
  CHECK(run({"filter", "--in", raw2, "--k", "4", "--out", filtered2}).code == 0);
  const auto slurp = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), {});
  };
  CHECK(slurp(raw) == slurp(raw2));
  const std::string refiltered = dir.file("refiltered.json");
  CHECK(run({"filter", "--in", raw, "--k", "4", "--out", refiltered}).code == 0);
  CHECK(slurp(refiltered) == slurp(filtered2));
}

TEST_CASE("cli ablate writes csv and svg") {
  TempDir dir;
  const std::string config = write_tiny_config(dir);
  const std::string out_dir = dir.file("sweeps");
  const auto result = run({"ablate", "--config", config, "--axis", "N", "--values", "1,2",
                           "--out-dir", out_dir});
  CHECK(result.code == 0);
  CHECK(std::filesystem::exists(out_dir + "/ablate_N.csv"));
  CHECK(std::filesystem::exists(out_dir + "/ablate_N.svg"));
  CHECK(result.out.find("\"diversity_disabled_values\":[\"1\"]") != std::string::npos);

  CHECK(run({"ablate", "--config", config, "--axis", "Q", "--values", "1"}).code == 2);
}
