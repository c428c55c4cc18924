// Acceptance suite: every release gate in one binary, one line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "msgcoop/descriptions.hpp"
#include "msgcoop/eval.hpp"
#include "msgcoop/objective.hpp"
#include "msgcoop/plot.hpp"
#include "msgcoop/rng.hpp"
#include "msgcoop/selfcheck.hpp"
#include "msgcoop/trainer.hpp"

using namespace msgcoop;

namespace {

namespace fs = std::filesystem;

struct Criterion {
  std::string name;
  std::function<CheckResult()> fn;
};

double seconds_since(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char line[192];
  std::snprintf(line, sizeof(line), pattern, a, b, c);
  return line;
}

CheckResult criterion_gradient() {
  const auto start = std::chrono::steady_clock::now();
  GradcheckConfig cfg;  // N=3, N_c=4, M=2, d=8, h=16, e=16, B=6, tau=30, 8/1, step 1e-5
  const GradCheckResult result = run_gradcheck(cfg);
  const double elapsed = seconds_since(start);
  const bool ok = result.max_rel_error < 1e-4 && elapsed < 60.0;
  return {"", ok,
          fmt("max rel error %.3e over 48 context coordinates in %.2fs (< 1e-4, < 60s)",
              result.max_rel_error, elapsed)};
}

CheckResult criterion_loss_bounds() {
  CheckResult inner = check_loss_bounds(1000);
  inner.detail += " (l_div in [0,1], l_sg in [0,2], l_ce >= 0)";
  return inner;
}

CheckResult criterion_reductions() { return check_reductions(); }

CheckResult criterion_filter_oracle() { return check_filter_oracle(200); }

CheckResult criterion_harmonic_mean() { return check_harmonic_mean_arithmetic(); }

CheckResult criterion_determinism(const fs::path& dir) {
  TrainConfig cfg = TrainConfig::desk_default();
  const SyntheticDataset dataset = dataset_from_config(cfg);
  bool ok = true;
  std::ostringstream detail;

  // Encoder parameters are byte-identical across a training run.
  const TrainerWorld world = build_world(cfg, dataset, nullptr);
  const std::string enc_before = (dir / "encoder_before.json").string();
  const std::string enc_after = (dir / "encoder_after.json").string();
  {
    std::ofstream out(enc_before);
    out << world.encoder.dump().dump(2) << "\n";
  }
  const Checkpoint run_a = train(cfg, dataset);
  {
    std::ofstream out(enc_after);
    out << world.encoder.dump().dump(2) << "\n";
  }
  if (read_bytes(enc_before) != read_bytes(enc_after)) {
    ok = false;
    detail << "encoder dump changed across training; ";
  }

  // Identical config + seeds give byte-identical checkpoints and reports.
  const Checkpoint run_b = train(cfg, dataset);
  const std::string ckpt_a = (dir / "ckpt_a.json").string();
  const std::string ckpt_b = (dir / "ckpt_b.json").string();
  run_a.save(ckpt_a);
  run_b.save(ckpt_b);
  if (read_bytes(ckpt_a) != read_bytes(ckpt_b)) {
    ok = false;
    detail << "repeat checkpoints differ; ";
  }
  const EvalReport report_a = evaluate(run_a.bank, world.full_catalog, world.encoder, dataset,
                                       cfg.tau);
  const EvalReport report_b = evaluate(run_b.bank, world.full_catalog, world.encoder, dataset,
                                       cfg.tau);
  if (report_a.to_json().dump(2) != report_b.to_json().dump(2)) {
    ok = false;
    detail << "repeat reports differ; ";
  }

  // Train 5 then resume 5 equals train 10.
  TrainConfig ten = cfg;
  ten.epochs = 10;
  TrainConfig five = cfg;
  five.epochs = 5;
  const Checkpoint full = train(ten, dataset);
  const Checkpoint resumed = resume(train(five, dataset), ten, dataset);
  const std::string ckpt_full = (dir / "ckpt_full.json").string();
  const std::string ckpt_resumed = (dir / "ckpt_resumed.json").string();
  full.save(ckpt_full);
  resumed.save(ckpt_resumed);
  if (read_bytes(ckpt_full) != read_bytes(ckpt_resumed)) {
    ok = false;
    detail << "train-5-resume-5 differs from train-10; ";
  }

  return {"", ok,
          ok ? "frozen encoder bytes, repeat-run checkpoints/reports, and split-resume all match"
             : detail.str()};
}

CheckResult criterion_desk_training() {
  const auto start = std::chrono::steady_clock::now();
  const TrainConfig cfg = TrainConfig::desk_default();
  const SyntheticDataset dataset = dataset_from_config(cfg);
  const Checkpoint ckpt = train(cfg, dataset);
  const TrainerWorld world = build_world(cfg, dataset, nullptr);
  const EvalReport report = evaluate(ckpt.bank, world.full_catalog, world.encoder, dataset,
                                     cfg.tau, cfg.threads);
  const double elapsed = seconds_since(start);
  const double ratio = ckpt.history.back().l_total / ckpt.history.front().l_total;
  const bool ok = ratio <= 0.5 && report.base_acc >= 90.0 && elapsed < 300.0;
  return {"", ok,
          fmt("loss ratio %.3f (<= 0.5), base accuracy %.1f%% (>= 90%%), %.1fs (< 300s)", ratio,
              report.base_acc, elapsed)};
}

CheckResult criterion_ablation(const fs::path& dir) {
  const TrainConfig cfg = TrainConfig::desk_default();
  const SyntheticDataset dataset = dataset_from_config(cfg);
  bool ok = true;
  std::ostringstream detail;

  const std::vector<std::pair<std::string, std::vector<std::string>>> sweeps = {
      {"N", {"1", "2", "3", "4", "5", "6"}},
      {"lambda_div", {"0", "0.5", "1", "2", "4", "6", "8"}},
      {"guidance", {"handcrafted", "llm-fixture", "none"}},
  };
  for (const auto& [axis, values] : sweeps) {
    const auto rows = ablate(cfg, axis, values, dataset);
    if (rows.size() != values.size()) {
      ok = false;
      detail << axis << " row count; ";
      continue;
    }
    const std::string csv_path = (dir / ("ablate_" + axis + ".csv")).string();
    std::ofstream(csv_path) << ablation_csv(rows);
    std::vector<std::string> labels;
    std::vector<double> base, novel, hm;
    for (const auto& row : rows) {
      labels.push_back(row.value);
      base.push_back(row.base_acc);
      novel.push_back(row.novel_acc);
      hm.push_back(row.harmonic_mean);
    }
    const std::string svg_path = (dir / ("ablate_" + axis + ".svg")).string();
    if (!write_line_plot_svg(svg_path, "sweep over " + axis, labels,
                             {{"base", base}, {"novel", novel}, {"hm", hm}})) {
      ok = false;
      detail << axis << " plot failed; ";
    }
    if (!fs::exists(csv_path) || fs::file_size(csv_path) == 0) {
      ok = false;
      detail << axis << " csv missing; ";
    }
    if (axis == "N" && !(rows[0].diversity_disabled && rows[0].l_div == 0.0)) {
      ok = false;
      detail << "N=1 row not flagged diversity-disabled; ";
    }
  }
  return {"", ok,
          ok ? "N, lambda_div and guidance sweeps produced CSV + SVG; N=1 flagged"
             : detail.str()};
}

CheckResult criterion_argmax_invariance() { return check_argmax_invariance(100); }

}  // namespace

int main() {
  const fs::path dir = fs::temp_directory_path() / "msgcoop_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);

  const std::vector<Criterion> criteria = {
      {"gradient correctness", [] { return criterion_gradient(); }},
      {"loss bounds", [] { return criterion_loss_bounds(); }},
      {"reductions", [] { return criterion_reductions(); }},
      {"filtering oracle", [] { return criterion_filter_oracle(); }},
      {"harmonic mean arithmetic", [] { return criterion_harmonic_mean(); }},
      {"frozen parameters and determinism", [&] { return criterion_determinism(dir); }},
      {"desk-scale training sanity", [] { return criterion_desk_training(); }},
      {"ablation harness fidelity", [&] { return criterion_ablation(dir); }},
      {"argmax invariance", [] { return criterion_argmax_invariance(); }},
  };

  bool all_passed = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    CheckResult result;
    try {
      result = criteria[i].fn();
    } catch (const std::exception& e) {
      result = {criteria[i].name, false, std::string("exception: ") + e.what()};
    }
    std::cout << (result.passed ? "[PASS]" : "[FAIL]") << " criterion " << (i + 1) << ": "
              << criteria[i].name << " — " << result.detail << "\n";
    all_passed = all_passed && result.passed;
  }

  fs::remove_all(dir);
  return all_passed ? 0 : 1;
}
