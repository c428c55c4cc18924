#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "msgcoop/numeric.hpp"

namespace msgcoop {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Toy instance for end-to-end gradient verification: seeded encoder, random
// context bank, random batch and references, full loss weights.
struct GradcheckConfig {
  std::size_t num_prompts = 3;
  std::size_t num_classes = 4;
  std::size_t ctx_len = 2;
  std::size_t token_dim = 8;
  std::size_t hidden = 16;
  std::size_t embed = 16;
  std::size_t batch = 6;
  double tau = 30.0;
  double lambda_sg = 8.0;
  double lambda_div = 1.0;
  double step = 1e-5;
  std::uint64_t seed = 7;
};

// Analytic gradient of the total objective vs central differences over every
// context coordinate.
GradCheckResult run_gradcheck(const GradcheckConfig& config);

CheckResult check_gradient_contract(const GradcheckConfig& config, double tolerance);
CheckResult check_loss_bounds(std::size_t trials);
CheckResult check_reductions();
CheckResult check_filter_oracle(std::size_t trials);
CheckResult check_harmonic_mean_arithmetic();
CheckResult check_argmax_invariance(std::size_t trials);
CheckResult check_determinism();

// The file-free property suite behind `msgcoop selftest`.
std::vector<CheckResult> run_selftest();

}  // namespace msgcoop
