#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "msgcoop/encoder.hpp"
#include "msgcoop/numeric.hpp"

namespace msgcoop {

// The only trainable state in the system: num_prompts independent context
// matrices of shape ctx_len x dim, prepended to class tokens before encoding.
struct ContextBank {
  std::size_t num_prompts = 0;
  std::size_t ctx_len = 0;
  std::size_t dim = 0;
  std::vector<Mat> context;

  Vec flatten() const;
  static ContextBank unflatten(const Vec& flat, std::size_t num_prompts, std::size_t ctx_len,
                               std::size_t dim);

  bool operator==(const ContextBank&) const = default;
};

struct ClassCatalog {
  std::vector<std::string> names;
  std::vector<Mat> tokens;  // cached class-name token embeddings, one per class

  std::size_t size() const { return names.size(); }
};

// Requires at least two unique class names; token embeddings are cached here
// and never change afterwards.
ClassCatalog make_catalog(const std::vector<std::string>& names, const Tokenizer& tokenizer,
                          const FrozenEncoder& encoder);

struct SoftEmbeddings {
  std::size_t num_classes = 0;
  std::size_t num_prompts = 0;
  std::vector<std::vector<Vec>> embeddings;  // [class][prompt], unit vectors
  std::vector<Vec> mean;                     // per class, plain mean, not re-normalized
};

struct LogitMatrix {
  std::size_t batch = 0;
  std::size_t num_classes = 0;
  double tau = 1.0;
  std::vector<double> scores;  // row-major, batch x num_classes

  double& at(std::size_t j, std::size_t i) { return scores[j * num_classes + i]; }
  double at(std::size_t j, std::size_t i) const { return scores[j * num_classes + i]; }
};

// Shared template embedding plus per-prompt Gaussian noise of scale sigma_init.
// sigma_init == 0 yields num_prompts bitwise-identical copies. The template
// must tokenize to exactly ctx_len tokens.
ContextBank init_context(const std::string& context_template, std::size_t num_prompts,
                         std::size_t ctx_len, double sigma_init, std::uint64_t seed,
                         const Tokenizer& tokenizer, const FrozenEncoder& encoder);

// Row-concatenation [context_n; class_tokens].
Mat assemble_prompt(const ContextBank& bank, std::size_t prompt_index, const Mat& class_tokens);

SoftEmbeddings encode_all(const ContextBank& bank, const ClassCatalog& catalog,
                          const FrozenEncoder& encoder);

// s_i = tau * mean_n cos(image_embedding, embeddings[i][n]).
Vec ensemble_logits(const Vec& image_embedding, const SoftEmbeddings& soft, double tau);

LogitMatrix batch_logits(const std::vector<Vec>& image_embeddings, const SoftEmbeddings& soft,
                         double tau);

// Index of the maximum; ties go to the lowest index.
std::size_t predict(const Vec& logits);

}  // namespace msgcoop
