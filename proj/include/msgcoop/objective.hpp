#pragma once

#include <optional>
#include <vector>

#include "msgcoop/encoder.hpp"
#include "msgcoop/numeric.hpp"
#include "msgcoop/prompt.hpp"

namespace msgcoop {

struct LossWeights {
  double lambda_sg = 8.0;
  double lambda_div = 1.0;
};

// Pre-encoded unit image embeddings with class labels local to the catalog
// being trained on. Image encoding is frozen, so batches are encoded once.
struct EncodedBatch {
  std::vector<Vec> images;
  std::vector<std::size_t> labels;
};

struct LossReport {
  double l_ce = 0.0;
  double l_sg = 0.0;
  double l_div = 0.0;
  double l_total = 0.0;
  bool diversity_disabled = false;
  std::optional<Grad> grad;
};

// Mean negative log softmax probability of the true class, with max-subtraction
// stabilization so extreme logits cannot overflow.
double cross_entropy(const LogitMatrix& logits, const std::vector<std::size_t>& labels);

// mean_i [1 - cos(mean embedding_i, reference_i)]. References are constants.
double semantic_guidance(const SoftEmbeddings& soft, const std::vector<Vec>& references);

// mean_i of the ordered-pair average of squared cosines between a class's
// prompt embeddings. With a single prompt the term is defined as 0 and
// *disabled is set.
double diversity(const SoftEmbeddings& soft, bool* disabled = nullptr);

// One forward pass over all (class, prompt) encodings feeding all three terms;
// when want_grad is set, fills grad with d l_total / d context for every
// context coordinate. references == nullptr disables the guidance term
// (l_sg reported as 0).
LossReport total_loss(const ContextBank& bank, const ClassCatalog& catalog,
                      const FrozenEncoder& encoder, const EncodedBatch& batch,
                      const std::vector<Vec>* references, const LossWeights& weights, double tau,
                      bool want_grad);

}  // namespace msgcoop
