#include "msgcoop/objective.hpp"

#include <algorithm>
#include <cmath>

namespace msgcoop {

double cross_entropy(const LogitMatrix& logits, const std::vector<std::size_t>& labels) {
  if (logits.batch == 0) throw DomainError("cross_entropy: empty batch");
  if (labels.size() != logits.batch) throw DimensionError("cross_entropy: label count mismatch");
  double total = 0.0;
  for (std::size_t j = 0; j < logits.batch; ++j) {
    if (labels[j] >= logits.num_classes) {
      throw DomainError("cross_entropy: label out of range at sample " + std::to_string(j));
    }
    double max_logit = logits.at(j, 0);
    for (std::size_t i = 1; i < logits.num_classes; ++i) {
      max_logit = std::max(max_logit, logits.at(j, i));
    }
    double sum_exp = 0.0;
    for (std::size_t i = 0; i < logits.num_classes; ++i) {
      sum_exp += std::exp(logits.at(j, i) - max_logit);
    }
    const double log_z = max_logit + std::log(sum_exp);
    total += log_z - logits.at(j, labels[j]);
  }
  return total / static_cast<double>(logits.batch);
}

double semantic_guidance(const SoftEmbeddings& soft, const std::vector<Vec>& references) {
  if (references.size() != soft.num_classes) {
    throw DomainError("semantic_guidance: reference missing for some class (" +
                      std::to_string(references.size()) + " refs, " +
                      std::to_string(soft.num_classes) + " classes)");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < soft.num_classes; ++i) {
    total += 1.0 - cosine_sim(soft.mean[i], references[i]);
  }
  return total / static_cast<double>(soft.num_classes);
}

double diversity(const SoftEmbeddings& soft, bool* disabled) {
  if (disabled) *disabled = false;
  if (soft.num_prompts < 2) {
    if (disabled) *disabled = true;
    return 0.0;
  }
  const double pairs = static_cast<double>(soft.num_prompts * (soft.num_prompts - 1));
  double total = 0.0;
  for (std::size_t i = 0; i < soft.num_classes; ++i) {
    double class_sum = 0.0;
    for (std::size_t m = 0; m < soft.num_prompts; ++m) {
      for (std::size_t n = 0; n < soft.num_prompts; ++n) {
        if (n == m) continue;
        const double c = cosine_sim(soft.embeddings[i][m], soft.embeddings[i][n]);
        class_sum += c * c;
      }
    }
    total += class_sum / pairs;
  }
  return total / static_cast<double>(soft.num_classes);
}

LossReport total_loss(const ContextBank& bank, const ClassCatalog& catalog,
                      const FrozenEncoder& encoder, const EncodedBatch& batch,
                      const std::vector<Vec>* references, const LossWeights& weights, double tau,
                      bool want_grad) {
  if (batch.images.empty()) throw DomainError("total_loss: empty batch");
  if (batch.images.size() != batch.labels.size()) {
    throw DimensionError("total_loss: image/label count mismatch");
  }
  if (weights.lambda_sg < 0.0 || weights.lambda_div < 0.0) {
    throw DomainError("total_loss: loss weights must be nonnegative");
  }

  const std::size_t num_classes = catalog.size();
  const std::size_t num_prompts = bank.num_prompts;
  const std::size_t embed = encoder.dims().embed;

  // Single encode pass, keeping activations for the reverse sweep.
  std::vector<std::vector<TextForward>> forwards(num_classes);
  SoftEmbeddings soft;
  soft.num_classes = num_classes;
  soft.num_prompts = num_prompts;
  soft.embeddings.resize(num_classes);
  soft.mean.resize(num_classes);
  for (std::size_t i = 0; i < num_classes; ++i) {
    forwards[i].reserve(num_prompts);
    soft.embeddings[i].reserve(num_prompts);
    for (std::size_t n = 0; n < num_prompts; ++n) {
      forwards[i].push_back(encoder.encode_text_forward(assemble_prompt(bank, n, catalog.tokens[i])));
      soft.embeddings[i].push_back(forwards[i][n].out);
    }
    Vec mean(embed, 0.0);
    for (std::size_t n = 0; n < num_prompts; ++n) {
      for (std::size_t c = 0; c < embed; ++c) mean[c] += soft.embeddings[i][n][c];
    }
    for (double& x : mean) x /= static_cast<double>(num_prompts);
    soft.mean[i] = std::move(mean);
  }

  const LogitMatrix logits = batch_logits(batch.images, soft, tau);

  LossReport report;
  report.l_ce = cross_entropy(logits, batch.labels);
  report.l_sg = references ? semantic_guidance(soft, *references) : 0.0;
  report.l_div = diversity(soft, &report.diversity_disabled);
  report.l_total =
      report.l_ce + weights.lambda_sg * report.l_sg + weights.lambda_div * report.l_div;

  if (!want_grad) return report;

  const std::size_t batch_size = batch.images.size();
  const double inv_batch = 1.0 / static_cast<double>(batch_size);
  const double inv_prompts = 1.0 / static_cast<double>(num_prompts);

  // Softmax probabilities for the cross-entropy term.
  Mat probs(batch_size, num_classes);
  for (std::size_t j = 0; j < batch_size; ++j) {
    double max_logit = logits.at(j, 0);
    for (std::size_t i = 1; i < num_classes; ++i) max_logit = std::max(max_logit, logits.at(j, i));
    double sum_exp = 0.0;
    for (std::size_t i = 0; i < num_classes; ++i) {
      probs.at(j, i) = std::exp(logits.at(j, i) - max_logit);
      sum_exp += probs.at(j, i);
    }
    for (std::size_t i = 0; i < num_classes; ++i) probs.at(j, i) /= sum_exp;
  }

  // Upstream gradients at each unit embedding. The normalization projection is
  // applied later in encode_text_backward, so plain dot-product forms suffice.
  Grad grad(num_prompts, bank.ctx_len, bank.dim);
  const double pair_count =
      num_prompts >= 2 ? static_cast<double>(num_prompts * (num_prompts - 1)) : 1.0;
  for (std::size_t i = 0; i < num_classes; ++i) {
    // Guidance acts on the class mean; precompute its shared factor.
    Vec g_mean(embed, 0.0);
    if (references && weights.lambda_sg != 0.0) {
      const Vec& u = soft.mean[i];
      const Vec& ref = (*references)[i];
      const double nu = norm2(u);
      const double nr = norm2(ref);
      if (nu <= kNormEps || nr <= kNormEps) {
        throw DegenerateVectorError("total_loss: degenerate mean or reference embedding");
      }
      const double cos_ur = dot(u, ref) / (nu * nr);
      const double scale = -weights.lambda_sg / static_cast<double>(num_classes);
      for (std::size_t c = 0; c < embed; ++c) {
        g_mean[c] = scale * (ref[c] / (nu * nr) - cos_ur * u[c] / (nu * nu));
      }
    }

    for (std::size_t n = 0; n < num_prompts; ++n) {
      Vec g_embed(embed, 0.0);

      // Cross-entropy: d s_ji / d w_in = (tau / N) * image_j.
      for (std::size_t j = 0; j < batch_size; ++j) {
        const double coeff = tau * inv_prompts * inv_batch *
                             (probs.at(j, i) - (batch.labels[j] == i ? 1.0 : 0.0));
        const Vec& img = batch.images[j];
        for (std::size_t c = 0; c < embed; ++c) g_embed[c] += coeff * img[c];
      }

      // Guidance: the mean distributes 1/N of its gradient to each prompt.
      if (references && weights.lambda_sg != 0.0) {
        for (std::size_t c = 0; c < embed; ++c) g_embed[c] += inv_prompts * g_mean[c];
      }

      // Diversity: d/dw_n of the ordered double sum is 4 * sum_{m != n} cos * w_m.
      if (num_prompts >= 2 && weights.lambda_div != 0.0) {
        const double scale =
            weights.lambda_div * 4.0 / (static_cast<double>(num_classes) * pair_count);
        for (std::size_t m = 0; m < num_prompts; ++m) {
          if (m == n) continue;
          const double c_mn = dot(soft.embeddings[i][m], soft.embeddings[i][n]);
          const Vec& w_m = soft.embeddings[i][m];
          for (std::size_t c = 0; c < embed; ++c) g_embed[c] += scale * c_mn * w_m[c];
        }
      }

      const Vec g_pooled = encoder.encode_text_backward(forwards[i][n], g_embed);
      const double inv_rows = 1.0 / static_cast<double>(forwards[i][n].input_rows);
      for (std::size_t r = 0; r < bank.ctx_len; ++r) {
        for (std::size_t c = 0; c < bank.dim; ++c) {
          grad.at(n, r, c) += g_pooled[c] * inv_rows;
        }
      }
    }
  }

  report.grad = std::move(grad);
  return report;
}

}  // namespace msgcoop
