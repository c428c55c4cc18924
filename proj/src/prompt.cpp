#include "msgcoop/prompt.hpp"

#include <algorithm>
#include <set>

#include "msgcoop/rng.hpp"

namespace msgcoop {

Vec ContextBank::flatten() const {
  Vec flat;
  flat.reserve(num_prompts * ctx_len * dim);
  for (const Mat& m : context) flat.insert(flat.end(), m.data.begin(), m.data.end());
  return flat;
}

ContextBank ContextBank::unflatten(const Vec& flat, std::size_t num_prompts, std::size_t ctx_len,
                                   std::size_t dim) {
  if (flat.size() != num_prompts * ctx_len * dim) {
    throw DimensionError("ContextBank::unflatten: size mismatch");
  }
  ContextBank bank{num_prompts, ctx_len, dim, {}};
  bank.context.reserve(num_prompts);
  for (std::size_t n = 0; n < num_prompts; ++n) {
    Mat m(ctx_len, dim);
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(n * ctx_len * dim), ctx_len * dim,
                m.data.begin());
    bank.context.push_back(std::move(m));
  }
  return bank;
}

ClassCatalog make_catalog(const std::vector<std::string>& names, const Tokenizer& tokenizer,
                          const FrozenEncoder& encoder) {
  if (names.size() < 2) throw DomainError("catalog: need at least two classes");
  std::set<std::string> unique(names.begin(), names.end());
  if (unique.size() != names.size()) throw DomainError("catalog: class names must be unique");
  ClassCatalog catalog;
  catalog.names = names;
  catalog.tokens.reserve(names.size());
  for (const auto& name : names) {
    catalog.tokens.push_back(encoder.embed_tokens(tokenizer.tokenize(name)));
  }
  return catalog;
}

ContextBank init_context(const std::string& context_template, std::size_t num_prompts,
                         std::size_t ctx_len, double sigma_init, std::uint64_t seed,
                         const Tokenizer& tokenizer, const FrozenEncoder& encoder) {
  if (num_prompts == 0) throw DomainError("init_context: need at least one prompt");
  const TokenSeq seq = tokenizer.tokenize(context_template);
  if (seq.ids.size() != ctx_len) {
    throw DomainError("init_context: template tokenizes to " + std::to_string(seq.ids.size()) +
                      " tokens, expected " + std::to_string(ctx_len));
  }
  const Mat base = encoder.embed_tokens(seq);
  ContextBank bank{num_prompts, ctx_len, base.cols, {}};
  SplitMix64 rng(seed);
  for (std::size_t n = 0; n < num_prompts; ++n) {
    Mat ctx = base;
    if (sigma_init != 0.0) {
      for (double& x : ctx.data) x += rng.gaussian(0.0, sigma_init);
    }
    bank.context.push_back(std::move(ctx));
  }
  return bank;
}

Mat assemble_prompt(const ContextBank& bank, std::size_t prompt_index, const Mat& class_tokens) {
  if (prompt_index >= bank.num_prompts) throw DomainError("assemble_prompt: index out of range");
  if (class_tokens.cols != bank.dim) {
    throw DimensionError("assemble_prompt: class token width does not match context dim");
  }
  const Mat& ctx = bank.context[prompt_index];
  Mat prompt(ctx.rows + class_tokens.rows, bank.dim);
  std::copy(ctx.data.begin(), ctx.data.end(), prompt.data.begin());
  std::copy(class_tokens.data.begin(), class_tokens.data.end(),
            prompt.data.begin() + static_cast<std::ptrdiff_t>(ctx.data.size()));
  return prompt;
}

SoftEmbeddings encode_all(const ContextBank& bank, const ClassCatalog& catalog,
                          const FrozenEncoder& encoder) {
  SoftEmbeddings soft;
  soft.num_classes = catalog.size();
  soft.num_prompts = bank.num_prompts;
  soft.embeddings.resize(soft.num_classes);
  soft.mean.resize(soft.num_classes);
  for (std::size_t i = 0; i < soft.num_classes; ++i) {
    soft.embeddings[i].reserve(bank.num_prompts);
    for (std::size_t n = 0; n < bank.num_prompts; ++n) {
      soft.embeddings[i].push_back(
          encoder.encode_text(assemble_prompt(bank, n, catalog.tokens[i])));
    }
    Vec mean(encoder.dims().embed, 0.0);
    for (std::size_t n = 0; n < bank.num_prompts; ++n) {
      for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += soft.embeddings[i][n][c];
    }
    for (double& x : mean) x /= static_cast<double>(bank.num_prompts);
    soft.mean[i] = std::move(mean);
  }
  return soft;
}

Vec ensemble_logits(const Vec& image_embedding, const SoftEmbeddings& soft, double tau) {
  if (!(tau > 0.0)) throw DomainError("ensemble_logits: tau must be positive");
  Vec logits(soft.num_classes, 0.0);
  for (std::size_t i = 0; i < soft.num_classes; ++i) {
    double sum = 0.0;
    for (std::size_t n = 0; n < soft.num_prompts; ++n) {
      sum += cosine_sim(image_embedding, soft.embeddings[i][n]);
    }
    logits[i] = tau * (sum / static_cast<double>(soft.num_prompts));
  }
  return logits;
}

LogitMatrix batch_logits(const std::vector<Vec>& image_embeddings, const SoftEmbeddings& soft,
                         double tau) {
  LogitMatrix logits;
  logits.batch = image_embeddings.size();
  logits.num_classes = soft.num_classes;
  logits.tau = tau;
  logits.scores.resize(logits.batch * logits.num_classes);
  for (std::size_t j = 0; j < logits.batch; ++j) {
    const Vec row = ensemble_logits(image_embeddings[j], soft, tau);
    std::copy(row.begin(), row.end(),
              logits.scores.begin() + static_cast<std::ptrdiff_t>(j * logits.num_classes));
  }
  return logits;
}

std::size_t predict(const Vec& logits) {
  if (logits.empty()) throw DomainError("predict: empty logits");
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return best;
}

}  // namespace msgcoop
