#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "msgcoop/numeric.hpp"

namespace msgcoop {

using json = nlohmann::ordered_json;

struct TokenSeq {
  std::vector<std::uint32_t> ids;
};

// Hashing tokenizer: lowercase, collapse whitespace, one token per word,
// id = FNV-1a-64(word, seed) mod vocab_size. Deterministic by construction.
class Tokenizer {
 public:
  Tokenizer(std::size_t vocab_size, std::uint64_t seed);

  TokenSeq tokenize(std::string_view text) const;

  std::size_t vocab_size() const { return vocab_size_; }
  std::uint64_t seed() const { return seed_; }

 private:
  std::size_t vocab_size_;
  std::uint64_t seed_;
};

struct EncoderDims {
  std::size_t vocab = 4096;      // V
  std::size_t token_dim = 32;    // d, context/token embedding dim
  std::size_t hidden = 64;       // h
  std::size_t embed = 64;        // e, output embedding dim
  std::size_t image_feat = 64;   // f, raw image-feature dim

  bool operator==(const EncoderDims&) const = default;
};

// Intermediates of one text encoding, kept for the reverse pass.
struct TextForward {
  Vec pooled;       // mean over input rows (length d)
  Vec hidden;       // tanh activations (length h)
  Vec raw;          // pre-normalization output (length e)
  double raw_norm = 0.0;
  Vec out;          // normalized embedding (length e)
  std::size_t input_rows = 0;
};

// Frozen dual encoder: token table E, text MLP (W1, b1, W2, b2), image
// projection W_img. Text path: l2_normalize(W2 * tanh(W1 * meanpool(rows) + b1) + b2).
//
// Parameters are drawn once at construction from SplitMix64(seed), in this
// order, each row-major: E (V x d), W1 (h x d), b1 (h), W2 (e x h), b2 (e),
// W_img (e x f). Entries are i.i.d. Gaussian(0, 1/sqrt(fan_in)) where fan_in
// is 1 for the lookup table E, d for W1/b1, h for W2/b2, and f for W_img.
// They never change afterwards.
class FrozenEncoder {
 public:
  FrozenEncoder(EncoderDims dims, std::uint64_t seed, bool identity_image = false);

  Mat embed_tokens(const TokenSeq& seq) const;

  Vec encode_text(const Mat& prompt_rows) const;
  TextForward encode_text_forward(const Mat& prompt_rows) const;
  // Given dL/d(out), returns dL/d(pooled input). Each of the caller's input
  // rows then receives an equal 1/input_rows share.
  Vec encode_text_backward(const TextForward& fwd, const Vec& grad_out) const;

  Vec encode_image(const Vec& features) const;

  const EncoderDims& dims() const { return dims_; }
  std::uint64_t seed() const { return seed_; }
  bool identity_image() const { return identity_image_; }

  const Mat& token_table() const { return token_table_; }
  const Mat& w1() const { return w1_; }
  const Vec& b1() const { return b1_; }
  const Mat& w2() const { return w2_; }
  const Vec& b2() const { return b2_; }
  const Mat& w_img() const { return w_img_; }

  // Versioned parameter dump; field order is fixed (version, dims, seed,
  // identity_image, token_table, w1, b1, w2, b2, w_img) so dumps are
  // byte-comparable and replayable by external tooling.
  json dump() const;
  static FrozenEncoder from_dump(const json& j);

 private:
  FrozenEncoder() = default;

  EncoderDims dims_;
  std::uint64_t seed_ = 0;
  bool identity_image_ = false;
  Mat token_table_;
  Mat w1_;
  Vec b1_;
  Mat w2_;
  Vec b2_;
  Mat w_img_;
};

}  // namespace msgcoop
