#include "msgcoop/encoder.hpp"

#include <cctype>
#include <cmath>

#include "msgcoop/rng.hpp"

namespace msgcoop {

namespace {

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (const char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!current.empty()) {
        words.push_back(std::move(current));
        current.clear();
      }
    } else {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

Mat gaussian_matrix(SplitMix64& rng, std::size_t rows, std::size_t cols, double stddev) {
  Mat m(rows, cols);
  for (double& x : m.data) x = rng.gaussian(0.0, stddev);
  return m;
}

Vec gaussian_vector(SplitMix64& rng, std::size_t n, double stddev) {
  Vec v(n);
  for (double& x : v) x = rng.gaussian(0.0, stddev);
  return v;
}

json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows; ++r) {
    rows.push_back(json(std::vector<double>(m.row(r).begin(), m.row(r).end())));
  }
  return rows;
}

Mat mat_from_json(const json& j) {
  Mat m;
  m.rows = j.size();
  m.cols = m.rows == 0 ? 0 : j.at(0).size();
  m.data.reserve(m.rows * m.cols);
  for (const auto& row : j) {
    if (row.size() != m.cols) throw DomainError("encoder dump: ragged matrix");
    for (const auto& x : row) m.data.push_back(x.get<double>());
  }
  return m;
}

}  // namespace

Tokenizer::Tokenizer(std::size_t vocab_size, std::uint64_t seed)
    : vocab_size_(vocab_size), seed_(seed) {
  if (vocab_size_ == 0) throw DomainError("tokenizer: vocab size must be positive");
}

TokenSeq Tokenizer::tokenize(std::string_view text) const {
  const auto words = split_words(text);
  if (words.empty()) throw DomainError("tokenize: empty text");
  TokenSeq seq;
  seq.ids.reserve(words.size());
  for (const auto& word : words) {
    seq.ids.push_back(static_cast<std::uint32_t>(fnv1a64(word, seed_) % vocab_size_));
  }
  return seq;
}

FrozenEncoder::FrozenEncoder(EncoderDims dims, std::uint64_t seed, bool identity_image)
    : dims_(dims), seed_(seed), identity_image_(identity_image) {
  if (dims_.vocab == 0 || dims_.token_dim == 0 || dims_.hidden == 0 || dims_.embed == 0 ||
      dims_.image_feat == 0) {
    throw DomainError("encoder: all dimensions must be positive");
  }
  if (identity_image_ && dims_.image_feat != dims_.embed) {
    throw DimensionError("encoder: identity image mode requires image_feat == embed");
  }
  SplitMix64 rng(seed_);
  // fan_in of a table lookup is 1, so token embeddings are standard normal;
  // the affine layers contract d, h and f inputs respectively.
  const double sd_d = 1.0 / std::sqrt(static_cast<double>(dims_.token_dim));
  const double sd_h = 1.0 / std::sqrt(static_cast<double>(dims_.hidden));
  const double sd_f = 1.0 / std::sqrt(static_cast<double>(dims_.image_feat));
  token_table_ = gaussian_matrix(rng, dims_.vocab, dims_.token_dim, 1.0);
  w1_ = gaussian_matrix(rng, dims_.hidden, dims_.token_dim, sd_d);
  b1_ = gaussian_vector(rng, dims_.hidden, sd_d);
  w2_ = gaussian_matrix(rng, dims_.embed, dims_.hidden, sd_h);
  b2_ = gaussian_vector(rng, dims_.embed, sd_h);
  w_img_ = gaussian_matrix(rng, dims_.embed, dims_.image_feat, sd_f);
}

Mat FrozenEncoder::embed_tokens(const TokenSeq& seq) const {
  Mat out(seq.ids.size(), dims_.token_dim);
  for (std::size_t r = 0; r < seq.ids.size(); ++r) {
    const std::uint32_t id = seq.ids[r];
    if (id >= dims_.vocab) throw DomainError("embed_tokens: token id out of range");
    const auto src = token_table_.row(id);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

TextForward FrozenEncoder::encode_text_forward(const Mat& prompt_rows) const {
  if (prompt_rows.rows == 0) throw DimensionError("encode_text: need at least one row");
  if (prompt_rows.cols != dims_.token_dim) {
    throw DimensionError("encode_text: row width " + std::to_string(prompt_rows.cols) +
                         " does not match token dim " + std::to_string(dims_.token_dim));
  }
  TextForward fwd;
  fwd.input_rows = prompt_rows.rows;
  fwd.pooled.assign(dims_.token_dim, 0.0);
  for (std::size_t r = 0; r < prompt_rows.rows; ++r) {
    const auto row = prompt_rows.row(r);
    for (std::size_t c = 0; c < dims_.token_dim; ++c) fwd.pooled[c] += row[c];
  }
  for (double& x : fwd.pooled) x /= static_cast<double>(prompt_rows.rows);

  Vec pre = matvec(w1_, fwd.pooled);
  for (std::size_t i = 0; i < pre.size(); ++i) pre[i] += b1_[i];
  fwd.hidden.resize(pre.size());
  for (std::size_t i = 0; i < pre.size(); ++i) fwd.hidden[i] = std::tanh(pre[i]);

  fwd.raw = matvec(w2_, fwd.hidden);
  for (std::size_t i = 0; i < fwd.raw.size(); ++i) fwd.raw[i] += b2_[i];

  fwd.raw_norm = norm2(fwd.raw);
  if (fwd.raw_norm <= kNormEps) {
    throw DegenerateVectorError("encode_text: pre-normalization output is degenerate");
  }
  fwd.out.resize(fwd.raw.size());
  for (std::size_t i = 0; i < fwd.raw.size(); ++i) fwd.out[i] = fwd.raw[i] / fwd.raw_norm;
  return fwd;
}

Vec FrozenEncoder::encode_text(const Mat& prompt_rows) const {
  return encode_text_forward(prompt_rows).out;
}

Vec FrozenEncoder::encode_text_backward(const TextForward& fwd, const Vec& grad_out) const {
  if (grad_out.size() != dims_.embed) throw DimensionError("encode_text_backward: bad grad size");
  // Through the normalization: g_raw = (g - (out . g) out) / ||raw||.
  const double out_dot_g = dot(fwd.out, grad_out);
  Vec g_raw(grad_out.size());
  for (std::size_t i = 0; i < grad_out.size(); ++i) {
    g_raw[i] = (grad_out[i] - out_dot_g * fwd.out[i]) / fwd.raw_norm;
  }
  Vec g_hidden = matvec_transposed(w2_, g_raw);
  for (std::size_t i = 0; i < g_hidden.size(); ++i) {
    g_hidden[i] *= 1.0 - fwd.hidden[i] * fwd.hidden[i];
  }
  return matvec_transposed(w1_, g_hidden);
}

Vec FrozenEncoder::encode_image(const Vec& features) const {
  if (features.size() != dims_.image_feat) {
    throw DimensionError("encode_image: feature length " + std::to_string(features.size()) +
                         " does not match image dim " + std::to_string(dims_.image_feat));
  }
  Vec projected = identity_image_ ? features : matvec(w_img_, features);
  const double n = norm2(projected);
  if (n <= kNormEps) throw DegenerateVectorError("encode_image: degenerate input");
  for (double& x : projected) x /= n;
  return projected;
}

json FrozenEncoder::dump() const {
  json j;
  j["version"] = "msgcoop-encoder-v1";
  j["dims"] = {{"vocab", dims_.vocab},
               {"token_dim", dims_.token_dim},
               {"hidden", dims_.hidden},
               {"embed", dims_.embed},
               {"image_feat", dims_.image_feat}};
  j["seed"] = seed_;
  j["identity_image"] = identity_image_;
  j["token_table"] = mat_to_json(token_table_);
  j["w1"] = mat_to_json(w1_);
  j["b1"] = b1_;
  j["w2"] = mat_to_json(w2_);
  j["b2"] = b2_;
  j["w_img"] = mat_to_json(w_img_);
  return j;
}

FrozenEncoder FrozenEncoder::from_dump(const json& j) {
  if (j.at("version").get<std::string>() != "msgcoop-encoder-v1") {
    throw DomainError("encoder dump: unsupported version");
  }
  FrozenEncoder enc;
  const auto& d = j.at("dims");
  enc.dims_ = {d.at("vocab").get<std::size_t>(), d.at("token_dim").get<std::size_t>(),
               d.at("hidden").get<std::size_t>(), d.at("embed").get<std::size_t>(),
               d.at("image_feat").get<std::size_t>()};
  enc.seed_ = j.at("seed").get<std::uint64_t>();
  enc.identity_image_ = j.at("identity_image").get<bool>();
  enc.token_table_ = mat_from_json(j.at("token_table"));
  enc.w1_ = mat_from_json(j.at("w1"));
  enc.b1_ = j.at("b1").get<Vec>();
  enc.w2_ = mat_from_json(j.at("w2"));
  enc.b2_ = j.at("b2").get<Vec>();
  enc.w_img_ = mat_from_json(j.at("w_img"));
  require_finite(enc.token_table_.data, "encoder dump token_table");
  require_finite(enc.w1_.data, "encoder dump w1");
  require_finite(enc.b1_, "encoder dump b1");
  require_finite(enc.w2_.data, "encoder dump w2");
  require_finite(enc.b2_, "encoder dump b2");
  require_finite(enc.w_img_.data, "encoder dump w_img");
  return enc;
}

}  // namespace msgcoop
