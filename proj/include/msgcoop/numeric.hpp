#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace msgcoop {

using Vec = std::vector<double>;

// Domain failures map to CLI exit code 1; anything CLI11 rejects maps to 2.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public DomainError {
 public:
  using DomainError::DomainError;
};

class DegenerateVectorError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Norms at or below this are treated as degenerate.
inline constexpr double kNormEps = 1e-12;

// Row-major dense matrix.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool operator==(const Mat&) const = default;
};

// Gradient buffer shaped like a context bank: num_prompts x ctx_len x dim,
// flattened prompt-major then row-major. Matches ContextBank::flatten().
struct Grad {
  std::size_t num_prompts = 0;
  std::size_t ctx_len = 0;
  std::size_t dim = 0;
  std::vector<double> data;

  Grad() = default;
  Grad(std::size_t n, std::size_t m, std::size_t d)
      : num_prompts(n), ctx_len(m), dim(d), data(n * m * d, 0.0) {}

  double& at(std::size_t n, std::size_t r, std::size_t c) {
    return data[(n * ctx_len + r) * dim + c];
  }
  double at(std::size_t n, std::size_t r, std::size_t c) const {
    return data[(n * ctx_len + r) * dim + c];
  }
};

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);

// y = A * x
Vec matvec(const Mat& a, std::span<const double> x);
// y = A^T * x
Vec matvec_transposed(const Mat& a, std::span<const double> x);

// v / ||v||. A norm <= kNormEps yields the zero vector and sets *degenerate
// instead of dividing; callers that cannot tolerate that should check the flag.
Vec l2_normalize(const Vec& v, bool* degenerate = nullptr);

// Clamped to [-1, 1]; bitwise-equal inputs short-circuit to exactly 1 so that
// collapse cases stay exact. Throws DegenerateVectorError if either norm <= kNormEps.
double cosine_sim(const Vec& a, const Vec& b);

void require_finite(std::span<const double> values, const std::string& what);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_coordinate = 0;
};

// Central-difference check of an analytic gradient, coordinate by coordinate.
// Relative error per coordinate is |analytic - fd| / max(1, |fd|).
// A non-finite function value aborts with a diagnostic naming the coordinate.
GradCheckResult grad_check(const std::function<double(const Vec&)>& f, Vec params,
                           const Vec& analytic_grad, double step);

// Runs fn(begin, end) over contiguous blocks of [0, n), one per worker.
// threads <= 1 runs inline. Blocks are disjoint, so writers indexed by i are safe.
void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace msgcoop
