#include "msgcoop/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace msgcoop {

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("dot: length mismatch (" + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + ")");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

Vec matvec(const Mat& a, std::span<const double> x) {
  if (a.cols != x.size()) {
    throw DimensionError("matvec: " + std::to_string(a.cols) + " cols vs input length " +
                         std::to_string(x.size()));
  }
  Vec y(a.rows, 0.0);
  for (std::size_t r = 0; r < a.rows; ++r) y[r] = dot(a.row(r), x);
  return y;
}

Vec matvec_transposed(const Mat& a, std::span<const double> x) {
  if (a.rows != x.size()) {
    throw DimensionError("matvec_transposed: " + std::to_string(a.rows) +
                         " rows vs input length " + std::to_string(x.size()));
  }
  Vec y(a.cols, 0.0);
  for (std::size_t r = 0; r < a.rows; ++r) {
    const auto row = a.row(r);
    for (std::size_t c = 0; c < a.cols; ++c) y[c] += row[c] * x[r];
  }
  return y;
}

Vec l2_normalize(const Vec& v, bool* degenerate) {
  if (v.empty()) throw DimensionError("l2_normalize: empty vector");
  if (degenerate) *degenerate = false;
  const double n = norm2(v);
  if (n <= kNormEps) {
    if (degenerate) *degenerate = true;
    return Vec(v.size(), 0.0);
  }
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
  return out;
}

double cosine_sim(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) {
    throw DimensionError("cosine_sim: length mismatch (" + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + ")");
  }
  if (a == b) {
    if (norm2(a) <= kNormEps) throw DegenerateVectorError("cosine_sim: vector norm below 1e-12");
    return 1.0;
  }
  const double na = norm2(a);
  const double nb = norm2(b);
  if (na <= kNormEps || nb <= kNormEps) {
    throw DegenerateVectorError("cosine_sim: vector norm below 1e-12");
  }
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

void require_finite(std::span<const double> values, const std::string& what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw DomainError(what + ": non-finite value at index " + std::to_string(i));
    }
  }
}

GradCheckResult grad_check(const std::function<double(const Vec&)>& f, Vec params,
                           const Vec& analytic_grad, double step) {
  if (params.size() != analytic_grad.size()) {
    throw DimensionError("grad_check: parameter/gradient size mismatch");
  }
  if (!(step > 0.0)) throw DomainError("grad_check: step must be positive");

  GradCheckResult result;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + step;
    const double f_plus = f(params);
    params[i] = saved - step;
    const double f_minus = f(params);
    params[i] = saved;
    if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
      throw DomainError("grad_check: non-finite function value at coordinate " +
                        std::to_string(i));
    }
    const double fd = (f_plus - f_minus) / (2.0 * step);
    const double rel = std::abs(analytic_grad[i] - fd) / std::max(1.0, std::abs(fd));
    if (rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_coordinate = i;
    }
  }
  return result;
}

void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  if (threads <= 1 || n == 1) {
    fn(0, n);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(threads, n);
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace msgcoop
