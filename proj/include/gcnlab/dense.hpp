#pragma once

// Dense kernels: products, activations, loss, initialization and singular
// value estimation. Everything is 64-bit and accumulates in a fixed order,
// so results are bit-stable across runs and thread counts.

#include <cassert>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcnlab/rng.hpp"

namespace gcnlab {

/// Iterative routine ran out of iterations; carries the last estimate.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double last_estimate)
      : std::runtime_error(what), last_estimate(last_estimate) {}
  double last_estimate;
};

/// Row-major dense matrix of doubles.
struct Dense {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Dense() = default;
  Dense(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }

  bool empty() const { return data.empty(); }
  bool same_shape(const Dense& o) const { return rows == o.rows && cols == o.cols; }
};

inline void debug_check_finite(const Dense& x, const char* where) {
#ifndef NDEBUG
  for (double v : x.data) assert(std::isfinite(v) && where);
#else
  (void)x;
  (void)where;
#endif
}

/// a * b. Accumulates over the inner index in ascending order; exact zeros in
/// a are skipped (a no-op on the accumulator), which keeps sparse feature
/// matrices cheap without changing the result.
inline Dense matmul(const Dense& a, const Dense& b) {
  if (a.cols != b.rows) throw std::invalid_argument("matmul: inner dimensions disagree");
  Dense out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* oi = out.row(i);
    const double* ai = a.row(i);
    for (std::size_t k = 0; k < a.cols; ++k) {
      double aik = ai[k];
      if (aik == 0.0) continue;
      const double* bk = b.row(k);
      for (std::size_t j = 0; j < b.cols; ++j) oi[j] += aik * bk[j];
    }
  }
  return out;
}

/// a^T * b.
inline Dense matmul_at_b(const Dense& a, const Dense& b) {
  if (a.rows != b.rows) throw std::invalid_argument("matmul_at_b: row counts disagree");
  Dense out(a.cols, b.cols);
  for (std::size_t k = 0; k < a.rows; ++k) {
    const double* ak = a.row(k);
    const double* bk = b.row(k);
    for (std::size_t i = 0; i < a.cols; ++i) {
      double aki = ak[i];
      if (aki == 0.0) continue;
      double* oi = out.row(i);
      for (std::size_t j = 0; j < b.cols; ++j) oi[j] += aki * bk[j];
    }
  }
  return out;
}

/// a * b^T.
inline Dense matmul_a_bt(const Dense& a, const Dense& b) {
  if (a.cols != b.cols) throw std::invalid_argument("matmul_a_bt: column counts disagree");
  Dense out(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* ai = a.row(i);
    double* oi = out.row(i);
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* bj = b.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) acc += ai[k] * bj[k];
      oi[j] = acc;
    }
  }
  return out;
}

inline Dense relu(const Dense& x) {
  Dense out = x;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return out;
}

/// 1 where pre-activation is strictly positive, else 0 (derivative at 0 is 0).
inline Dense relu_mask(const Dense& pre) {
  Dense out(pre.rows, pre.cols);
  for (std::size_t i = 0; i < pre.data.size(); ++i)
    out.data[i] = pre.data[i] > 0.0 ? 1.0 : 0.0;
  return out;
}

/// Row softmax with per-row max subtraction.
inline Dense softmax_rows(const Dense& z) {
  Dense out(z.rows, z.cols);
  for (std::size_t i = 0; i < z.rows; ++i) {
    const double* zi = z.row(i);
    double* oi = out.row(i);
    double m = zi[0];
    for (std::size_t j = 1; j < z.cols; ++j) m = std::max(m, zi[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < z.cols; ++j) {
      oi[j] = std::exp(zi[j] - m);
      sum += oi[j];
    }
    for (std::size_t j = 0; j < z.cols; ++j) oi[j] /= sum;
  }
  return out;
}

struct CrossEntropy {
  double loss = 0.0;
  Dense grad;  // same shape as the logits; rows outside the batch are zero
};

/// Mean cross entropy over the batch plus its gradient at the logits.
/// For a batch node of class c: grad_ic = (p_ic - 1)/B, grad_ij = p_ij/B.
inline CrossEntropy cross_entropy(const Dense& z, const std::vector<int>& labels,
                                  const std::vector<std::size_t>& batch) {
  if (batch.empty()) throw std::invalid_argument("cross_entropy: empty batch");
  if (labels.size() != z.rows) throw std::invalid_argument("cross_entropy: labels/rows disagree");
  CrossEntropy ce;
  ce.grad = Dense(z.rows, z.cols);
  const double b = static_cast<double>(batch.size());
  for (std::size_t id : batch) {
    if (id >= z.rows) throw std::invalid_argument("cross_entropy: batch id out of range");
    int y = labels[id];
    if (y < 0 || static_cast<std::size_t>(y) >= z.cols)
      throw std::invalid_argument("cross_entropy: label out of range");
    const double* zi = z.row(id);
    double m = zi[0];
    for (std::size_t j = 1; j < z.cols; ++j) m = std::max(m, zi[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < z.cols; ++j) sum += std::exp(zi[j] - m);
    double log_sum = std::log(sum);
    ce.loss += -(zi[y] - m - log_sum) / b;
    double* gi = ce.grad.row(id);
    for (std::size_t j = 0; j < z.cols; ++j) {
      double p = std::exp(zi[j] - m) / sum;
      gi[j] = (p - (static_cast<std::size_t>(y) == j ? 1.0 : 0.0)) / b;
    }
  }
  return ce;
}

/// Uniform on (-a, a) with a = sqrt(6 / (rows + cols)).
inline Dense glorot_init(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  if (rows == 0 || cols == 0) throw std::invalid_argument("glorot_init: zero dimension");
  Dense out(rows, cols);
  Rng rng = Rng::stream(seed, Stream::init);
  double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (double& v : out.data) v = rng.uniform(-a, a);
  return out;
}

inline double frobenius_norm(const Dense& x) {
  double acc = 0.0;
  for (double v : x.data) acc += v * v;
  return std::sqrt(acc);
}

/// Largest singular value by power iteration on w^T w. Starts from the
/// normalized all-ones vector; re-randomizes once if the iterate collapses.
inline double top_singular_value(const Dense& w, double tol = 1e-10,
                                 std::size_t max_iter = 100000) {
  if (tol <= 0.0) throw std::invalid_argument("top_singular_value: tol must be positive");
  if (w.rows == 0 || w.cols == 0 || frobenius_norm(w) == 0.0)
    throw std::invalid_argument("top_singular_value: zero matrix");
  std::vector<double> v(w.cols, 1.0 / std::sqrt(static_cast<double>(w.cols)));
  std::vector<double> u(w.rows), t(w.cols);
  bool rerandomized = false;
  double prev = -1.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    // u = w v
    for (std::size_t i = 0; i < w.rows; ++i) {
      const double* wi = w.row(i);
      double acc = 0.0;
      for (std::size_t j = 0; j < w.cols; ++j) acc += wi[j] * v[j];
      u[i] = acc;
    }
    double est = 0.0;
    for (double x : u) est += x * x;
    est = std::sqrt(est);
    // t = w^T u
    for (std::size_t j = 0; j < w.cols; ++j) t[j] = 0.0;
    for (std::size_t i = 0; i < w.rows; ++i) {
      const double* wi = w.row(i);
      for (std::size_t j = 0; j < w.cols; ++j) t[j] += wi[j] * u[i];
    }
    double tn = 0.0;
    for (double x : t) tn += x * x;
    tn = std::sqrt(tn);
    if (tn < 1e-300) {
      if (rerandomized) return 0.0;  // v orthogonal to the row space twice over
      Rng rng(0x746f707376ULL);  // fixed internal seed, keeps the routine pure
      double nrm = 0.0;
      for (double& x : v) {
        x = rng.normal();
        nrm += x * x;
      }
      nrm = std::sqrt(nrm);
      for (double& x : v) x /= nrm;
      rerandomized = true;
      continue;
    }
    for (std::size_t j = 0; j < w.cols; ++j) v[j] = t[j] / tn;
    if (prev >= 0.0 && std::abs(est - prev) < tol) return est;
    prev = est;
  }
  throw ConvergenceError("top_singular_value: max_iter exhausted", prev);
}

/// Scale w so its top singular value becomes s_target.
inline Dense rescale_to_singular_value(const Dense& w, double s_target,
                                       double tol = 1e-10, std::size_t max_iter = 100000) {
  double s = top_singular_value(w, tol, max_iter);
  Dense out = w;
  double f = s_target / s;
  for (double& v : out.data) v *= f;
  return out;
}

}  // namespace gcnlab
