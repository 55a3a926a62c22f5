#pragma once

// Probes for the failure modes of deep graph convolution: distance to the
// degree-weighted component subspace, the contraction eigenvalue of the
// normalized adjacency, neighbor smoothness (MAD), and norm summaries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "gcnlab/dense.hpp"
#include "gcnlab/graph.hpp"
#include "gcnlab/rng.hpp"

namespace gcnlab {

/// Orthonormal basis of the eigenvalue-1 eigenspace of the normalized
/// adjacency: one unit vector per component with entries
/// sqrt(degree_i + 1) on that component and 0 elsewhere.
struct SubspaceBasis {
  std::vector<std::vector<double>> vectors;  // num_components unit n-vectors
  std::size_t n = 0;

  std::size_t count() const { return vectors.size(); }
};

inline SubspaceBasis subspace_basis(const Graph& g) {
  SubspaceBasis b;
  b.n = g.n;
  b.vectors.assign(g.num_components, std::vector<double>(g.n, 0.0));
  std::vector<double> norms(g.num_components, 0.0);
  for (std::size_t i = 0; i < g.n; ++i) {
    double w = std::sqrt(static_cast<double>(g.degrees[i] + 1));
    b.vectors[g.components[i]][i] = w;
    norms[g.components[i]] += w * w;
  }
  for (std::size_t c = 0; c < b.vectors.size(); ++c) {
    double inv = 1.0 / std::sqrt(norms[c]);
    for (double& v : b.vectors[c]) v *= inv;
  }
  return b;
}

/// x minus its projection onto the subspace spanned by the basis (tensored
/// with feature space).
inline Dense subspace_residual(const Dense& x, const SubspaceBasis& basis) {
  if (x.rows != basis.n) throw std::invalid_argument("subspace_residual: row count mismatch");
  Dense res = x;
  std::vector<double> coef(x.cols);
  for (const auto& e : basis.vectors) {
    for (std::size_t j = 0; j < x.cols; ++j) coef[j] = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) {
      double ei = e[i];
      if (ei == 0.0) continue;
      const double* xi = x.row(i);
      for (std::size_t j = 0; j < x.cols; ++j) coef[j] += ei * xi[j];
    }
    for (std::size_t i = 0; i < x.rows; ++i) {
      double ei = e[i];
      if (ei == 0.0) continue;
      double* ri = res.row(i);
      for (std::size_t j = 0; j < x.cols; ++j) ri[j] -= ei * coef[j];
    }
  }
  return res;
}

/// Frobenius distance from x to the subspace.
inline double subspace_distance(const Dense& x, const SubspaceBasis& basis) {
  return frobenius_norm(subspace_residual(x, basis));
}

namespace detail {

inline void deflate(std::vector<double>& x, const SubspaceBasis& basis) {
  for (const auto& e : basis.vectors) {
    double dot = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) dot += e[i] * x[i];
    for (std::size_t i = 0; i < x.size(); ++i) x[i] -= dot * e[i];
  }
}

inline void spmv(const NormAdj& a, const std::vector<double>& x, std::vector<double>& y) {
  for (std::size_t i = 0; i < a.n; ++i) {
    double acc = 0.0;
    for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
      acc += a.values[k] * x[a.col_idx[k]];
    y[i] = acc;
  }
}

}  // namespace detail

/// Largest eigenvalue magnitude of the normalized adjacency outside the
/// eigenvalue-1 eigenspace, by power iteration with the basis deflated each
/// step. The start vector is drawn from a fixed internal stream, so the
/// routine is a pure function of its arguments.
inline double lambda_second(const NormAdj& a, const SubspaceBasis& basis,
                            double tol = 1e-8, std::size_t max_iter = 100000) {
  if (a.n != basis.n) throw std::invalid_argument("lambda_second: basis/adjacency mismatch");
  if (tol <= 0.0) throw std::invalid_argument("lambda_second: tol must be positive");
  if (a.n == basis.count()) return 0.0;  // every node isolated: spectrum is {1}
  Rng rng(0x6c616d626461ULL);
  std::vector<double> x(a.n), y(a.n);
  double nrm = 0.0;
  for (double& v : x) {
    v = rng.normal();
    nrm += v * v;
  }
  nrm = std::sqrt(nrm);
  for (double& v : x) v /= nrm;
  detail::deflate(x, basis);

  double prev = -1.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    double xn = 0.0;
    for (double v : x) xn += v * v;
    xn = std::sqrt(xn);
    if (xn < 1e-300) return 0.0;  // nothing left outside the deflated space
    for (double& v : x) v /= xn;
    detail::spmv(a, x, y);
    detail::deflate(y, basis);
    double est = 0.0;
    for (double v : y) est += v * v;
    est = std::sqrt(est);
    if (prev >= 0.0 && std::abs(est - prev) < tol) return est;
    prev = est;
    x.swap(y);
  }
  throw ConvergenceError("lambda_second: max_iter exhausted", prev);
}

/// Mean over nodes with at least one neighbor of the average cosine distance
/// to their neighbors. A pair of zero rows has distance 0; a zero row against
/// a nonzero one has distance 1.
inline double mad(const Dense& x, const Graph& g) {
  if (x.rows != g.n) throw std::invalid_argument("mad: row count mismatch");
  std::vector<double> norms(g.n, 0.0);
  for (std::size_t i = 0; i < g.n; ++i) {
    const double* xi = x.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) acc += xi[j] * xi[j];
    norms[i] = std::sqrt(acc);
  }
  const double zero_tol = 1e-12;
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t i = 0; i < g.n; ++i) {
    if (g.degrees[i] == 0) continue;
    double acc = 0.0;
    for (std::size_t k = g.row_ptr[i]; k < g.row_ptr[i + 1]; ++k) {
      std::size_t j = g.col_idx[k];
      bool zi = norms[i] < zero_tol, zj = norms[j] < zero_tol;
      if (zi && zj) continue;  // distance 0
      if (zi || zj) {
        acc += 1.0;
        continue;
      }
      double dot = 0.0;
      const double* xi = x.row(i);
      const double* xj = x.row(j);
      for (std::size_t c = 0; c < x.cols; ++c) dot += xi[c] * xj[c];
      double dist = 1.0 - dot / (norms[i] * norms[j]);
      acc += std::clamp(dist, 0.0, 2.0);  // rounding can nudge it past the range
    }
    total += acc / static_cast<double>(g.degrees[i]);
    ++counted;
  }
  return counted == 0 ? 0.0 : total / static_cast<double>(counted);
}

inline double weight_norm_sum(const std::vector<Dense>& weights) {
  double acc = 0.0;
  for (const Dense& w : weights) acc += frobenius_norm(w);
  return acc;
}

/// Norm of the per-class sums of the loss gradient at the logits, the
/// quantity that collapses to 0 for a class-balanced batch once the logits
/// reach the zero fixed point.
inline double grad_norm_cls(const Dense& grad_logits) {
  double acc = 0.0;
  for (std::size_t j = 0; j < grad_logits.cols; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < grad_logits.rows; ++i) col += grad_logits(i, j);
    acc += col * col;
  }
  return std::sqrt(acc);
}

/// lambda plus the top singular value of each weight matrix.
struct SpectralReport {
  double lambda = 0.0;
  std::vector<double> s_per_layer;
  double s_sup = 0.0;
};

inline SpectralReport spectral_report(const NormAdj& a, const SubspaceBasis& basis,
                                      const std::vector<Dense>& weights,
                                      double tol = 1e-8, std::size_t max_iter = 100000) {
  SpectralReport r;
  r.lambda = lambda_second(a, basis, tol, max_iter);
  for (const Dense& w : weights) {
    r.s_per_layer.push_back(top_singular_value(w, tol, max_iter));
    r.s_sup = std::max(r.s_sup, r.s_per_layer.back());
  }
  return r;
}

}  // namespace gcnlab
