#pragma once

// Undirected simple graphs in CSR form, random generators, and the augmented
// normalized adjacency (D+I)^{-1/2} (A+I) (D+I)^{-1/2} used by every
// propagation step.

#include <algorithm>
#include <cstdint>
#include <queue>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gcnlab/dense.hpp"
#include "gcnlab/rng.hpp"

namespace gcnlab {

/// Undirected simple graph. Neighbor lists are sorted, symmetric, and carry
/// no self-loops or duplicates. Components are labeled 0..num_components-1.
struct Graph {
  std::size_t n = 0;
  std::vector<std::size_t> row_ptr;   // n + 1
  std::vector<std::size_t> col_idx;   // 2 * |E|
  std::vector<std::size_t> degrees;   // row_ptr[i+1] - row_ptr[i]
  std::vector<std::size_t> components;
  std::size_t num_components = 0;

  std::size_t num_edges() const { return col_idx.size() / 2; }
};

namespace detail {

inline Graph graph_from_neighbor_sets(std::vector<std::vector<std::size_t>> nbrs) {
  Graph g;
  g.n = nbrs.size();
  g.row_ptr.assign(g.n + 1, 0);
  for (std::size_t i = 0; i < g.n; ++i) {
    auto& v = nbrs[i];
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    g.row_ptr[i + 1] = g.row_ptr[i] + v.size();
  }
  g.col_idx.reserve(g.row_ptr[g.n]);
  for (const auto& v : nbrs) g.col_idx.insert(g.col_idx.end(), v.begin(), v.end());
  g.degrees.resize(g.n);
  for (std::size_t i = 0; i < g.n; ++i) g.degrees[i] = g.row_ptr[i + 1] - g.row_ptr[i];

  // components via BFS
  g.components.assign(g.n, static_cast<std::size_t>(-1));
  std::size_t cid = 0;
  std::queue<std::size_t> q;
  for (std::size_t s = 0; s < g.n; ++s) {
    if (g.components[s] != static_cast<std::size_t>(-1)) continue;
    g.components[s] = cid;
    q.push(s);
    while (!q.empty()) {
      std::size_t u = q.front();
      q.pop();
      for (std::size_t k = g.row_ptr[u]; k < g.row_ptr[u + 1]; ++k) {
        std::size_t v = g.col_idx[k];
        if (g.components[v] == static_cast<std::size_t>(-1)) {
          g.components[v] = cid;
          q.push(v);
        }
      }
    }
    ++cid;
  }
  g.num_components = cid;
  return g;
}

}  // namespace detail

/// Build from an edge list. Self-loops are dropped, duplicates and reversed
/// copies are merged, and the result is symmetric.
inline Graph build_graph(const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                         std::size_t n) {
  if (n == 0) throw std::invalid_argument("build_graph: empty node set");
  std::vector<std::vector<std::size_t>> nbrs(n);
  for (auto [u, v] : edges) {
    if (u >= n || v >= n) throw std::invalid_argument("build_graph: node id out of range");
    if (u == v) continue;
    nbrs[u].push_back(v);
    nbrs[v].push_back(u);
  }
  return detail::graph_from_neighbor_sets(std::move(nbrs));
}

/// G(n, p): each unordered pair drawn independently from the graph-gen stream.
inline Graph erdos_renyi(std::size_t n, double p, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("erdos_renyi: empty node set");
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("erdos_renyi: p outside [0, 1]");
  Rng rng = Rng::stream(seed, Stream::graph_gen);
  std::vector<std::vector<std::size_t>> nbrs(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (rng.bernoulli(p)) {
        nbrs[i].push_back(j);
        nbrs[j].push_back(i);
      }
    }
  }
  return detail::graph_from_neighbor_sets(std::move(nbrs));
}

/// Two equal blocks; pairs inside a block connect with p_in, across with
/// p_out. Block of node i is i < ceil(n/2) ? 0 : 1.
inline Graph planted_partition(std::size_t n, double p_in, double p_out,
                               std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("planted_partition: empty node set");
  if (p_in < 0.0 || p_in > 1.0 || p_out < 0.0 || p_out > 1.0)
    throw std::invalid_argument("planted_partition: probability outside [0, 1]");
  Rng rng = Rng::stream(seed, Stream::graph_gen);
  std::size_t half = (n + 1) / 2;
  std::vector<std::vector<std::size_t>> nbrs(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      bool same = (i < half) == (j < half);
      if (rng.bernoulli(same ? p_in : p_out)) {
        nbrs[i].push_back(j);
        nbrs[j].push_back(i);
      }
    }
  }
  return detail::graph_from_neighbor_sets(std::move(nbrs));
}

/// Sparse symmetric CSR of (D+I)^{-1/2} (A+I) (D+I)^{-1/2}, self-loop entries
/// included: n + 2|E| nonzeros, columns sorted within each row.
struct NormAdj {
  std::size_t n = 0;
  std::vector<std::size_t> row_ptr;
  std::vector<std::size_t> col_idx;
  std::vector<double> values;
};

inline NormAdj normalize_adjacency(const Graph& g) {
  NormAdj a;
  a.n = g.n;
  a.row_ptr.assign(g.n + 1, 0);
  a.col_idx.reserve(g.col_idx.size() + g.n);
  a.values.reserve(g.col_idx.size() + g.n);
  std::vector<double> inv_sqrt(g.n);
  for (std::size_t i = 0; i < g.n; ++i)
    inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(g.degrees[i] + 1));
  for (std::size_t i = 0; i < g.n; ++i) {
    bool self_emitted = false;
    for (std::size_t k = g.row_ptr[i]; k < g.row_ptr[i + 1]; ++k) {
      std::size_t j = g.col_idx[k];
      if (!self_emitted && j > i) {
        a.col_idx.push_back(i);
        a.values.push_back(inv_sqrt[i] * inv_sqrt[i]);
        self_emitted = true;
      }
      a.col_idx.push_back(j);
      a.values.push_back(inv_sqrt[i] * inv_sqrt[j]);
    }
    if (!self_emitted) {
      a.col_idx.push_back(i);
      a.values.push_back(inv_sqrt[i] * inv_sqrt[i]);
    }
    a.row_ptr[i + 1] = a.col_idx.size();
  }
  return a;
}

/// Sparse-dense product. Per output element, neighbor contributions
/// accumulate in ascending column order.
inline Dense spmm(const NormAdj& a, const Dense& x) {
  if (a.n != x.rows) throw std::invalid_argument("spmm: dimension mismatch");
  Dense out(a.n, x.cols);
  for (std::size_t i = 0; i < a.n; ++i) {
    double* oi = out.row(i);
    for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
      double v = a.values[k];
      const double* xj = x.row(a.col_idx[k]);
      for (std::size_t c = 0; c < x.cols; ++c) oi[c] += v * xj[c];
    }
  }
  return out;
}

/// spmm that leaves rows with skip[i] != 0 at zero.
inline Dense spmm_skip_rows(const NormAdj& a, const Dense& x,
                            const std::vector<std::uint8_t>& skip) {
  if (a.n != x.rows || skip.size() != a.n)
    throw std::invalid_argument("spmm_skip_rows: dimension mismatch");
  Dense out(a.n, x.cols);
  for (std::size_t i = 0; i < a.n; ++i) {
    if (skip[i]) continue;
    double* oi = out.row(i);
    for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
      double v = a.values[k];
      const double* xj = x.row(a.col_idx[k]);
      for (std::size_t c = 0; c < x.cols; ++c) oi[c] += v * xj[c];
    }
  }
  return out;
}

}  // namespace gcnlab
