#pragma once

// Deep GCN with pluggable training strategies and hand-written reverse-mode
// gradients.
//
// Layer l computes relu(A_hat X W_l) with three decorations, one of which is
// active at a time on the middle layers (2..L-1):
//   - skip masks:  X_l = relu((I - P) A_hat X W_l + P X), P diagonal 0/1
//   - residual:    X_l = relu(A_hat X W_l) + X
//   - pairnorm:    X_l = center_and_scale(relu(A_hat X W_l))
// Layer 1 is a plain convolution; layer L emits raw logits. Inverted feature
// dropout is applied to every layer input during training.

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcnlab/dense.hpp"
#include "gcnlab/graph.hpp"
#include "gcnlab/rng.hpp"

namespace gcnlab {

enum class Strategy {
  none,
  skipnode_uniform,
  skipnode_biased,
  dropedge,
  pairnorm,
  residual,
};

inline std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::none: return "none";
    case Strategy::skipnode_uniform: return "skipnode_uniform";
    case Strategy::skipnode_biased: return "skipnode_biased";
    case Strategy::dropedge: return "dropedge";
    case Strategy::pairnorm: return "pairnorm";
    case Strategy::residual: return "residual";
  }
  return "none";
}

inline Strategy strategy_from_string(std::string s) {
  for (char& c : s)
    if (c == '-') c = '_';
  if (s == "none" || s.empty()) return Strategy::none;
  if (s == "skipnode_uniform" || s == "skipnode_u") return Strategy::skipnode_uniform;
  if (s == "skipnode_biased" || s == "skipnode_b") return Strategy::skipnode_biased;
  if (s == "dropedge") return Strategy::dropedge;
  if (s == "pairnorm") return Strategy::pairnorm;
  if (s == "residual") return Strategy::residual;
  throw std::invalid_argument("unknown strategy: " + s);
}

/// Per-middle-layer 0/1 node masks. Row r holds the mask of layer r+2.
struct SamplePlan {
  std::vector<std::vector<std::uint8_t>> masks;  // (L-2) rows of n flags
  double rho = 0.0;
  std::uint64_t seed = 0;

  static SamplePlan zeros(std::size_t n, std::size_t depth) {
    SamplePlan p;
    p.masks.assign(depth >= 2 ? depth - 2 : 0, std::vector<std::uint8_t>(n, 0));
    return p;
  }
};

/// Each flag i.i.d. Bernoulli(rho) from the sampling stream.
inline SamplePlan uniform_plan(std::size_t n, std::size_t depth, double rho,
                               std::uint64_t seed) {
  if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("uniform_plan: rho outside [0, 1]");
  SamplePlan p = SamplePlan::zeros(n, depth);
  p.rho = rho;
  p.seed = seed;
  Rng rng = Rng::stream(seed, Stream::sampling);
  for (auto& row : p.masks)
    for (auto& flag : row) flag = rng.bernoulli(rho) ? 1 : 0;
  return p;
}

/// Per middle layer, floor(rho*n) distinct nodes drawn without replacement
/// with weight degree+1, via exponential keys: node i gets key log(u_i)/w_i
/// and the k largest keys win.
inline SamplePlan biased_plan(const Graph& g, std::size_t depth, double rho,
                              std::uint64_t seed) {
  if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("biased_plan: rho outside [0, 1]");
  SamplePlan p = SamplePlan::zeros(g.n, depth);
  p.rho = rho;
  p.seed = seed;
  std::size_t k = static_cast<std::size_t>(rho * static_cast<double>(g.n));
  if (k > g.n) k = g.n;
  if (k == 0) return p;
  Rng rng = Rng::stream(seed, Stream::sampling);
  std::vector<std::pair<double, std::size_t>> keys(g.n);
  for (auto& row : p.masks) {
    for (std::size_t i = 0; i < g.n; ++i) {
      double u = 1.0 - rng.uniform01();  // (0, 1]
      double w = static_cast<double>(g.degrees[i] + 1);
      keys[i] = {std::log(u) / w, i};
    }
    std::partial_sort(keys.begin(), keys.begin() + k, keys.end(),
                      [](const auto& a, const auto& b) {
                        if (a.first != b.first) return a.first > b.first;
                        return a.second < b.second;
                      });
    for (std::size_t j = 0; j < k; ++j) row[keys[j].second] = 1;
  }
  return p;
}

struct GcnModel {
  std::size_t depth = 2;
  std::size_t in_dim = 0;
  std::size_t hidden = 64;
  std::size_t num_classes = 0;
  Strategy strategy = Strategy::none;
  double strategy_rate = 0.0;  // rho, dropedge q, or pairnorm scale
  double dropout_rate = 0.0;
  std::vector<Dense> weights;  // in_dim x h, h x h (depth-2 times), h x C
};

/// Validates the configuration and draws Glorot weights, one init sub-stream
/// per layer.
inline GcnModel make_model(std::size_t in_dim, std::size_t hidden, std::size_t num_classes,
                           std::size_t depth, Strategy strategy, double strategy_rate,
                           double dropout_rate, std::uint64_t seed) {
  if (depth < 2) throw std::invalid_argument("make_model: depth must be at least 2");
  if (in_dim == 0 || hidden == 0 || num_classes == 0)
    throw std::invalid_argument("make_model: zero dimension");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw std::invalid_argument("make_model: dropout rate outside [0, 1)");
  switch (strategy) {
    case Strategy::skipnode_uniform:
    case Strategy::skipnode_biased:
    case Strategy::dropedge:
      if (strategy_rate < 0.0 || strategy_rate > 1.0)
        throw std::invalid_argument("make_model: strategy rate outside [0, 1]");
      break;
    case Strategy::pairnorm:
      if (strategy_rate <= 0.0)
        throw std::invalid_argument("make_model: pairnorm scale must be positive");
      break;
    case Strategy::residual:
      // residual adds the layer input to the output, which needs matching
      // dimensions; only the middle layers (h x h) provide them
      if (depth < 3)
        throw std::invalid_argument("make_model: residual needs a middle layer (depth >= 3)");
      break;
    case Strategy::none:
      break;
  }
  GcnModel m;
  m.depth = depth;
  m.in_dim = in_dim;
  m.hidden = hidden;
  m.num_classes = num_classes;
  m.strategy = strategy;
  m.strategy_rate = strategy_rate;
  m.dropout_rate = dropout_rate;
  m.weights.reserve(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    std::size_t r = (l == 0) ? in_dim : hidden;
    std::size_t c = (l == depth - 1) ? num_classes : hidden;
    m.weights.push_back(glorot_init(r, c, mix_seed(seed, static_cast<std::uint64_t>(l))));
  }
  return m;
}

/// Center columns, then scale so the Frobenius norm becomes scale*sqrt(n).
/// Inputs whose centered norm is below 1e-12 map to zero.
inline Dense pairnorm(const Dense& x, double scale) {
  Dense out = x;
  if (x.rows == 0) return out;
  std::vector<double> mean(x.cols, 0.0);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double* xi = x.row(i);
    for (std::size_t j = 0; j < x.cols; ++j) mean[j] += xi[j];
  }
  for (double& v : mean) v /= static_cast<double>(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    double* oi = out.row(i);
    for (std::size_t j = 0; j < x.cols; ++j) oi[j] -= mean[j];
  }
  double f = frobenius_norm(out);
  if (f < 1e-12) {
    for (double& v : out.data) v = 0.0;
    return out;
  }
  double factor = scale * std::sqrt(static_cast<double>(x.rows)) / f;
  for (double& v : out.data) v *= factor;
  return out;
}

/// Keep each undirected edge with probability 1-q, then normalize the
/// sampled graph. q=1 leaves only the augmented self-loops (identity).
inline NormAdj drop_edge(const Graph& g, double q, std::uint64_t seed) {
  if (q < 0.0 || q > 1.0) throw std::invalid_argument("drop_edge: q outside [0, 1]");
  Rng rng = Rng::stream(seed, Stream::sampling);
  std::vector<std::vector<std::size_t>> nbrs(g.n);
  for (std::size_t u = 0; u < g.n; ++u)
    for (std::size_t k = g.row_ptr[u]; k < g.row_ptr[u + 1]; ++k) {
      std::size_t v = g.col_idx[k];
      if (u < v && !rng.bernoulli(q)) {
        nbrs[u].push_back(v);
        nbrs[v].push_back(u);
      }
    }
  return normalize_adjacency(detail::graph_from_neighbor_sets(std::move(nbrs)));
}

enum class Mode { train, eval };

/// Everything backward needs, layer by layer.
struct LayerRecord {
  Dense input;                         // layer input after dropout
  Dense drop_scale;                    // empty, or per-entry dropout multiplier
  Dense pre_act;                       // the argument of relu (raw logits at layer L)
  Dense act_mask;                      // relu mask; empty at layer L
  std::vector<std::uint8_t> node_mask; // empty on non-middle layers
  Dense pn_input;                      // pairnorm input; empty unless used
  bool residual_applied = false;
};

struct LayerCache {
  std::vector<LayerRecord> layers;  // one per layer, length == depth
  Dense logits;
};

namespace detail {

inline Dense apply_dropout(const Dense& x, double rate, Rng& rng, Dense& scale_out) {
  scale_out = Dense(x.rows, x.cols);
  Dense out(x.rows, x.cols);
  double keep = 1.0 - rate;
  double inv = 1.0 / keep;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    double s = rng.bernoulli(keep) ? inv : 0.0;
    scale_out.data[i] = s;
    out.data[i] = x.data[i] * s;
  }
  return out;
}

inline Dense pairnorm_backward(const Dense& pn_input, double scale, const Dense& grad_out) {
  std::size_t n = pn_input.rows, d = pn_input.cols;
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += pn_input(i, j);
  for (double& v : mean) v /= static_cast<double>(n);
  Dense centered = pn_input;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) centered(i, j) -= mean[j];
  double f = frobenius_norm(centered);
  if (f < 1e-12) return Dense(n, d);  // output pinned at zero
  double k = scale * std::sqrt(static_cast<double>(n));
  double dot = 0.0;
  for (std::size_t i = 0; i < centered.data.size(); ++i)
    dot += grad_out.data[i] * centered.data[i];
  Dense grad_centered(n, d);
  for (std::size_t i = 0; i < centered.data.size(); ++i)
    grad_centered.data[i] =
        (k / f) * (grad_out.data[i] - centered.data[i] * dot / (f * f));
  // centering is x - column means, symmetric, so apply it to the gradient too
  std::vector<double> gmean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) gmean[j] += grad_centered(i, j);
  for (double& v : gmean) v /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) grad_centered(i, j) -= gmean[j];
  return grad_centered;
}

#ifndef NDEBUG
inline bool non_negative(const Dense& x) {
  for (double v : x.data)
    if (v < 0.0) return false;
  return true;
}
#endif

}  // namespace detail

/// Full forward pass. In train mode the plan's masks drive the skip layers
/// and dropout draws from a stream derived from dropout_seed; in eval mode
/// every strategy is off and the plan is ignored.
inline LayerCache forward(const GcnModel& m, const NormAdj& adj, const Dense& x0,
                          const SamplePlan& plan, Mode mode,
                          std::uint64_t dropout_seed = 0) {
  if (x0.rows != adj.n) throw std::invalid_argument("forward: feature rows disagree with graph");
  if (x0.cols != m.in_dim) throw std::invalid_argument("forward: feature dim disagrees with model");
  bool skipping = mode == Mode::train && (m.strategy == Strategy::skipnode_uniform ||
                                          m.strategy == Strategy::skipnode_biased);
  if (skipping && (plan.masks.size() != m.depth - 2 ||
                   (m.depth > 2 && plan.masks[0].size() != adj.n)))
    throw std::invalid_argument("forward: plan shape mismatch");

  bool use_dropout = mode == Mode::train && m.dropout_rate > 0.0;
  Rng drop_rng = Rng::stream(dropout_seed, Stream::dropout);

  LayerCache cache;
  cache.layers.resize(m.depth);
  Dense x = x0;
  for (std::size_t l = 0; l < m.depth; ++l) {
    LayerRecord& rec = cache.layers[l];
    if (use_dropout)
      rec.input = detail::apply_dropout(x, m.dropout_rate, drop_rng, rec.drop_scale);
    else
      rec.input = x;
    bool middle = l > 0 && l + 1 < m.depth;
    bool masked = skipping && middle;

    Dense h = matmul(rec.input, m.weights[l]);
    if (masked) {
      rec.node_mask = plan.masks[l - 1];
#ifndef NDEBUG
      assert(detail::non_negative(rec.input) &&
             "skip rows rely on non-negative layer inputs");
#endif
      rec.pre_act = spmm_skip_rows(adj, h, rec.node_mask);
      for (std::size_t i = 0; i < adj.n; ++i) {
        if (!rec.node_mask[i]) continue;
        const double* xi = rec.input.row(i);
        double* si = rec.pre_act.row(i);
        for (std::size_t j = 0; j < rec.pre_act.cols; ++j) si[j] = xi[j];
      }
    } else {
      rec.pre_act = spmm(adj, h);
    }

    if (l + 1 == m.depth) {
      cache.logits = rec.pre_act;
      break;
    }
    rec.act_mask = relu_mask(rec.pre_act);
    x = relu(rec.pre_act);
    if (middle && mode == Mode::train) {
      if (m.strategy == Strategy::residual) {
        for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] += rec.input.data[i];
        rec.residual_applied = true;
      } else if (m.strategy == Strategy::pairnorm) {
        rec.pn_input = x;
        x = pairnorm(x, m.strategy_rate);
      }
    }
  }
  debug_check_finite(cache.logits, "forward logits");
  return cache;
}

/// Weight gradients for the forward pass that produced the cache. For a
/// masked middle layer with post-relu upstream gradient G:
///   dW = X^T A_hat (I-P) G,   dX = A_hat (I-P) G W^T + P G.
/// Plain layers are the P = 0 case; weight decay adds lambda W per weight.
inline std::vector<Dense> backward(const GcnModel& m, const NormAdj& adj,
                                   const LayerCache& cache, const Dense& grad_logits,
                                   double weight_decay = 0.0) {
  if (cache.layers.size() != m.depth)
    throw std::invalid_argument("backward: cache depth disagrees with model");
  if (!grad_logits.same_shape(cache.logits))
    throw std::invalid_argument("backward: gradient shape disagrees with logits");
  std::vector<Dense> grads(m.depth);
  Dense g = grad_logits;  // gradient at the current layer's output
  for (std::size_t li = m.depth; li-- > 0;) {
    const LayerRecord& rec = cache.layers[li];
    bool middle = li > 0 && li + 1 < m.depth;
    bool last = li + 1 == m.depth;

    Dense residual_extra;
    if (!last && middle) {
      if (!rec.pn_input.empty())
        g = detail::pairnorm_backward(rec.pn_input, m.strategy_rate, g);
      else if (rec.residual_applied)
        residual_extra = g;  // flows straight to the layer input
    }

    Dense u;  // gradient at the pre-activation
    if (last) {
      u = g;
    } else {
      u = g;
      for (std::size_t i = 0; i < u.data.size(); ++i) u.data[i] *= rec.act_mask.data[i];
    }

    bool masked = !rec.node_mask.empty();
    Dense t2;  // A_hat (I-P) u
    if (masked) {
      Dense t = u;
      for (std::size_t i = 0; i < t.rows; ++i) {
        if (!rec.node_mask[i]) continue;
        double* ti = t.row(i);
        for (std::size_t j = 0; j < t.cols; ++j) ti[j] = 0.0;
      }
      t2 = spmm(adj, t);
    } else {
      t2 = spmm(adj, u);
    }
    grads[li] = matmul_at_b(rec.input, t2);

    if (li > 0) {
      Dense gx = matmul_a_bt(t2, m.weights[li]);
      if (masked) {
        for (std::size_t i = 0; i < gx.rows; ++i) {
          if (!rec.node_mask[i]) continue;
          double* gi = gx.row(i);
          const double* ui = u.row(i);
          for (std::size_t j = 0; j < gx.cols; ++j) gi[j] += ui[j];
        }
      }
      if (!residual_extra.empty())
        for (std::size_t i = 0; i < gx.data.size(); ++i)
          gx.data[i] += residual_extra.data[i];
      if (!rec.drop_scale.empty())
        for (std::size_t i = 0; i < gx.data.size(); ++i)
          gx.data[i] *= rec.drop_scale.data[i];
      g = std::move(gx);
    }
  }
  if (weight_decay != 0.0)
    for (std::size_t l = 0; l < m.depth; ++l)
      for (std::size_t i = 0; i < grads[l].data.size(); ++i)
        grads[l].data[i] += weight_decay * m.weights[l].data[i];
  return grads;
}

}  // namespace gcnlab
