#pragma once

// Full-batch training loop: fresh sampling plan (or resampled edges) per
// epoch, strategies active only on the training pass, evaluation with
// everything off, diagnostics recorded per epoch, and the weights restored
// from the best-validation epoch.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "gcnlab/adam.hpp"
#include "gcnlab/bundle.hpp"
#include "gcnlab/diagnostics.hpp"
#include "gcnlab/model.hpp"

namespace gcnlab {

struct TrainConfig {
  std::string dataset_path;
  std::size_t depth = 2;
  std::size_t hidden = 64;
  Strategy strategy = Strategy::none;
  double rate = 0.0;
  double dropout = 0.5;
  double lr = 0.01;
  double weight_decay = 5e-4;
  std::size_t epochs = 500;
  std::uint64_t seed = 0;
  std::string output_csv;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double test_acc = 0.0;
  double mad = 0.0;
  double grad_norm_cls = 0.0;
  double weight_norm_sum = 0.0;
  double epoch_ms = 0.0;
};

struct TrainTrace {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;  // 1-based; 0 when no epoch ran
  double best_val_acc = 0.0;
  double test_acc_at_best = 0.0;
};

struct TrainResult {
  GcnModel model;
  TrainTrace trace;
};

/// Fraction of ids whose argmax logit matches the label. Ties resolve to the
/// lowest class index. Empty id sets score 0.
inline double accuracy(const Dense& logits, const std::vector<int>& labels,
                       const std::vector<std::size_t>& ids) {
  if (ids.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t id : ids) {
    const double* zi = logits.row(id);
    std::size_t arg = 0;
    for (std::size_t j = 1; j < logits.cols; ++j)
      if (zi[j] > zi[arg]) arg = j;
    if (static_cast<std::size_t>(labels[id]) == arg) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ids.size());
}

inline TrainResult train(const Dataset& ds, const TrainConfig& cfg) {
  if (ds.graph.n != ds.features.rows)
    throw std::invalid_argument("train: dataset features disagree with graph");
  GcnModel model = make_model(ds.features.cols, cfg.hidden, ds.num_classes, cfg.depth,
                              cfg.strategy, cfg.rate, cfg.dropout, cfg.seed);
  NormAdj adj = normalize_adjacency(ds.graph);
  AdamState opt = AdamState::for_weights(model.weights, cfg.lr, cfg.weight_decay);
  SamplePlan eval_plan = SamplePlan::zeros(ds.graph.n, cfg.depth);

  TrainResult out;
  out.trace.epochs.reserve(cfg.epochs);
  std::vector<Dense> best_weights = model.weights;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();

    const NormAdj* adj_train = &adj;
    NormAdj sampled;
    SamplePlan plan = eval_plan;
    std::uint64_t tick = mix_seed(cfg.seed, static_cast<std::uint64_t>(Stream::sampling),
                                  static_cast<std::uint64_t>(epoch));
    switch (cfg.strategy) {
      case Strategy::skipnode_uniform:
        plan = uniform_plan(ds.graph.n, cfg.depth, cfg.rate, tick);
        break;
      case Strategy::skipnode_biased:
        plan = biased_plan(ds.graph, cfg.depth, cfg.rate, tick);
        break;
      case Strategy::dropedge:
        sampled = drop_edge(ds.graph, cfg.rate, tick);
        adj_train = &sampled;
        break;
      default:
        break;
    }
    std::uint64_t drop_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(Stream::dropout),
                                       static_cast<std::uint64_t>(epoch));

    LayerCache cache = forward(model, *adj_train, ds.features, plan, Mode::train, drop_seed);
    CrossEntropy ce = cross_entropy(cache.logits, ds.labels, ds.train_ids);
    std::vector<Dense> grads = backward(model, *adj_train, cache, ce.grad, cfg.weight_decay);
    adam_step(opt, model.weights, grads);

    LayerCache eval_cache = forward(model, adj, ds.features, eval_plan, Mode::eval);
    auto t1 = std::chrono::steady_clock::now();

    EpochStats st;
    st.epoch = epoch + 1;
    st.train_loss = ce.loss;
    st.train_acc = accuracy(eval_cache.logits, ds.labels, ds.train_ids);
    st.val_acc = accuracy(eval_cache.logits, ds.labels, ds.val_ids);
    st.test_acc = accuracy(eval_cache.logits, ds.labels, ds.test_ids);
    st.mad = mad(eval_cache.layers[cfg.depth - 1].input, ds.graph);
    st.grad_norm_cls = grad_norm_cls(ce.grad);
    st.weight_norm_sum = weight_norm_sum(model.weights);
    st.epoch_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    out.trace.epochs.push_back(st);

    if (st.val_acc > out.trace.best_val_acc || out.trace.best_epoch == 0) {
      out.trace.best_val_acc = st.val_acc;
      out.trace.best_epoch = st.epoch;
      out.trace.test_acc_at_best = st.test_acc;
      best_weights = model.weights;
    }
  }
  model.weights = best_weights;
  out.model = std::move(model);
  return out;
}

inline void write_trace_csv(const TrainTrace& trace, const std::string& path) {
  std::ofstream out(path);
  out << "epoch,train_loss,train_acc,val_acc,test_acc,mad,grad_norm_cls,"
         "weight_norm_sum,epoch_ms\n";
  char buf[256];
  for (const EpochStats& s : trace.epochs) {
    std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.3f\n",
                  s.epoch, s.train_loss, s.train_acc, s.val_acc, s.test_acc, s.mad,
                  s.grad_norm_cls, s.weight_norm_sum, s.epoch_ms);
    out << buf;
  }
}

}  // namespace gcnlab
