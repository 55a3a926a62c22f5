#include <gtest/gtest.h>

#include <cmath>

#include "gcnlab/adam.hpp"
#include "gcnlab/model.hpp"
#include "test_support.hpp"

using namespace gcnlab;
using testsupport::binomial_3sigma;
using testsupport::path3;

namespace {

double probe_loss(const GcnModel& m, const NormAdj& adj, const Dense& x0,
                  const SamplePlan& plan, const std::vector<int>& labels,
                  const std::vector<std::size_t>& batch, double wd) {
  LayerCache cache = forward(m, adj, x0, plan, Mode::train);
  double loss = cross_entropy(cache.logits, labels, batch).loss;
  for (const Dense& w : m.weights) {
    double f = frobenius_norm(w);
    loss += 0.5 * wd * f * f;
  }
  return loss;
}

// Central finite differences of the total loss against the analytic weight
// gradients, all strategy machinery held fixed.
void expect_gradients_match(GcnModel m, const NormAdj& adj, const Dense& x0,
                            const SamplePlan& plan, const std::vector<int>& labels,
                            const std::vector<std::size_t>& batch, double wd) {
  LayerCache cache = forward(m, adj, x0, plan, Mode::train);
  CrossEntropy ce = cross_entropy(cache.logits, labels, batch);
  std::vector<Dense> grads = backward(m, adj, cache, ce.grad, wd);
  const double h = 1e-5;
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    for (std::size_t i = 0; i < m.weights[l].data.size(); ++i) {
      double saved = m.weights[l].data[i];
      m.weights[l].data[i] = saved + h;
      double up = probe_loss(m, adj, x0, plan, labels, batch, wd);
      m.weights[l].data[i] = saved - h;
      double down = probe_loss(m, adj, x0, plan, labels, batch, wd);
      m.weights[l].data[i] = saved;
      double fd = (up - down) / (2.0 * h);
      double an = grads[l].data[i];
      double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
      EXPECT_LT(std::abs(fd - an) / denom, 1e-4)
          << "layer " << l << " entry " << i << " fd=" << fd << " an=" << an;
    }
  }
}

struct Probe {
  Graph graph;
  NormAdj adj;
  Dense x0;
  std::vector<int> labels{0, 1, 0, 1, 0, 1};
  std::vector<std::size_t> batch{0, 1, 2, 3, 4, 5};
};

Probe make_probe(std::uint64_t seed) {
  Probe p;
  p.graph = erdos_renyi(6, 0.5, seed);
  p.adj = normalize_adjacency(p.graph);
  Rng rng(seed);
  p.x0 = Dense(6, 3);
  for (double& v : p.x0.data) v = std::abs(rng.normal());
  return p;
}

}  // namespace

TEST(UniformPlan, RateZeroAndOne) {
  SamplePlan zeros = uniform_plan(10, 5, 0.0, 1);
  ASSERT_EQ(zeros.masks.size(), 3u);
  for (const auto& row : zeros.masks)
    for (auto f : row) EXPECT_EQ(f, 0);
  SamplePlan ones = uniform_plan(10, 5, 1.0, 1);
  for (const auto& row : ones.masks)
    for (auto f : row) EXPECT_EQ(f, 1);
}

TEST(UniformPlan, CountsWithinBinomialBounds) {
  SamplePlan p = uniform_plan(1000, 4, 0.3, 17);
  auto [lo, hi] = binomial_3sigma(1000, 0.3);
  for (const auto& row : p.masks) {
    double ones = 0;
    for (auto f : row) ones += f;
    EXPECT_GE(ones, lo);
    EXPECT_LE(ones, hi);
  }
}

TEST(UniformPlan, BadRateThrows) {
  EXPECT_THROW(uniform_plan(4, 3, 1.5, 1), std::invalid_argument);
}

TEST(BiasedPlan, RateOneSelectsEveryNode) {
  Graph g = path3();
  SamplePlan p = biased_plan(g, 4, 1.0, 3);
  for (const auto& row : p.masks)
    for (auto f : row) EXPECT_EQ(f, 1);
}

TEST(BiasedPlan, RateZeroSelectsNothing) {
  Graph g = path3();
  SamplePlan p = biased_plan(g, 4, 0.0, 3);
  for (const auto& row : p.masks)
    for (auto f : row) EXPECT_EQ(f, 0);
}

TEST(BiasedPlan, ExactCountPerRow) {
  Graph g = erdos_renyi(100, 0.1, 5);
  SamplePlan p = biased_plan(g, 5, 0.37, 6);
  for (const auto& row : p.masks) {
    std::size_t ones = 0;
    for (auto f : row) ones += f;
    EXPECT_EQ(ones, 37u);
  }
}

TEST(BiasedPlan, DegreeWeightedFrequency) {
  // path-3 with one slot: the center node carries weight 3 of 7
  Graph g = path3();
  double rho = 0.34;  // floor(0.34 * 3) == 1
  std::size_t center = 0;
  const std::size_t trials = 100000;
  for (std::size_t seed = 0; seed < trials; ++seed) {
    SamplePlan p = biased_plan(g, 3, rho, seed);
    center += p.masks[0][1];
  }
  double freq = static_cast<double>(center) / static_cast<double>(trials);
  EXPECT_NEAR(freq, 3.0 / 7.0, 0.01);
}

TEST(Forward, AllOnesPlanKeepsSkippedRows) {
  Probe p = make_probe(41);
  GcnModel m = make_model(3, 4, 2, 4, Strategy::skipnode_uniform, 1.0, 0.0, 7);
  SamplePlan plan = uniform_plan(6, 4, 1.0, 9);
  LayerCache cache = forward(m, p.adj, p.x0, plan, Mode::train);
  for (std::size_t l = 1; l + 1 < m.depth; ++l) {
    const LayerRecord& rec = cache.layers[l];
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 4; ++j)
        EXPECT_EQ(rec.pre_act(i, j), rec.input(i, j));
  }
}

TEST(Forward, ZeroPlanMatchesVanillaBitwise) {
  Probe p = make_probe(42);
  GcnModel skip = make_model(3, 4, 2, 4, Strategy::skipnode_uniform, 0.7, 0.0, 7);
  GcnModel vanilla = make_model(3, 4, 2, 4, Strategy::none, 0.0, 0.0, 7);
  ASSERT_EQ(skip.weights[0].data, vanilla.weights[0].data);
  SamplePlan zeros = uniform_plan(6, 4, 0.0, 9);
  Dense a = forward(skip, p.adj, p.x0, zeros, Mode::train).logits;
  Dense b = forward(vanilla, p.adj, p.x0, zeros, Mode::train).logits;
  EXPECT_EQ(a.data, b.data);
}

TEST(Forward, HandEvaluatedSkipLayer) {
  Graph g = build_graph({{0, 1}}, 2);
  NormAdj adj = normalize_adjacency(g);
  GcnModel m = make_model(1, 1, 1, 3, Strategy::skipnode_uniform, 0.5, 0.0, 1);
  m.weights[0](0, 0) = 1.0;
  m.weights[1](0, 0) = 2.0;
  m.weights[2](0, 0) = 1.0;
  Dense x0(2, 1);
  x0(0, 0) = 1.0;
  x0(1, 0) = 3.0;
  SamplePlan plan = SamplePlan::zeros(2, 3);
  plan.masks[0][0] = 1;  // node 0 skips the middle layer
  LayerCache cache = forward(m, adj, x0, plan, Mode::train);
  // layer 1: relu(A [1,3]^T) = [2,2]; layer 2: node 0 keeps 2, node 1 gets
  // (0.5*4 + 0.5*4) = 4; layer 3: A [2,4]^T = [3,3]
  EXPECT_DOUBLE_EQ(cache.layers[1].pre_act(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(cache.layers[1].pre_act(1, 0), 4.0);
  EXPECT_DOUBLE_EQ(cache.logits(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(cache.logits(1, 0), 3.0);
}

TEST(Forward, PlanShapeMismatchThrows) {
  Probe p = make_probe(43);
  GcnModel m = make_model(3, 4, 2, 4, Strategy::skipnode_uniform, 0.5, 0.0, 7);
  SamplePlan bad = uniform_plan(6, 5, 0.5, 9);  // wrong depth
  EXPECT_THROW(forward(m, p.adj, p.x0, bad, Mode::train), std::invalid_argument);
}

TEST(Forward, EvalIgnoresPlanAndSeeds) {
  Probe p = make_probe(44);
  GcnModel m = make_model(3, 4, 2, 4, Strategy::skipnode_uniform, 0.9, 0.4, 7);
  SamplePlan zeros = SamplePlan::zeros(6, 4);
  Dense a = forward(m, p.adj, p.x0, zeros, Mode::eval, 1).logits;
  Dense b = forward(m, p.adj, p.x0, uniform_plan(6, 4, 0.9, 5), Mode::eval, 2).logits;
  EXPECT_EQ(a.data, b.data);
}

TEST(Backward, FullyMaskedLayerHasZeroWeightGradient) {
  Probe p = make_probe(45);
  GcnModel m = make_model(3, 4, 2, 4, Strategy::skipnode_uniform, 1.0, 0.0, 7);
  SamplePlan plan = uniform_plan(6, 4, 1.0, 9);
  LayerCache cache = forward(m, p.adj, p.x0, plan, Mode::train);
  CrossEntropy ce = cross_entropy(cache.logits, p.labels, p.batch);
  auto grads = backward(m, p.adj, cache, ce.grad, 0.0);
  for (std::size_t l = 1; l + 1 < m.depth; ++l)
    for (double v : grads[l].data) EXPECT_EQ(v, 0.0);
}

TEST(Backward, ZeroUpstreamLeavesOnlyDecay) {
  Probe p = make_probe(46);
  GcnModel m = make_model(3, 4, 2, 3, Strategy::none, 0.0, 0.0, 7);
  SamplePlan zeros = SamplePlan::zeros(6, 3);
  LayerCache cache = forward(m, p.adj, p.x0, zeros, Mode::train);
  const double wd = 5e-4;
  auto grads = backward(m, p.adj, cache, Dense(6, 2), wd);
  for (std::size_t l = 0; l < m.depth; ++l)
    for (std::size_t i = 0; i < grads[l].data.size(); ++i)
      EXPECT_EQ(grads[l].data[i], wd * m.weights[l].data[i]);
}

TEST(Backward, FiniteDifferenceVanilla) {
  Probe p = make_probe(47);
  GcnModel m = make_model(3, 3, 2, 4, Strategy::none, 0.0, 0.0, 19);
  expect_gradients_match(m, p.adj, p.x0, SamplePlan::zeros(6, 4), p.labels, p.batch, 5e-4);
}

TEST(Backward, FiniteDifferenceSkipUniform) {
  Probe p = make_probe(48);
  GcnModel m = make_model(3, 3, 2, 4, Strategy::skipnode_uniform, 0.5, 0.0, 20);
  SamplePlan plan = uniform_plan(6, 4, 0.5, 21);
  expect_gradients_match(m, p.adj, p.x0, plan, p.labels, p.batch, 5e-4);
}

TEST(Backward, FiniteDifferenceSkipBiased) {
  Probe p = make_probe(49);
  GcnModel m = make_model(3, 3, 2, 4, Strategy::skipnode_biased, 0.5, 0.0, 22);
  SamplePlan plan = biased_plan(p.graph, 4, 0.5, 23);
  expect_gradients_match(m, p.adj, p.x0, plan, p.labels, p.batch, 5e-4);
}

TEST(Backward, FiniteDifferenceResidual) {
  Probe p = make_probe(50);
  GcnModel m = make_model(3, 3, 2, 4, Strategy::residual, 0.0, 0.0, 24);
  expect_gradients_match(m, p.adj, p.x0, SamplePlan::zeros(6, 4), p.labels, p.batch, 5e-4);
}

TEST(Backward, FiniteDifferencePairnorm) {
  Probe p = make_probe(51);
  GcnModel m = make_model(3, 3, 2, 4, Strategy::pairnorm, 1.0, 0.0, 25);
  expect_gradients_match(m, p.adj, p.x0, SamplePlan::zeros(6, 4), p.labels, p.batch, 5e-4);
}

TEST(DropEdge, ZeroRateIsPlainNormalization) {
  Graph g = erdos_renyi(30, 0.2, 61);
  NormAdj a = drop_edge(g, 0.0, 62);
  NormAdj b = normalize_adjacency(g);
  EXPECT_EQ(a.col_idx, b.col_idx);
  EXPECT_EQ(a.values, b.values);
}

TEST(DropEdge, FullRateIsIdentity) {
  Graph g = erdos_renyi(30, 0.2, 63);
  NormAdj a = drop_edge(g, 1.0, 64);
  ASSERT_EQ(a.values.size(), g.n);
  for (std::size_t i = 0; i < g.n; ++i) {
    EXPECT_EQ(a.col_idx[i], i);
    EXPECT_DOUBLE_EQ(a.values[i], 1.0);
  }
}

TEST(DropEdge, KeptCountWithinBinomialBounds) {
  Graph g = erdos_renyi(80, 0.3, 65);
  double q = 0.4;
  NormAdj a = drop_edge(g, q, 66);
  double kept = static_cast<double>((a.values.size() - g.n) / 2);
  auto [lo, hi] = binomial_3sigma(g.num_edges(), 1.0 - q);
  EXPECT_GE(kept, lo);
  EXPECT_LE(kept, hi);
}

TEST(DropEdge, BadRateThrows) {
  Graph g = path3();
  EXPECT_THROW(drop_edge(g, -0.1, 1), std::invalid_argument);
}

TEST(Pairnorm, AlreadyNormalizedPairIsFixed) {
  Dense x(2, 2);
  x(0, 0) = 1.0;
  x(1, 0) = -1.0;
  Dense y = pairnorm(x, 1.0);
  for (std::size_t i = 0; i < x.data.size(); ++i) EXPECT_NEAR(y.data[i], x.data[i], 1e-12);
}

TEST(Pairnorm, ConstantRowsCollapseToZero) {
  Dense x(3, 2, 4.5);
  Dense y = pairnorm(x, 1.0);
  for (double v : y.data) EXPECT_EQ(v, 0.0);
}

TEST(Pairnorm, OutputNormIsScaleTimesSqrtN) {
  Rng rng(71);
  Dense x(12, 5);
  for (double& v : x.data) v = rng.normal();
  for (double s : {0.5, 1.0, 2.0}) {
    Dense y = pairnorm(x, s);
    EXPECT_NEAR(frobenius_norm(y), s * std::sqrt(12.0), 1e-9);
  }
}

TEST(Adam, ZeroGradientsLeaveWeightsUnchanged) {
  std::vector<Dense> w{glorot_init(3, 3, 81)};
  std::vector<Dense> w0 = w;
  AdamState s = AdamState::for_weights(w, 0.01, 0.0);
  adam_step(s, w, {Dense(3, 3)});
  EXPECT_EQ(w[0].data, w0[0].data);
}

TEST(Adam, FirstStepClosedForm) {
  std::vector<Dense> w{Dense(1, 2)};
  w[0](0, 0) = 1.0;
  w[0](0, 1) = -2.0;
  Dense g(1, 2);
  g(0, 0) = 0.3;
  g(0, 1) = -0.7;
  AdamState s = AdamState::for_weights(w, 0.01, 0.0);
  adam_step(s, w, {g});
  // bias corrections cancel at t=1: step is lr * g / (|g| + eps)
  EXPECT_NEAR(w[0](0, 0), 1.0 - 0.01 * 0.3 / (0.3 + 1e-8), 1e-15);
  EXPECT_NEAR(w[0](0, 1), -2.0 + 0.01 * 0.7 / (0.7 + 1e-8), 1e-15);
}

TEST(Adam, Deterministic) {
  std::vector<Dense> w{glorot_init(4, 4, 82)};
  Dense g = glorot_init(4, 4, 83);
  auto run = [&]() {
    std::vector<Dense> wc = w;
    AdamState s = AdamState::for_weights(wc, 0.01, 0.0);
    adam_step(s, wc, {g});
    adam_step(s, wc, {g});
    return wc[0].data;
  };
  EXPECT_EQ(run(), run());
}

TEST(MakeModel, RejectsBadConfigs) {
  EXPECT_THROW(make_model(3, 4, 2, 1, Strategy::none, 0.0, 0.0, 1), std::invalid_argument);
  EXPECT_THROW(make_model(3, 4, 2, 2, Strategy::residual, 0.0, 0.0, 1), std::invalid_argument);
  EXPECT_THROW(make_model(3, 4, 2, 3, Strategy::skipnode_uniform, 1.2, 0.0, 1),
               std::invalid_argument);
  EXPECT_THROW(make_model(3, 4, 2, 3, Strategy::none, 0.0, 1.0, 1), std::invalid_argument);
  EXPECT_THROW(make_model(0, 4, 2, 3, Strategy::none, 0.0, 0.0, 1), std::invalid_argument);
}

TEST(MakeModel, WeightShapesChain) {
  GcnModel m = make_model(5, 4, 3, 4, Strategy::none, 0.0, 0.0, 2);
  ASSERT_EQ(m.weights.size(), 4u);
  EXPECT_EQ(m.weights[0].rows, 5u);
  EXPECT_EQ(m.weights[0].cols, 4u);
  EXPECT_EQ(m.weights[1].rows, 4u);
  EXPECT_EQ(m.weights[2].cols, 4u);
  EXPECT_EQ(m.weights[3].rows, 4u);
  EXPECT_EQ(m.weights[3].cols, 3u);
}

TEST(StrategyNames, RoundTripAndAliases) {
  for (Strategy s : {Strategy::none, Strategy::skipnode_uniform, Strategy::skipnode_biased,
                     Strategy::dropedge, Strategy::pairnorm, Strategy::residual})
    EXPECT_EQ(strategy_from_string(to_string(s)), s);
  EXPECT_EQ(strategy_from_string("skipnode-uniform"), Strategy::skipnode_uniform);
  EXPECT_THROW(strategy_from_string("bogus"), std::invalid_argument);
}
