#pragma once

// Adam with bias correction. Weight decay is carried here as a recorded
// hyperparameter but applied upstream, as an explicit L2 term folded into the
// gradients by backward(); the step itself never touches it.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "gcnlab/dense.hpp"

namespace gcnlab {

struct AdamState {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-4;
  std::size_t t = 0;
  std::vector<Dense> m, v;

  static AdamState for_weights(const std::vector<Dense>& weights, double lr,
                               double weight_decay) {
    AdamState s;
    s.lr = lr;
    s.weight_decay = weight_decay;
    for (const Dense& w : weights) {
      s.m.emplace_back(w.rows, w.cols);
      s.v.emplace_back(w.rows, w.cols);
    }
    return s;
  }
};

inline void adam_step(AdamState& s, std::vector<Dense>& weights,
                      const std::vector<Dense>& grads) {
  if (weights.size() != grads.size() || weights.size() != s.m.size())
    throw std::invalid_argument("adam_step: state/weights/grads disagree");
  ++s.t;
  double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (!weights[l].same_shape(grads[l]))
      throw std::invalid_argument("adam_step: gradient shape mismatch");
    for (std::size_t i = 0; i < weights[l].data.size(); ++i) {
      double g = grads[l].data[i];
      double& m = s.m[l].data[i];
      double& v = s.v[l].data[i];
      m = s.beta1 * m + (1.0 - s.beta1) * g;
      v = s.beta2 * v + (1.0 - s.beta2) * g * g;
      double mhat = m / bc1;
      double vhat = v / bc2;
      weights[l].data[i] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
    }
  }
}

}  // namespace gcnlab
