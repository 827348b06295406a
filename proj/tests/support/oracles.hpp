/* Copyright 2026 The imbaclass Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Reference computations shared by the unit and acceptance tests. They avoid
// the library code paths they are compared against.

#ifndef IMBACLASS_TESTS_ORACLES_HPP_
#define IMBACLASS_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "imbaclass/losses.hpp"
#include "imbaclass/nn.hpp"
#include "imbaclass/rng.hpp"
#include "imbaclass/synthgen.hpp"

namespace imbaclass::oracle {

inline double brute_force_auroc(const std::vector<double>& s, const std::vector<std::uint8_t>& pos) {
  double wins = 0.0;
  std::int64_t pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (pos[i] && !pos[j]) {
        ++pairs;
        wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  return wins / static_cast<double>(pairs);
}

// Mean loss straight from logits, with its own log-sum-exp.
inline double loss_from_logits(const std::vector<double>& logits, const std::vector<int>& labels,
                               int classes, const LossConfig& cfg) {
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double* z = logits.data() + i * static_cast<std::size_t>(classes);
    const double mx = *std::max_element(z, z + classes);
    double sum = 0.0;
    for (int j = 0; j < classes; ++j) sum += std::exp(z[j] - mx);
    const double p = std::exp(z[labels[i]] - mx) / sum;
    const double ce = -std::log(std::max(p, 1e-12));
    total += cfg.family == LossFamily::kFocal ? cfg.alpha * std::pow(1.0 - p, cfg.gamma) * ce : ce;
  }
  return total / static_cast<double>(labels.size());
}

// ||a - b|| / max(||a||, ||b||)
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(d) / std::max({std::sqrt(na), std::sqrt(nb), 1e-300});
}

// Central-difference gradient of the loss with respect to the logits.
inline std::vector<double> fd_logit_gradient(const std::vector<double>& logits,
                                             const std::vector<int>& labels, int classes,
                                             const LossConfig& cfg, double h = 1e-5) {
  std::vector<double> g(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) {
    auto up = logits, down = logits;
    up[k] += h;
    down[k] -= h;
    g[k] = (loss_from_logits(up, labels, classes, cfg) - loss_from_logits(down, labels, classes, cfg)) /
           (2.0 * h);
  }
  return g;
}

// Mean loss of a double-precision network, computed from its logits.
inline double network_loss(const Network<double>& net, const ParameterSet<double>& params,
                           const Tensor<double>& x, const std::vector<int>& labels,
                           const LossConfig& cfg) {
  const Tensor<double> logits = net.forward(params, x);
  return loss_from_logits(logits.data, labels, net.spec().num_classes, cfg);
}

struct NetworkCheck {
  std::vector<double> analytic;
  std::vector<double> numeric;
  std::vector<std::size_t> coordinates;
};

// Central differences on `count` randomly chosen parameters (all of them when
// count is 0).
inline NetworkCheck check_network_gradient(const NetworkSpec& spec, int batch, const LossConfig& cfg,
                                           std::uint64_t seed, std::size_t count = 0,
                                           double h = 1e-6) {
  const Network<double> net(spec);
  ParameterSet<double> params = net.init_parameters(seed);
  Rng rng(seed + 1);
  for (double& v : params.values) v += 0.05 * rng.normal();  // move biases/scales off their init
  std::vector<Image> images;
  std::vector<int> labels;
  for (int i = 0; i < batch; ++i) {
    const int label = i % spec.num_classes;
    images.push_back(generate_cell(label % kNumCellClasses, spec.input.width, seed + 100 + i, 8.0));
    labels.push_back(label);
  }
  const Tensor<double> x = images_to_tensor<double>(images);
  const auto result = backward(net, params, x, labels, cfg);

  NetworkCheck out;
  if (count == 0 || count >= params.values.size()) {
    for (std::size_t i = 0; i < params.values.size(); ++i) out.coordinates.push_back(i);
  } else {
    for (std::size_t i = 0; i < count; ++i) out.coordinates.push_back(rng.below(params.values.size()));
  }
  for (std::size_t k : out.coordinates) {
    const double saved = params.values[k];
    params.values[k] = saved + h;
    const double up = network_loss(net, params, x, labels, cfg);
    params.values[k] = saved - h;
    const double down = network_loss(net, params, x, labels, cfg);
    params.values[k] = saved;
    out.numeric.push_back((up - down) / (2.0 * h));
    out.analytic.push_back(result.gradient[k]);
  }
  return out;
}

}  // namespace imbaclass::oracle

#endif  // IMBACLASS_TESTS_ORACLES_HPP_
