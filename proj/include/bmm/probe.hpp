// Copyright 2026 The bmm-lab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "bmm/array2.hpp"
#include "bmm/data.hpp"

namespace bmm {

struct ProbeOptions {
  std::size_t iterations = 300;
  double learning_rate = 0.5;
};

/// Multinomial logistic regression on one feature matrix, fit by full-batch
/// gradient descent from zero. Returns accuracy on the held-out matrix.
/// Deterministic, and independent of the autodiff engine.
inline double linear_probe_accuracy(const Array2& train_x, std::span<const std::uint32_t> train_y,
                                    const Array2& test_x, std::span<const std::uint32_t> test_y,
                                    std::size_t n_classes, const ProbeOptions& opt = {}) {
  const std::size_t n = train_x.rows(), d = train_x.cols();
  Array2 w(d, n_classes);
  Array2 b(1, n_classes);
  const Array2 y = one_hot(train_y, n_classes);
  for (std::size_t it = 0; it < opt.iterations; ++it) {
    Array2 p = ops::softmax_rows(ops::affine(train_x, w, &b));
    for (std::size_t k = 0; k < p.size(); ++k) p[k] = (p[k] - y[k]) / static_cast<double>(n);
    Array2 gw(d, n_classes);
    ops::accumulate_at_b(train_x, p, gw);
    for (std::size_t k = 0; k < w.size(); ++k) w[k] -= opt.learning_rate * gw[k];
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < n_classes; ++c) b(0, c) -= opt.learning_rate * p(i, c);
    }
  }
  const Array2 logits = ops::affine(test_x, w, &b);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    if (ops::argmax(logits.row(i)) == test_y[i]) ++hits;
  }
  return test_x.rows() == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(test_x.rows());
}

struct ProbeReport {
  double audio = 0.0;
  double video = 0.0;
};

/// Per-modality probe accuracies: fit on train, score on test.
inline ProbeReport probe_modalities(const SplitDataset& data, const ProbeOptions& opt = {}) {
  const auto m = data.train.n_classes;
  return {linear_probe_accuracy(data.train.features_a, data.train.labels, data.test.features_a,
                                data.test.labels, m, opt),
          linear_probe_accuracy(data.train.features_v, data.train.labels, data.test.features_v,
                                data.test.labels, m, opt)};
}

}  // namespace bmm
