// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

#include "ranger/campaign.hpp"
#include "ranger/engine.hpp"
#include "ranger/modelzoo/datasets.hpp"

namespace ranger::zoo {

/// Classification: top-1 accuracy. Regression: RMSE and mean absolute
/// deviation, both in degrees.
struct Metrics {
  double accuracy = 0.0;
  double rmse = 0.0;
  double avg_deviation = 0.0;
  std::size_t n = 0;
};

/// Model outputs for every sample: class index or prediction in degrees.
inline std::vector<double> predictions(const Graph& graph, const Dataset& data,
                                       NumericFormat format = NumericFormat::float32(), int workers = 1) {
  const Executor exec(graph, format);
  const auto& task = exec.graph().task;
  std::vector<double> out(data.size());
  const auto w = static_cast<std::size_t>(std::max(1, workers));
  const auto body = [&](std::size_t first) {
    for (std::size_t i = first; i < data.size(); i += w) {
      const Tensor y = exec.infer(data.sample(i, format));
      out[i] = task.is_classification() ? static_cast<double>(argmax(y)) : regression_degrees(y, task.unit);
    }
  };
  if (w == 1) {
    body(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t k = 0; k < w; ++k) pool.emplace_back(body, k);
  }
  return out;
}

inline Metrics evaluate_accuracy(const Graph& graph, const Dataset& data,
                                 NumericFormat format = NumericFormat::float32(), int workers = 1) {
  const auto pred = predictions(graph, data, format, workers);
  Metrics m;
  m.n = data.size();
  if (m.n == 0) return m;
  if (graph.task.is_classification()) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < m.n; ++i) correct += pred[i] == data.y[i];
    m.accuracy = static_cast<double>(correct) / static_cast<double>(m.n);
    return m;
  }
  double sq = 0, abs = 0;
  for (std::size_t i = 0; i < m.n; ++i) {
    const double d = pred[i] - data.y[i];
    sq += d * d;
    abs += std::abs(d);
  }
  m.rmse = std::sqrt(sq / static_cast<double>(m.n));
  m.avg_deviation = abs / static_cast<double>(m.n);
  return m;
}

/// RMSE of predicting the mean target for every sample.
inline double constant_predictor_rmse(const Dataset& data) {
  if (data.size() == 0) return 0.0;
  double mean = 0;
  for (double y : data.y) mean += y;
  mean /= static_cast<double>(data.size());
  double sq = 0;
  for (double y : data.y) sq += (y - mean) * (y - mean);
  return std::sqrt(sq / static_cast<double>(data.size()));
}

}  // namespace ranger::zoo
