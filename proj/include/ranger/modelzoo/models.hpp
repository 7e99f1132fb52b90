// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale architectures with seeded initial weights, plus two fixed toy
// nets used as exhaustive-injection oracles.
#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "ranger/graph.hpp"
#include "ranger/rng.hpp"

namespace ranger::zoo {

namespace detail {

/// Uniform(-limit, limit) initializer; limit follows He (ReLU) or Glorot.
inline WeightArray init_weights(Shape shape, std::int64_t fan_in, std::int64_t fan_out, bool relu, Rng& rng) {
  const double limit = relu ? std::sqrt(6.0 / static_cast<double>(fan_in))
                            : std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  WeightArray w{std::move(shape), {}};
  w.values.resize(static_cast<std::size_t>(element_count(w.shape)));
  for (auto& v : w.values) v = static_cast<float>(u(rng));
  return w;
}

inline WeightArray zeros(std::int64_t n) { return {{n}, std::vector<float>(static_cast<std::size_t>(n), 0.0f)}; }

/// Two 5x5 same-padded conv blocks over a 16x16x1 image, flattened to 256.
inline NodeId lenet_trunk(GraphBuilder& b, Rng& rng) {
  auto x = b.input({1, 16, 16, 1});
  x = b.conv2d(x, "conv1.w", init_weights({5, 5, 1, 8}, 25, 200, true, rng), 1, Padding::Same);
  x = b.bias_add(x, "conv1.b", zeros(8));
  x = b.relu(x);
  x = b.max_pool(x, 2, 2);
  x = b.conv2d(x, "conv2.w", init_weights({5, 5, 8, 16}, 200, 400, true, rng), 1, Padding::Same);
  x = b.bias_add(x, "conv2.b", zeros(16));
  x = b.relu(x);
  x = b.max_pool(x, 2, 2);
  return b.reshape(x, {1, 256});
}

}  // namespace detail

/// 10-class digit CNN; outputs logits.
inline Graph lenet_mini(std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x1e4e7);
  GraphBuilder b(TaskSpec::classification(10));
  auto x = detail::lenet_trunk(b, rng);
  x = b.fully_connected(x, "fc1.w", detail::init_weights({256, 64}, 256, 64, true, rng));
  x = b.bias_add(x, "fc1.b", detail::zeros(64));
  x = b.relu(x);
  x = b.fully_connected(x, "fc2.w", detail::init_weights({64, 10}, 64, 10, false, rng));
  x = b.bias_add(x, "fc2.b", detail::zeros(10));
  return std::move(b).build();
}

/// Steering-angle regressor. The radians variant ends in Atan.
inline Graph steer_mini(std::uint64_t seed, AngleUnit unit = AngleUnit::Degrees) {
  Rng rng = make_rng(seed, 0x57ee7);
  GraphBuilder b(TaskSpec::regression({15, 30, 60, 120}, unit));
  auto x = detail::lenet_trunk(b, rng);
  x = b.fully_connected(x, "fc1.w", detail::init_weights({256, 32}, 256, 32, true, rng));
  x = b.bias_add(x, "fc1.b", detail::zeros(32));
  x = b.relu(x);
  x = b.fully_connected(x, "fc2.w", detail::init_weights({32, 1}, 32, 1, false, rng));
  x = b.bias_add(x, "fc2.b", detail::zeros(1));
  if (unit == AngleUnit::Radians) x = b.atan(x);
  return std::move(b).build();
}

/// Two hidden layers (64, 32) with ReLU or Tanh. Image inputs are flattened.
inline Graph tiny_mlp(std::uint64_t seed, const Shape& input_shape, int classes, OpKind activation = OpKind::ReLU) {
  if (!is_activation(activation)) throw Error("tiny-mlp activation must be ReLU or Tanh");
  Rng rng = make_rng(seed, 0x3170);
  const bool relu = activation == OpKind::ReLU;
  GraphBuilder b(TaskSpec::classification(classes));
  auto x = b.input(input_shape);
  const auto dim = element_count(input_shape);
  if (input_shape.size() != 2) x = b.reshape(x, {1, dim});
  x = b.fully_connected(x, "fc1.w", detail::init_weights({dim, 64}, dim, 64, relu, rng));
  x = b.bias_add(x, "fc1.b", detail::zeros(64));
  x = b.unary(activation, x);
  x = b.fully_connected(x, "fc2.w", detail::init_weights({64, 32}, 64, 32, relu, rng));
  x = b.bias_add(x, "fc2.b", detail::zeros(32));
  x = b.unary(activation, x);
  x = b.fully_connected(x, "fc3.w", detail::init_weights({32, classes}, 32, classes, false, rng));
  x = b.bias_add(x, "fc3.b", detail::zeros(classes));
  return std::move(b).build();
}

inline Graph build_architecture(const std::string& arch, std::uint64_t seed, const Shape& input_shape = {1, 128},
                                int classes = 2, OpKind activation = OpKind::ReLU,
                                AngleUnit unit = AngleUnit::Degrees) {
  if (arch == "lenet-mini") return lenet_mini(seed);
  if (arch == "steer-mini") return steer_mini(seed, unit);
  if (arch == "tiny-mlp") return tiny_mlp(seed, input_shape, classes, activation);
  throw Error("unknown architecture '" + arch + "' (expected tiny-mlp, lenet-mini or steer-mini)");
}

/// Untrained 8-16-16-4 ReLU classifier with random weights in [-1, 1] and
/// biases in [-0.5, 0.5].
inline Graph toy_mlp(std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x70e);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto random = [&](Shape s, double scale) {
    WeightArray w{std::move(s), {}};
    w.values.resize(static_cast<std::size_t>(element_count(w.shape)));
    for (auto& v : w.values) v = static_cast<float>(scale * u(rng));
    return w;
  };
  GraphBuilder b(TaskSpec::classification(4));
  auto x = b.input({1, 8});
  x = b.fully_connected(x, "fc1.w", random({8, 16}, 1.0));
  x = b.bias_add(x, "fc1.b", random({16}, 0.5));
  x = b.relu(x);
  x = b.fully_connected(x, "fc2.w", random({16, 16}, 1.0));
  x = b.bias_add(x, "fc2.b", random({16}, 0.5));
  x = b.relu(x);
  x = b.fully_connected(x, "fc3.w", random({16, 4}, 1.0));
  x = b.bias_add(x, "fc3.b", random({4}, 0.5));
  return std::move(b).build();
}

/// 4 -> 4 (ReLU) -> 1 regression chain with weights in [0.5, 1.5]; every
/// value stays positive for positive inputs.
inline Graph positive_chain(std::uint64_t seed) {
  Rng rng = make_rng(seed, 0xc4a1);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  const auto random = [&](Shape s) {
    WeightArray w{std::move(s), {}};
    w.values.resize(static_cast<std::size_t>(element_count(w.shape)));
    for (auto& v : w.values) v = static_cast<float>(u(rng));
    return w;
  };
  GraphBuilder b(TaskSpec::regression());
  auto x = b.input({1, 4});
  x = b.fully_connected(x, "fc1.w", random({4, 4}));
  x = b.relu(x);
  x = b.fully_connected(x, "fc2.w", random({4, 1}));
  return std::move(b).build();
}

}  // namespace ranger::zoo
