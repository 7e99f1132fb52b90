// SPDX-License-Identifier: Apache-2.0
//
// Deterministic mini-batch SGD. Forward passes use the float32 engine;
// gradients are computed per node in reverse list order and accumulated in a
// fixed sample order, so a seed fixes the trained weights bit for bit.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "ranger/engine.hpp"
#include "ranger/modelzoo/datasets.hpp"
#include "ranger/modelzoo/models.hpp"

namespace ranger::zoo {

struct TrainSpec {
  std::string arch = "lenet-mini";
  int epochs = 4;
  double lr = 0.05;
  /// lr at epoch e is lr / (1 + decay * e).
  double decay = 0.5;
  std::uint64_t seed = 1;
  std::size_t batch = 16;
  /// 0 uses the whole training set.
  std::size_t train_samples = 0;
  OpKind activation = OpKind::ReLU;  // tiny-mlp only
  AngleUnit unit = AngleUnit::Degrees;  // steer-mini only
  int classes = 10;  // tiny-mlp only
};

struct TrainResult {
  Graph graph;
  std::vector<double> epoch_loss;
};

namespace detail {

inline void add_grad(std::vector<float>& dst, std::size_t n) {
  if (dst.empty()) dst.assign(n, 0.0f);
}

/// Gradients of one sample, accumulated into `wgrad` keyed by weight name.
inline double backprop_sample(const Executor& exec, const Tensor& input, double target, double target_scale,
                              std::map<std::string, std::vector<double>>& wgrad) {
  const Graph& g = exec.graph();
  const auto trace = exec.run(input);
  const auto n = g.nodes.size();
  std::vector<std::vector<float>> grad(n);
  const auto out_pos = exec.position(g.output_id);
  const auto& out = trace.outputs[out_pos];
  const auto out_f = out.f32();
  double loss = 0.0;
  grad[out_pos].assign(out_f.size(), 0.0f);
  if (g.task.is_classification()) {
    double m = -std::numeric_limits<double>::infinity();
    for (float v : out_f) m = std::max(m, static_cast<double>(v));
    std::vector<double> p(out_f.size());
    double s = 0;
    for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] = std::exp(out_f[i] - m));
    const auto label = static_cast<std::size_t>(target);
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] /= s;
      grad[out_pos][i] = static_cast<float>(p[i] - (i == label ? 1.0 : 0.0));
    }
    loss = -std::log(std::max(p[label], 1e-300));
  } else {
    const double diff = out_f[0] - target / target_scale;
    grad[out_pos][0] = static_cast<float>(diff);
    loss = 0.5 * diff * diff;
  }

  for (std::size_t i = n; i-- > 0;) {
    if (grad[i].empty()) continue;
    const Node& node = g.nodes[i];
    const auto& dy = grad[i];
    const auto y = trace.outputs[i].f32();
    const auto in_pos = [&](std::size_t k) { return exec.position(node.inputs[k]); };
    switch (node.kind) {
      case OpKind::Input:
      case OpKind::Constant: break;
      case OpKind::FullyConnected: {
        const auto p = in_pos(0);
        const auto x = trace.outputs[p].f32();
        const auto& w = g.weights.at(*node.weights_ref);
        const auto in = w.shape[0], outn = w.shape[1];
        auto& gw = wgrad[*node.weights_ref];
        gw.resize(w.values.size(), 0.0);
        add_grad(grad[p], x.size());
        const auto rows = static_cast<std::int64_t>(x.size()) / in;
        for (std::int64_t r = 0; r < rows; ++r)
          for (std::int64_t a = 0; a < in; ++a) {
            const double xv = x[r * in + a];
            double gx = 0;
            for (std::int64_t o = 0; o < outn; ++o) {
              const double d = dy[r * outn + o];
              gw[a * outn + o] += xv * d;
              gx += w.values[a * outn + o] * d;
            }
            grad[p][r * in + a] += static_cast<float>(gx);
          }
        break;
      }
      case OpKind::Conv2D: {
        const auto p = in_pos(0);
        const auto x = trace.outputs[p].f32();
        const auto& xs = trace.outputs[p].shape();
        const auto& ys = node.output_shape;
        const auto& w = g.weights.at(*node.weights_ref);
        const auto H = xs[1], W = xs[2], C = xs[3];
        const auto KH = w.shape[0], KW = w.shape[1], CO = w.shape[3];
        const auto HO = ys[1], WO = ys[2];
        const int stride = node.attrs.stride;
        std::int64_t pt = 0, pl = 0;
        if (node.attrs.padding == Padding::Same) {
          pt = std::max<std::int64_t>((HO - 1) * stride + KH - H, 0) / 2;
          pl = std::max<std::int64_t>((WO - 1) * stride + KW - W, 0) / 2;
        }
        auto& gw = wgrad[*node.weights_ref];
        gw.resize(w.values.size(), 0.0);
        add_grad(grad[p], x.size());
        for (std::int64_t oh = 0; oh < HO; ++oh)
          for (std::int64_t ow = 0; ow < WO; ++ow) {
            const float* d = dy.data() + (oh * WO + ow) * CO;
            for (std::int64_t kh = 0; kh < KH; ++kh) {
              const auto ih = oh * stride - pt + kh;
              if (ih < 0 || ih >= H) continue;
              for (std::int64_t kw = 0; kw < KW; ++kw) {
                const auto iw = ow * stride - pl + kw;
                if (iw < 0 || iw >= W) continue;
                for (std::int64_t ci = 0; ci < C; ++ci) {
                  const double xv = x[(ih * W + iw) * C + ci];
                  const auto base = ((kh * KW + kw) * C + ci) * CO;
                  double gx = 0;
                  for (std::int64_t co = 0; co < CO; ++co) {
                    gw[base + co] += xv * d[co];
                    gx += w.values[base + co] * d[co];
                  }
                  grad[p][(ih * W + iw) * C + ci] += static_cast<float>(gx);
                }
              }
            }
          }
        break;
      }
      case OpKind::BiasAdd: {
        const auto p = in_pos(0);
        auto& gb = wgrad[*node.weights_ref];
        const auto c = static_cast<std::size_t>(g.weights.at(*node.weights_ref).shape[0]);
        gb.resize(c, 0.0);
        add_grad(grad[p], dy.size());
        for (std::size_t k = 0; k < dy.size(); ++k) {
          gb[k % c] += dy[k];
          grad[p][k] += dy[k];
        }
        break;
      }
      case OpKind::ReLU:
      case OpKind::Tanh:
      case OpKind::Atan:
      case OpKind::Clip:
      case OpKind::Reshape: {
        const auto p = in_pos(0);
        const auto x = trace.outputs[p].f32();
        add_grad(grad[p], dy.size());
        for (std::size_t k = 0; k < dy.size(); ++k) {
          double d = dy[k];
          switch (node.kind) {
            case OpKind::ReLU: d = x[k] > 0 ? d : 0.0; break;
            case OpKind::Tanh: d *= 1.0 - static_cast<double>(y[k]) * y[k]; break;
            case OpKind::Atan: d /= 1.0 + static_cast<double>(x[k]) * x[k]; break;
            case OpKind::Clip: d = (x[k] >= node.attrs.low && x[k] <= node.attrs.up) ? d : 0.0; break;
            default: break;
          }
          grad[p][k] += static_cast<float>(d);
        }
        break;
      }
      case OpKind::Softmax: {
        const auto p = in_pos(0);
        const auto last = static_cast<std::size_t>(node.output_shape.back());
        add_grad(grad[p], dy.size());
        for (std::size_t r = 0; r < dy.size() / last; ++r) {
          double dot = 0;
          for (std::size_t j = 0; j < last; ++j) dot += static_cast<double>(dy[r * last + j]) * y[r * last + j];
          for (std::size_t j = 0; j < last; ++j)
            grad[p][r * last + j] += static_cast<float>(y[r * last + j] * (dy[r * last + j] - dot));
        }
        break;
      }
      case OpKind::MaxPool:
      case OpKind::AvgPool: {
        const auto p = in_pos(0);
        const auto x = trace.outputs[p].f32();
        const auto& xs = trace.outputs[p].shape();
        const auto& ys = node.output_shape;
        const auto W = xs[2], C = xs[3], HO = ys[1], WO = ys[2];
        const int win = node.attrs.window, s = node.attrs.stride;
        add_grad(grad[p], x.size());
        for (std::int64_t oh = 0; oh < HO; ++oh)
          for (std::int64_t ow = 0; ow < WO; ++ow)
            for (std::int64_t c = 0; c < C; ++c) {
              const float d = dy[(oh * WO + ow) * C + c];
              const auto at = [&](int kh, int kw) { return ((oh * s + kh) * W + (ow * s + kw)) * C + c; };
              if (node.kind == OpKind::AvgPool) {
                for (int kh = 0; kh < win; ++kh)
                  for (int kw = 0; kw < win; ++kw) grad[p][at(kh, kw)] += d / static_cast<float>(win * win);
              } else {
                auto best = at(0, 0);
                for (int kh = 0; kh < win; ++kh)
                  for (int kw = 0; kw < win; ++kw)
                    if (x[at(kh, kw)] > x[best]) best = at(kh, kw);
                grad[p][best] += d;
              }
            }
        break;
      }
      case OpKind::Concat: {
        const auto rank = static_cast<int>(node.output_shape.size());
        const int axis = node.attrs.axis < 0 ? node.attrs.axis + rank : node.attrs.axis;
        std::int64_t outer = 1;
        for (int d = 0; d < axis; ++d) outer *= node.output_shape[d];
        std::size_t r = 0;
        for (std::int64_t o = 0; o < outer; ++o)
          for (std::size_t k = 0; k < node.inputs.size(); ++k) {
            const auto p = in_pos(k);
            const auto total = trace.outputs[p].size();
            add_grad(grad[p], total);
            const auto chunk = total / static_cast<std::size_t>(outer);
            for (std::size_t j = 0; j < chunk; ++j) grad[p][o * chunk + j] += dy[r++];
          }
        break;
      }
    }
  }
  return loss;
}

}  // namespace detail

/// Trains `spec.arch` on `data`. Throws Error when the loss becomes NaN.
inline TrainResult train(const TrainSpec& spec, const Dataset& data) {
  if (data.size() == 0) throw Error("training set is empty");
  if (spec.batch == 0 || spec.epochs < 1) throw Error("batch and epochs must be positive");
  TrainResult res;
  res.graph = build_architecture(spec.arch, spec.seed, data.sample_shape, spec.classes, spec.activation, spec.unit);
  const bool degrees_regression = !res.graph.task.is_classification() && res.graph.task.unit == AngleUnit::Degrees;
  // Degree targets are learned at 1/30 scale; the scale is folded into the
  // last FullyConnected and BiasAdd afterwards.
  const double target_scale = degrees_regression ? 30.0 : 1.0;
  const auto to_target = [&](double y) {
    return res.graph.task.unit == AngleUnit::Radians && !res.graph.task.is_classification()
               ? y * std::numbers::pi / 180.0
               : y;
  };
  const std::size_t n = spec.train_samples ? std::min(spec.train_samples, data.size()) : data.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    Rng rng = make_rng(spec.seed, 0xe90c0000ull + static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = spec.lr / (1.0 + spec.decay * epoch);
    double total = 0;
    for (std::size_t b = 0; b < n; b += spec.batch) {
      const auto end = std::min(n, b + spec.batch);
      const Executor exec(res.graph, NumericFormat::float32());
      std::map<std::string, std::vector<double>> wgrad;
      for (std::size_t k = b; k < end; ++k)
        total += detail::backprop_sample(exec, data.sample(order[k]), to_target(data.y[order[k]]), target_scale, wgrad);
      const double step = lr / static_cast<double>(end - b);
      for (auto& [name, gw] : wgrad) {
        auto& w = res.graph.weights.at(name).values;
        for (std::size_t k = 0; k < w.size(); ++k) w[k] = static_cast<float>(w[k] - step * gw[k]);
      }
    }
    const double mean = total / static_cast<double>(n);
    if (!std::isfinite(mean)) throw Error("training diverged: loss is NaN at epoch " + std::to_string(epoch));
    res.epoch_loss.push_back(mean);
  }
  if (degrees_regression) {
    std::string last_fc, last_bias;
    for (const auto& node : res.graph.nodes) {
      if (node.kind == OpKind::FullyConnected) last_fc = *node.weights_ref;
      if (node.kind == OpKind::BiasAdd) last_bias = *node.weights_ref;
    }
    for (auto* name : {&last_fc, &last_bias})
      for (auto& v : res.graph.weights.at(*name).values) v = static_cast<float>(v * target_scale);
  }
  res.graph = infer_shapes(std::move(res.graph));
  return res;
}

}  // namespace ranger::zoo
