// SPDX-License-Identifier: Apache-2.0
//
// Reference inference engine with fault hooks and FLOP accounting.
//
// Float32 kernels accumulate in float in a fixed order (kernel row, kernel
// column, input channel). Fixed-point kernels multiply activations by
// weights quantized with `weight_frac_bits` fractional bits, accumulate
// exactly in 128-bit integers, then round half away from zero and saturate
// into the activation format.
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ranger/graph.hpp"
#include "ranger/numerics.hpp"
#include "ranger/rng.hpp"
#include "ranger/tensor.hpp"

namespace ranger {

/// Bits flipped in one output element.
struct BitUpset {
  std::size_t element_index = 0;
  std::vector<unsigned> bit_positions;

  friend bool operator==(const BitUpset&, const BitUpset&) = default;
};

/// One injected fault: bit flips in the output of a single operator.
/// Single-value faults carry one upset; the multi-value mode spreads one
/// bit per upset over several elements of the same operator.
struct FaultSpec {
  NodeId target_op = -1;
  std::vector<BitUpset> upsets;
  std::uint64_t trial_index = 0;

  static FaultSpec single(NodeId op, std::size_t element, std::vector<unsigned> bits,
                          std::uint64_t trial = 0) {
    return FaultSpec{op, {BitUpset{element, std::move(bits)}}, trial};
  }

  std::size_t element_index() const { return upsets.at(0).element_index; }
  const std::vector<unsigned>& bit_positions() const { return upsets.at(0).bit_positions; }

  friend bool operator==(const FaultSpec&, const FaultSpec&) = default;
};

/// Which nodes a fault may target.
struct FaultPolicy {
  bool allow_clip_targets = false;
  bool exclude_last_fc = false;
};

struct ExecOptions {
  /// Fractional bits of fixed-point weights (stored as 32-bit).
  int weight_frac_bits = 16;
};

struct FlopCount {
  std::vector<std::pair<NodeId, std::uint64_t>> per_node;
  std::uint64_t total = 0;

  std::uint64_t of(NodeId id) const {
    for (const auto& [n, f] : per_node)
      if (n == id) return f;
    return 0;
  }
};

/// Conv2D = 2*KH*KW*Cin*Hout*Wout*Cout, FC = 2*in*out, Clip = 2 per element,
/// element-wise ops = 1 per element, pooling = window^2 per output element,
/// Softmax = 3 per element, data movement = 0.
inline FlopCount count_flops(const Graph& g) {
  FlopCount fc;
  for (const auto& n : g.nodes) {
    const auto out = static_cast<std::uint64_t>(element_count(n.output_shape));
    std::uint64_t f = 0;
    switch (n.kind) {
      case OpKind::Conv2D: {
        const auto& w = g.weights.at(*n.weights_ref).shape;
        f = 2ull * static_cast<std::uint64_t>(w[0] * w[1] * w[2]) * out;
        break;
      }
      case OpKind::FullyConnected: {
        const auto& w = g.weights.at(*n.weights_ref).shape;
        f = 2ull * static_cast<std::uint64_t>(w[0]) * out;
        break;
      }
      case OpKind::Clip: f = 2 * out; break;
      case OpKind::BiasAdd:
      case OpKind::ReLU:
      case OpKind::Tanh:
      case OpKind::Atan: f = out; break;
      case OpKind::MaxPool:
      case OpKind::AvgPool: f = static_cast<std::uint64_t>(n.attrs.window * n.attrs.window) * out; break;
      case OpKind::Softmax: f = 3 * out; break;
      default: break;
    }
    fc.per_node.emplace_back(n.id, f);
    fc.total += f;
  }
  return fc;
}

/// The last FullyConnected node in topological order and everything
/// downstream of it.
inline std::unordered_set<NodeId> last_fc_region(const Graph& g) {
  std::unordered_set<NodeId> region;
  std::optional<std::size_t> last;
  for (std::size_t i = 0; i < g.nodes.size(); ++i)
    if (g.nodes[i].kind == OpKind::FullyConnected) last = i;
  if (!last) return region;
  region.insert(g.nodes[*last].id);
  for (std::size_t i = *last + 1; i < g.nodes.size(); ++i)
    for (NodeId in : g.nodes[i].inputs)
      if (region.count(in)) {
        region.insert(g.nodes[i].id);
        break;
      }
  return region;
}

/// Per-node outputs of one execution.
struct ExecutionTrace {
  std::vector<NodeId> ids;
  std::vector<Tensor> outputs;
  std::optional<FaultSpec> fault_applied;
  std::vector<std::uint64_t> flops;

  const Tensor& output_of(NodeId id) const {
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (ids[i] == id) return outputs[i];
    throw Error("trace has no node " + std::to_string(id));
  }
};

namespace detail {

using wide = __int128;

inline wide shift_round(wide v, int s) {
  if (s <= 0) return v;
  const wide half = wide{1} << (s - 1);
  return v >= 0 ? (v + half) >> s : -((-v + half) >> s);
}

inline std::int64_t div_round(std::int64_t num, std::int64_t den) {
  return num >= 0 ? (2 * num + den) / (2 * den) : -((-2 * num + den) / (2 * den));
}

template <class T, class W>
inline auto mac_term(T x, W w) {
  if constexpr (std::is_same_v<T, float>)
    return x * w;
  else
    return static_cast<wide>(std::int64_t{x} * std::int64_t{w});
}

struct PreparedNode {
  OpKind kind = OpKind::Input;
  std::size_t node_index = 0;
  std::vector<std::size_t> in_pos;
  Shape wshape;
  std::vector<float> wf;          // float weights / bias
  std::vector<std::int32_t> wi;   // fixed weights (weight_frac) or bias (activation format)
  Tensor constant;
  float lo_f = 0, up_f = 0;
  std::int32_t lo_i = 0, up_i = 0;
};

template <class T>
void conv2d_kernel(std::span<const T> x, const Shape& xs, std::span<const std::conditional_t<std::is_same_v<T, float>, float, std::int32_t>> w,
                   const Shape& ws, int stride, Padding pad, std::span<T> y, const Shape& ys,
                   NumericFormat fmt, int wfrac) {
  using Acc = std::conditional_t<std::is_same_v<T, float>, float, wide>;
  const auto H = xs[1], W = xs[2], C = xs[3];
  const auto KH = ws[0], KW = ws[1], CO = ws[3];
  const auto HO = ys[1], WO = ys[2];
  std::int64_t pad_top = 0, pad_left = 0;
  if (pad == Padding::Same) {
    pad_top = std::max<std::int64_t>((HO - 1) * stride + KH - H, 0) / 2;
    pad_left = std::max<std::int64_t>((WO - 1) * stride + KW - W, 0) / 2;
  }
  std::vector<Acc> acc(static_cast<std::size_t>(CO));
  for (std::int64_t oh = 0; oh < HO; ++oh) {
    for (std::int64_t ow = 0; ow < WO; ++ow) {
      std::fill(acc.begin(), acc.end(), Acc{0});
      for (std::int64_t kh = 0; kh < KH; ++kh) {
        const auto ih = oh * stride - pad_top + kh;
        if (ih < 0 || ih >= H) continue;
        for (std::int64_t kw = 0; kw < KW; ++kw) {
          const auto iw = ow * stride - pad_left + kw;
          if (iw < 0 || iw >= W) continue;
          const T* xp = x.data() + (ih * W + iw) * C;
          const auto* wp = w.data() + (kh * KW + kw) * C * CO;
          for (std::int64_t ci = 0; ci < C; ++ci) {
            const T xv = xp[ci];
            if (xv == T{0}) continue;
            const auto* wr = wp + ci * CO;
            for (std::int64_t co = 0; co < CO; ++co) acc[co] += mac_term<T>(xv, wr[co]);
          }
        }
      }
      T* yp = y.data() + (oh * WO + ow) * CO;
      for (std::int64_t co = 0; co < CO; ++co) {
        if constexpr (std::is_same_v<T, float>)
          yp[co] = acc[co];
        else
          yp[co] = saturate_raw(shift_round(acc[co], wfrac), fmt);
      }
    }
  }
}

template <class T>
void fc_kernel(std::span<const T> x, std::span<const std::conditional_t<std::is_same_v<T, float>, float, std::int32_t>> w,
               std::int64_t in, std::int64_t out, std::span<T> y, NumericFormat fmt, int wfrac) {
  using Acc = std::conditional_t<std::is_same_v<T, float>, float, wide>;
  const auto rows = static_cast<std::int64_t>(x.size()) / in;
  std::vector<Acc> acc(static_cast<std::size_t>(out));
  for (std::int64_t r = 0; r < rows; ++r) {
    std::fill(acc.begin(), acc.end(), Acc{0});
    for (std::int64_t i = 0; i < in; ++i) {
      const T xv = x[r * in + i];
      if (xv == T{0}) continue;
      const auto* wr = w.data() + i * out;
      for (std::int64_t o = 0; o < out; ++o) acc[o] += mac_term<T>(xv, wr[o]);
    }
    for (std::int64_t o = 0; o < out; ++o) {
      if constexpr (std::is_same_v<T, float>)
        y[r * out + o] = acc[o];
      else
        y[r * out + o] = saturate_raw(shift_round(acc[o], wfrac), fmt);
    }
  }
}

template <class T>
void pool_kernel(bool is_max, std::span<const T> x, const Shape& xs, int window, int stride, std::span<T> y,
                 const Shape& ys) {
  const auto W = xs[2], C = xs[3], HO = ys[1], WO = ys[2];
  const auto count = static_cast<std::int64_t>(window) * window;
  for (std::int64_t oh = 0; oh < HO; ++oh)
    for (std::int64_t ow = 0; ow < WO; ++ow)
      for (std::int64_t c = 0; c < C; ++c) {
        const auto at = [&](std::int64_t kh, std::int64_t kw) {
          return x[((oh * stride + kh) * W + (ow * stride + kw)) * C + c];
        };
        T result;
        if (is_max) {
          T best = at(0, 0);
          for (int kh = 0; kh < window; ++kh)
            for (int kw = 0; kw < window; ++kw) {
              const T v = at(kh, kw);
              if (!(v <= best)) best = v;  // NaN propagates
            }
          result = best;
        } else if constexpr (std::is_same_v<T, float>) {
          float sum = 0.0f;
          for (int kh = 0; kh < window; ++kh)
            for (int kw = 0; kw < window; ++kw) sum += at(kh, kw);
          result = sum / static_cast<float>(count);
        } else {
          std::int64_t sum = 0;
          for (int kh = 0; kh < window; ++kh)
            for (int kw = 0; kw < window; ++kw) sum += at(kh, kw);
          result = static_cast<std::int32_t>(div_round(sum, count));
        }
        y[(oh * WO + ow) * C + c] = result;
      }
}

}  // namespace detail

/// Executes one graph in one numeric format. Holds its own copy of the graph
/// and of the format-specific prepared weights; `run*` methods are const and
/// safe to call concurrently, each with its own Workspace.
class Executor {
 public:
  /// Scratch buffers for `rerun_with_fault`, owned by one worker.
  class Workspace {
   public:
    Workspace() = default;

   private:
    friend class Executor;
    std::vector<Tensor> buffers;
    std::vector<std::uint8_t> dirty;
  };

  Executor(Graph graph, NumericFormat format, ExecOptions options = {})
      : graph_(infer_shapes(std::move(graph))), format_(format), options_(options) {
    flops_ = count_flops(graph_);
    std::unordered_map<NodeId, std::size_t> pos;
    for (std::size_t i = 0; i < graph_.nodes.size(); ++i) pos.emplace(graph_.nodes[i].id, i);
    for (std::size_t i = 0; i < graph_.nodes.size(); ++i) {
      const Node& n = graph_.nodes[i];
      detail::PreparedNode p;
      p.kind = n.kind;
      p.node_index = i;
      for (NodeId in : n.inputs) p.in_pos.push_back(pos.at(in));
      prepare(n, p);
      prepared_.push_back(std::move(p));
      if (n.id == graph_.output_id) output_pos_ = i;
    }
    position_ = std::move(pos);
    last_fc_ = last_fc_region(graph_);
  }

  const Graph& graph() const { return graph_; }
  NumericFormat format() const { return format_; }
  const FlopCount& flops() const { return flops_; }

  std::size_t position(NodeId id) const {
    auto it = position_.find(id);
    if (it == position_.end()) throw Error("node " + std::to_string(id) + " does not exist");
    return it->second;
  }

  /// Fault-free run retaining every node output.
  ExecutionTrace run(const Tensor& input) const { return execute(input, nullptr); }

  Tensor infer(const Tensor& input) const {
    auto trace = run(input);
    return std::move(trace.outputs[output_pos_]);
  }

  /// Full re-execution with the fault applied to the target's output before
  /// any consumer reads it.
  ExecutionTrace run_with_fault(const Tensor& input, const FaultSpec& fault,
                                const FaultPolicy& policy = {}) const {
    check_fault(fault, policy);
    return execute(input, &fault);
  }

  /// Recomputes only what the fault can reach, reading everything else from
  /// a golden trace of this executor. The returned reference is valid until
  /// the workspace is reused.
  const Tensor& rerun_with_fault(const ExecutionTrace& golden, const FaultSpec& fault, Workspace& ws,
                                 const FaultPolicy& policy = {}) const {
    check_fault(fault, policy);
    const std::size_t n = prepared_.size();
    ws.buffers.resize(n);
    ws.dirty.assign(n, 0);
    const std::size_t start = position(fault.target_op);
    ws.buffers[start] = golden.outputs[start];
    apply_fault(ws.buffers[start], fault);
    ws.dirty[start] = 1;
    std::vector<const Tensor*> args;
    for (std::size_t i = start + 1; i < n; ++i) {
      const auto& p = prepared_[i];
      bool touched = false;
      for (auto in : p.in_pos) touched = touched || ws.dirty[in];
      if (!touched) continue;
      args.clear();
      for (auto in : p.in_pos) args.push_back(ws.dirty[in] ? &ws.buffers[in] : &golden.outputs[in]);
      eval(p, args, nullptr, ws.buffers[i]);
      ws.dirty[i] = ws.buffers[i].bit_equal(golden.outputs[i]) ? 0 : 1;
    }
    return ws.dirty[output_pos_] ? ws.buffers[output_pos_] : golden.outputs[output_pos_];
  }

  /// Validates target and element/bit ranges; throws Error on violation.
  void check_fault(const FaultSpec& fault, const FaultPolicy& policy) const {
    auto it = position_.find(fault.target_op);
    if (it == position_.end()) throw Error("fault target " + std::to_string(fault.target_op) + " does not exist");
    const Node& n = graph_.nodes[it->second];
    if (!is_operator(n.kind))
      throw Error("fault target " + std::to_string(n.id) + " is not an operator");
    if (n.kind == OpKind::Clip && !policy.allow_clip_targets)
      throw Error("fault target " + std::to_string(n.id) + " is a Clip node");
    if (policy.exclude_last_fc && last_fc_.count(n.id))
      throw Error("fault target " + std::to_string(n.id) + " lies in the excluded last FC layer");
    if (fault.upsets.empty()) throw Error("fault has no bit upsets");
    const auto size = static_cast<std::size_t>(element_count(n.output_shape));
    for (const auto& u : fault.upsets) {
      if (u.element_index >= size)
        throw Error("fault element " + std::to_string(u.element_index) + " out of range for node " +
                    std::to_string(n.id) + " with " + std::to_string(size) + " elements");
      if (u.bit_positions.empty()) throw Error("fault upset flips no bits");
      // flip_bits validates width and distinctness
      (void)flip_bits(0, u.bit_positions, format_);
    }
  }

 private:
  void prepare(const Node& n, detail::PreparedNode& p) const {
    switch (n.kind) {
      case OpKind::Conv2D:
      case OpKind::FullyConnected: {
        const auto& w = graph_.weights.at(*n.weights_ref);
        p.wshape = w.shape;
        if (format_.is_float()) {
          p.wf = w.values;
        } else {
          const auto wfmt = NumericFormat::fixed(32, options_.weight_frac_bits);
          p.wi.reserve(w.values.size());
          for (float v : w.values) p.wi.push_back(to_fixed(v, wfmt));
        }
        break;
      }
      case OpKind::BiasAdd: {
        const auto& w = graph_.weights.at(*n.weights_ref);
        p.wshape = w.shape;
        if (format_.is_float())
          p.wf = w.values;
        else
          for (float v : w.values) p.wi.push_back(to_fixed(v, format_));
        break;
      }
      case OpKind::Constant: {
        const auto& w = graph_.weights.at(*n.weights_ref);
        p.constant = Tensor::from_values<float>(w.shape, w.values, format_);
        break;
      }
      case OpKind::Clip:
        p.lo_f = static_cast<float>(n.attrs.low);
        p.up_f = static_cast<float>(n.attrs.up);
        p.lo_i = to_fixed(n.attrs.low, format_);
        p.up_i = to_fixed(n.attrs.up, format_);
        break;
      default: break;
    }
  }

  ExecutionTrace execute(const Tensor& input, const FaultSpec* fault) const {
    const Node& in_node = graph_.input_node();
    if (input.shape() != in_node.output_shape)
      throw Error("input shape " + shape_string(input.shape()) + " does not match Input node shape " +
                  shape_string(in_node.output_shape));
    ExecutionTrace trace;
    trace.outputs.resize(prepared_.size());
    std::vector<const Tensor*> args;
    for (std::size_t i = 0; i < prepared_.size(); ++i) {
      const auto& p = prepared_[i];
      args.clear();
      for (auto a : p.in_pos) args.push_back(&trace.outputs[a]);
      eval(p, args, &input, trace.outputs[i]);
      if (fault && graph_.nodes[i].id == fault->target_op) apply_fault(trace.outputs[i], *fault);
    }
    for (const auto& n : graph_.nodes) trace.ids.push_back(n.id);
    for (const auto& [id, f] : flops_.per_node) trace.flops.push_back(f);
    if (fault) trace.fault_applied = *fault;
    return trace;
  }

  void apply_fault(Tensor& t, const FaultSpec& fault) const {
    for (const auto& u : fault.upsets) t.set_raw(u.element_index, flip_bits(t.raw(u.element_index), u.bit_positions, format_));
  }

  void eval(const detail::PreparedNode& p, const std::vector<const Tensor*>& args, const Tensor* input,
            Tensor& out) const {
    const Node& n = graph_.nodes[p.node_index];
    if (p.kind == OpKind::Input) {
      if (!input) throw Error("input tensor unavailable");
      out = input->converted(format_);
      return;
    }
    if (p.kind == OpKind::Constant) {
      out = p.constant;
      return;
    }
    out.reset(n.output_shape, format_);
    if (format_.is_float())
      eval_typed<float>(p, n, args, out);
    else
      eval_typed<std::int32_t>(p, n, args, out);
  }

  template <class T>
  static std::span<const T> view(const Tensor& t) {
    if constexpr (std::is_same_v<T, float>)
      return t.f32();
    else
      return t.fixed();
  }

  template <class T>
  static std::span<T> view(Tensor& t) {
    if constexpr (std::is_same_v<T, float>)
      return t.f32();
    else
      return t.fixed();
  }

  template <class T>
  void eval_typed(const detail::PreparedNode& p, const Node& n, const std::vector<const Tensor*>& args,
                  Tensor& out) const {
    constexpr bool kFloat = std::is_same_v<T, float>;
    auto y = view<T>(out);
    const auto unary_map = [&](auto&& f) {
      auto x = view<T>(*args[0]);
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
    };
    const auto real_map = [&](double (*f)(double)) {
      unary_map([&](T v) -> T {
        if constexpr (kFloat)
          return static_cast<float>(f(static_cast<double>(v)));
        else
          return to_fixed(f(from_fixed(v, format_)), format_);
      });
    };
    switch (p.kind) {
      case OpKind::Conv2D: {
        if constexpr (kFloat)
          detail::conv2d_kernel<float>(view<T>(*args[0]), args[0]->shape(), std::span<const float>(p.wf), p.wshape,
                                       n.attrs.stride, n.attrs.padding, y, out.shape(), format_, 0);
        else
          detail::conv2d_kernel<std::int32_t>(view<T>(*args[0]), args[0]->shape(),
                                              std::span<const std::int32_t>(p.wi), p.wshape, n.attrs.stride,
                                              n.attrs.padding, y, out.shape(), format_, options_.weight_frac_bits);
        break;
      }
      case OpKind::FullyConnected: {
        if constexpr (kFloat)
          detail::fc_kernel<float>(view<T>(*args[0]), std::span<const float>(p.wf), p.wshape[0], p.wshape[1], y,
                                   format_, 0);
        else
          detail::fc_kernel<std::int32_t>(view<T>(*args[0]), std::span<const std::int32_t>(p.wi), p.wshape[0],
                                          p.wshape[1], y, format_, options_.weight_frac_bits);
        break;
      }
      case OpKind::BiasAdd: {
        auto x = view<T>(*args[0]);
        const auto c = static_cast<std::size_t>(p.wshape[0]);
        for (std::size_t i = 0; i < x.size(); ++i) {
          if constexpr (kFloat)
            y[i] = x[i] + p.wf[i % c];
          else
            y[i] = saturate_raw(std::int64_t{x[i]} + p.wi[i % c], format_);
        }
        break;
      }
      case OpKind::ReLU: unary_map([](T v) -> T { return v < T{0} ? T{0} : v; }); break;
      case OpKind::Tanh: real_map([](double v) { return std::tanh(v); }); break;
      case OpKind::Atan: real_map([](double v) { return std::atan(v); }); break;
      case OpKind::MaxPool:
      case OpKind::AvgPool:
        detail::pool_kernel<T>(p.kind == OpKind::MaxPool, view<T>(*args[0]), args[0]->shape(), n.attrs.window,
                               n.attrs.stride, y, out.shape());
        break;
      case OpKind::Reshape: {
        auto x = view<T>(*args[0]);
        std::copy(x.begin(), x.end(), y.begin());
        break;
      }
      case OpKind::Concat: {
        const auto& os = out.shape();
        const auto rank = static_cast<int>(os.size());
        const int axis = n.attrs.axis < 0 ? n.attrs.axis + rank : n.attrs.axis;
        std::int64_t outer = 1;
        for (int d = 0; d < axis; ++d) outer *= os[d];
        std::size_t w = 0;
        for (std::int64_t o = 0; o < outer; ++o)
          for (const Tensor* a : args) {
            auto x = view<T>(*a);
            const auto chunk = static_cast<std::size_t>(element_count(a->shape()) / outer);
            std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(o * chunk), chunk, y.begin() + static_cast<std::ptrdiff_t>(w));
            w += chunk;
          }
        break;
      }
      case OpKind::Softmax: {
        auto x = view<T>(*args[0]);
        const auto last = static_cast<std::size_t>(out.shape().back());
        std::vector<double> e(last);
        for (std::size_t r = 0; r < x.size() / last; ++r) {
          double m = -std::numeric_limits<double>::infinity();
          for (std::size_t j = 0; j < last; ++j) m = std::max(m, args[0]->value(r * last + j));
          double s = 0;
          for (std::size_t j = 0; j < last; ++j) s += (e[j] = std::exp(args[0]->value(r * last + j) - m));
          for (std::size_t j = 0; j < last; ++j) out.set_value(r * last + j, e[j] / s);
        }
        break;
      }
      case OpKind::Clip: {
        auto x = view<T>(*args[0]);
        const T lo = kFloat ? static_cast<T>(p.lo_f) : static_cast<T>(p.lo_i);
        const T up = kFloat ? static_cast<T>(p.up_f) : static_cast<T>(p.up_i);
        const auto& policy = n.attrs.policy;
        std::optional<Rng> rng;
        for (std::size_t i = 0; i < x.size(); ++i) {
          const T v = x[i];
          const bool below = v < lo, above = v > up;
          if (!below && !above) {
            y[i] = v;
            continue;
          }
          switch (policy.kind) {
            case CorrectionPolicy::Kind::ToBound: y[i] = below ? lo : up; break;
            case CorrectionPolicy::Kind::ToZero: y[i] = T{0}; break;
            case CorrectionPolicy::Kind::RandomInRange:
              if (!rng) rng.emplace(make_rng(policy.seed, static_cast<std::uint64_t>(n.id)));
              out.set_value(i, clip(static_cast<double>(v), n.attrs.low, n.attrs.up, policy, *rng));
              break;
          }
        }
        break;
      }
      default: throw Error("cannot evaluate " + detail::node_tag(n));
    }
  }

  Graph graph_;
  NumericFormat format_;
  ExecOptions options_;
  FlopCount flops_;
  std::vector<detail::PreparedNode> prepared_;
  std::unordered_map<NodeId, std::size_t> position_;
  std::unordered_set<NodeId> last_fc_;
  std::size_t output_pos_ = 0;
};

/// Fault-free inference of one input.
inline Tensor infer(const Graph& graph, const Tensor& input, NumericFormat format = NumericFormat::float32(),
                    ExecOptions options = {}) {
  return Executor(graph, format, options).infer(input);
}

/// Inference with one injected fault; returns the final output and the trace.
inline std::pair<Tensor, ExecutionTrace> infer_with_fault(const Graph& graph, const Tensor& input,
                                                          const FaultSpec& fault, NumericFormat format,
                                                          FaultPolicy policy = {}, ExecOptions options = {}) {
  Executor exec(graph, format, options);
  auto trace = exec.run_with_fault(input, fault, policy);
  Tensor out = trace.output_of(graph.output_id);
  return {std::move(out), std::move(trace)};
}

}  // namespace ranger
