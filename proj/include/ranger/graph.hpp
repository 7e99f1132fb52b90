// SPDX-License-Identifier: Apache-2.0
//
// Dataflow-graph IR: operator vocabulary, nodes, task description and
// shape inference. Graphs are feedforward by construction: a node may only
// read nodes that appear before it in the list.
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ranger/error.hpp"
#include "ranger/numerics.hpp"
#include "ranger/tensor.hpp"

namespace ranger {

using NodeId = std::int32_t;

enum class OpKind : std::uint8_t {
  Input,
  Constant,
  Conv2D,
  FullyConnected,
  BiasAdd,
  ReLU,
  Tanh,
  Atan,
  MaxPool,
  AvgPool,
  Reshape,
  Concat,
  Softmax,
  Clip,
};

inline constexpr std::array<std::pair<OpKind, std::string_view>, 14> kOpKindNames{{
    {OpKind::Input, "Input"},
    {OpKind::Constant, "Constant"},
    {OpKind::Conv2D, "Conv2D"},
    {OpKind::FullyConnected, "FullyConnected"},
    {OpKind::BiasAdd, "BiasAdd"},
    {OpKind::ReLU, "ReLU"},
    {OpKind::Tanh, "Tanh"},
    {OpKind::Atan, "Atan"},
    {OpKind::MaxPool, "MaxPool"},
    {OpKind::AvgPool, "AvgPool"},
    {OpKind::Reshape, "Reshape"},
    {OpKind::Concat, "Concat"},
    {OpKind::Softmax, "Softmax"},
    {OpKind::Clip, "Clip"},
}};

constexpr std::string_view to_string(OpKind kind) {
  for (const auto& [k, name] : kOpKindNames)
    if (k == kind) return name;
  return "?";
}

inline OpKind parse_op_kind(std::string_view name) {
  for (const auto& [k, n] : kOpKindNames)
    if (n == name) return k;
  throw GraphError("unknown op kind '" + std::string(name) + "'");
}

/// Activation layers: the anchors for range restriction.
constexpr bool is_activation(OpKind kind) { return kind == OpKind::ReLU || kind == OpKind::Tanh; }

/// Operators whose output range is inherited from a bounded input.
constexpr bool extends_bound(OpKind kind) {
  return kind == OpKind::MaxPool || kind == OpKind::AvgPool || kind == OpKind::Reshape ||
         kind == OpKind::Concat;
}

/// Kinds that carry a weights blob entry.
constexpr bool uses_weights(OpKind kind) {
  return kind == OpKind::Conv2D || kind == OpKind::FullyConnected || kind == OpKind::BiasAdd ||
         kind == OpKind::Constant;
}

/// Operators computed at inference time (fault sites live on these).
constexpr bool is_operator(OpKind kind) { return kind != OpKind::Input && kind != OpKind::Constant; }

enum class Padding : std::uint8_t { Valid, Same };

/// Per-kind attributes; only the fields relevant to a node's kind are used.
struct OpAttrs {
  Shape shape;         // Input: input shape. Reshape: target shape.
  int stride = 1;      // Conv2D, MaxPool, AvgPool
  int window = 2;      // MaxPool, AvgPool
  Padding padding = Padding::Valid;  // Conv2D
  int axis = -1;       // Concat
  double low = 0.0;    // Clip
  double up = 0.0;     // Clip
  CorrectionPolicy policy;  // Clip

  friend bool operator==(const OpAttrs&, const OpAttrs&) = default;
};

struct Node {
  NodeId id = 0;
  OpKind kind = OpKind::Input;
  OpAttrs attrs;
  std::vector<NodeId> inputs;
  std::optional<std::string> weights_ref;
  Shape output_shape;

  friend bool operator==(const Node&, const Node&) = default;
};

enum class AngleUnit : std::uint8_t { Degrees, Radians };

struct TaskSpec {
  enum class Kind : std::uint8_t { Classification, Regression };

  Kind kind = Kind::Classification;
  int num_classes = 0;
  int topk = 1;
  std::vector<double> sdc_thresholds;  // degrees, ascending
  AngleUnit unit = AngleUnit::Degrees;  // unit of the model output

  static TaskSpec classification(int num_classes, int topk = 1) {
    TaskSpec t;
    t.kind = Kind::Classification;
    t.num_classes = num_classes;
    t.topk = topk;
    return t;
  }

  static TaskSpec regression(std::vector<double> thresholds = {15, 30, 60, 120},
                             AngleUnit unit = AngleUnit::Degrees) {
    TaskSpec t;
    t.kind = Kind::Regression;
    t.sdc_thresholds = std::move(thresholds);
    t.unit = unit;
    return t;
  }

  bool is_classification() const { return kind == Kind::Classification; }

  void validate() const {
    if (is_classification()) {
      if (num_classes < 1) throw GraphError("classification task needs num_classes >= 1");
      if (topk < 1 || topk > num_classes) throw GraphError("topk must be in [1, num_classes]");
      return;
    }
    if (sdc_thresholds.empty()) throw GraphError("regression task needs at least one threshold");
    for (std::size_t i = 0; i < sdc_thresholds.size(); ++i) {
      if (!(sdc_thresholds[i] > 0)) throw GraphError("SDC thresholds must be strictly positive");
      if (i && !(sdc_thresholds[i] > sdc_thresholds[i - 1]))
        throw GraphError("SDC thresholds must be sorted ascending");
    }
  }

  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

/// Weight payloads are stored as float32 regardless of execution format.
struct WeightArray {
  Shape shape;
  std::vector<float> values;

  friend bool operator==(const WeightArray&, const WeightArray&) = default;
};

struct Graph {
  std::vector<Node> nodes;  // topological order
  NodeId output_id = -1;
  TaskSpec task;
  std::map<std::string, WeightArray> weights;

  std::optional<std::size_t> position_of(NodeId id) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i].id == id) return i;
    return std::nullopt;
  }

  const Node& node(NodeId id) const {
    auto pos = position_of(id);
    if (!pos) throw GraphError("node " + std::to_string(id) + " does not exist");
    return nodes[*pos];
  }

  const Node& output_node() const { return node(output_id); }

  NodeId next_id() const {
    NodeId next = 0;
    for (const auto& n : nodes) next = std::max(next, n.id + 1);
    return next;
  }

  const Node& input_node() const {
    for (const auto& n : nodes)
      if (n.kind == OpKind::Input) return n;
    throw GraphError("graph has no Input node");
  }

  /// Consumers of each node id, in list order.
  std::unordered_map<NodeId, std::vector<NodeId>> consumers() const {
    std::unordered_map<NodeId, std::vector<NodeId>> out;
    for (const auto& n : nodes)
      for (NodeId in : n.inputs) out[in].push_back(n.id);
    return out;
  }

  std::size_t count(OpKind kind) const {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [kind](const Node& n) { return n.kind == kind; }));
  }

  friend bool operator==(const Graph&, const Graph&) = default;
};

namespace detail {

inline std::string node_tag(const Node& n) {
  return "node " + std::to_string(n.id) + " (" + std::string(to_string(n.kind)) + ")";
}

inline std::pair<int, int> arity(OpKind kind) {
  switch (kind) {
    case OpKind::Input:
    case OpKind::Constant: return {0, 0};
    case OpKind::Concat: return {2, 1 << 20};
    default: return {1, 1};
  }
}

inline const WeightArray& weight_for(const Graph& g, const Node& n) {
  if (!n.weights_ref) throw GraphError(node_tag(n) + " is missing its weights reference");
  auto it = g.weights.find(*n.weights_ref);
  if (it == g.weights.end())
    throw GraphError(node_tag(n) + " references unknown weights '" + *n.weights_ref + "'");
  return it->second;
}

inline std::int64_t conv_out_dim(std::int64_t in, std::int64_t k, int stride, Padding pad) {
  if (pad == Padding::Same) return (in + stride - 1) / stride;
  if (in < k) return -1;
  return (in - k) / stride + 1;
}

/// Shape rule for one node given its input shapes.
inline Shape infer_node_shape(const Graph& g, const Node& n, const std::vector<const Shape*>& in) {
  const auto fail = [&](const std::string& why) -> Shape {
    throw GraphError(node_tag(n) + ": " + why);
  };
  switch (n.kind) {
    case OpKind::Input:
      if (n.attrs.shape.empty()) return fail("input shape missing");
      for (auto d : n.attrs.shape)
        if (d <= 0) return fail("input dims must be positive");
      return n.attrs.shape;
    case OpKind::Constant: return weight_for(g, n).shape;
    case OpKind::Conv2D: {
      const Shape& x = *in[0];
      const Shape& w = weight_for(g, n).shape;
      if (x.size() != 4) return fail("Conv2D expects NHWC input, got " + shape_string(x));
      if (w.size() != 4) return fail("Conv2D weights must be [KH,KW,Cin,Cout]");
      if (w[2] != x[3])
        return fail("Conv2D input channels " + std::to_string(x[3]) + " != kernel channels " +
                    std::to_string(w[2]));
      if (n.attrs.stride < 1) return fail("stride must be >= 1");
      const auto h = conv_out_dim(x[1], w[0], n.attrs.stride, n.attrs.padding);
      const auto wd = conv_out_dim(x[2], w[1], n.attrs.stride, n.attrs.padding);
      if (h <= 0 || wd <= 0) return fail("Conv2D window larger than input " + shape_string(x));
      return {x[0], h, wd, w[3]};
    }
    case OpKind::FullyConnected: {
      const Shape& x = *in[0];
      const Shape& w = weight_for(g, n).shape;
      if (x.size() != 2) return fail("FullyConnected expects [N,features], got " + shape_string(x));
      if (w.size() != 2 || w[0] != x[1])
        return fail("FullyConnected weights " + shape_string(w) + " incompatible with input " +
                    shape_string(x));
      return {x[0], w[1]};
    }
    case OpKind::BiasAdd: {
      const Shape& x = *in[0];
      const Shape& b = weight_for(g, n).shape;
      if (x.empty() || b.size() != 1 || b[0] != x.back())
        return fail("bias " + shape_string(b) + " incompatible with input " + shape_string(x));
      return x;
    }
    case OpKind::ReLU:
    case OpKind::Tanh:
    case OpKind::Atan:
    case OpKind::Softmax: return *in[0];
    case OpKind::Clip:
      if (n.attrs.low > n.attrs.up) return fail("clip bounds inverted");
      return *in[0];
    case OpKind::MaxPool:
    case OpKind::AvgPool: {
      const Shape& x = *in[0];
      if (x.size() != 4) return fail("pooling expects NHWC input, got " + shape_string(x));
      if (n.attrs.window < 1 || n.attrs.stride < 1) return fail("window and stride must be >= 1");
      const auto h = conv_out_dim(x[1], n.attrs.window, n.attrs.stride, Padding::Valid);
      const auto w = conv_out_dim(x[2], n.attrs.window, n.attrs.stride, Padding::Valid);
      if (h <= 0 || w <= 0) return fail("pooling window larger than input " + shape_string(x));
      return {x[0], h, w, x[3]};
    }
    case OpKind::Reshape: {
      const Shape& t = n.attrs.shape;
      if (t.empty()) return fail("reshape target missing");
      for (auto d : t)
        if (d <= 0) return fail("reshape dims must be positive");
      if (element_count(t) != element_count(*in[0]))
        return fail("cannot reshape " + shape_string(*in[0]) + " to " + shape_string(t));
      return t;
    }
    case OpKind::Concat: {
      const Shape& first = *in[0];
      const auto rank = static_cast<int>(first.size());
      int axis = n.attrs.axis < 0 ? n.attrs.axis + rank : n.attrs.axis;
      if (axis < 0 || axis >= rank) return fail("concat axis out of range");
      Shape out = first;
      out[axis] = 0;
      for (const Shape* s : in) {
        if (static_cast<int>(s->size()) != rank) return fail("concat inputs differ in rank");
        for (int d = 0; d < rank; ++d)
          if (d != axis && (*s)[d] != first[d])
            return fail("concat inputs " + shape_string(first) + " and " + shape_string(*s) +
                        " differ outside axis " + std::to_string(axis));
        out[axis] += (*s)[axis];
      }
      return out;
    }
  }
  return fail("unhandled kind");
}

}  // namespace detail

/// Checks structural invariants and recomputes every output shape. Throws
/// GraphError naming the offending node.
inline Graph infer_shapes(Graph g) {
  if (g.nodes.empty()) throw GraphError("no output node: graph is empty");
  g.task.validate();
  std::unordered_map<NodeId, std::size_t> seen;
  std::size_t inputs = 0;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    Node& n = g.nodes[i];
    if (seen.count(n.id)) throw GraphError("duplicate node id " + std::to_string(n.id));
    const auto [lo, hi] = detail::arity(n.kind);
    const auto argc = static_cast<int>(n.inputs.size());
    if (argc < lo || argc > hi)
      throw GraphError(detail::node_tag(n) + " has " + std::to_string(argc) + " inputs");
    std::vector<const Shape*> in_shapes;
    for (NodeId in : n.inputs) {
      auto it = seen.find(in);
      if (it == seen.end()) {
        bool later = std::any_of(g.nodes.begin() + static_cast<std::ptrdiff_t>(i), g.nodes.end(),
                                 [in](const Node& m) { return m.id == in; });
        throw GraphError(detail::node_tag(n) + ": " +
                         (later ? "forward reference to node " : "dangling reference to node ") +
                         std::to_string(in));
      }
      in_shapes.push_back(&g.nodes[it->second].output_shape);
    }
    if (uses_weights(n.kind)) detail::weight_for(g, n);
    if (n.kind == OpKind::Input) ++inputs;
    n.output_shape = detail::infer_node_shape(g, n, in_shapes);
    seen.emplace(n.id, i);
  }
  if (inputs != 1) throw GraphError("graph must have exactly one Input node");
  if (!seen.count(g.output_id))
    throw GraphError("no output node: output id " + std::to_string(g.output_id) + " not in graph");
  for (const auto& [name, w] : g.weights)
    if (static_cast<std::size_t>(element_count(w.shape)) != w.values.size())
      throw GraphError("weights '" + name + "' payload does not match its shape");
  return g;
}

/// Throws unless the graph satisfies every invariant with its current shapes.
inline void validate(const Graph& g) {
  Graph checked = infer_shapes(g);
  for (std::size_t i = 0; i < g.nodes.size(); ++i)
    if (checked.nodes[i].output_shape != g.nodes[i].output_shape)
      throw GraphError(detail::node_tag(g.nodes[i]) + ": stored shape " +
                       shape_string(g.nodes[i].output_shape) + " != inferred " +
                       shape_string(checked.nodes[i].output_shape));
}

/// Convenience construction of graphs in topological order.
class GraphBuilder {
 public:
  explicit GraphBuilder(TaskSpec task = TaskSpec::classification(2)) { graph_.task = std::move(task); }

  NodeId input(Shape shape) {
    Node n = make(OpKind::Input, {});
    n.attrs.shape = std::move(shape);
    return push(std::move(n));
  }

  NodeId conv2d(NodeId x, const std::string& name, WeightArray kernel, int stride = 1,
                Padding padding = Padding::Valid) {
    Node n = make(OpKind::Conv2D, {x});
    n.attrs.stride = stride;
    n.attrs.padding = padding;
    return push_weighted(std::move(n), name, std::move(kernel));
  }

  NodeId fully_connected(NodeId x, const std::string& name, WeightArray w) {
    return push_weighted(make(OpKind::FullyConnected, {x}), name, std::move(w));
  }

  NodeId bias_add(NodeId x, const std::string& name, WeightArray b) {
    return push_weighted(make(OpKind::BiasAdd, {x}), name, std::move(b));
  }

  NodeId constant(const std::string& name, WeightArray value) {
    return push_weighted(make(OpKind::Constant, {}), name, std::move(value));
  }

  NodeId unary(OpKind kind, NodeId x) { return push(make(kind, {x})); }
  NodeId relu(NodeId x) { return unary(OpKind::ReLU, x); }
  NodeId tanh(NodeId x) { return unary(OpKind::Tanh, x); }
  NodeId atan(NodeId x) { return unary(OpKind::Atan, x); }
  NodeId softmax(NodeId x) { return unary(OpKind::Softmax, x); }

  NodeId max_pool(NodeId x, int window, int stride) { return pool(OpKind::MaxPool, x, window, stride); }
  NodeId avg_pool(NodeId x, int window, int stride) { return pool(OpKind::AvgPool, x, window, stride); }

  NodeId reshape(NodeId x, Shape target) {
    Node n = make(OpKind::Reshape, {x});
    n.attrs.shape = std::move(target);
    return push(std::move(n));
  }

  NodeId concat(std::vector<NodeId> xs, int axis) {
    Node n = make(OpKind::Concat, std::move(xs));
    n.attrs.axis = axis;
    return push(std::move(n));
  }

  NodeId clip(NodeId x, double low, double up, CorrectionPolicy policy = CorrectionPolicy::to_bound()) {
    Node n = make(OpKind::Clip, {x});
    n.attrs.low = low;
    n.attrs.up = up;
    n.attrs.policy = policy;
    return push(std::move(n));
  }

  /// Finalizes with shape inference; the last node is the output unless given.
  Graph build(std::optional<NodeId> output = std::nullopt) && {
    graph_.output_id = output.value_or(graph_.nodes.empty() ? -1 : graph_.nodes.back().id);
    return infer_shapes(std::move(graph_));
  }

 private:
  Node make(OpKind kind, std::vector<NodeId> inputs) {
    Node n;
    n.id = next_++;
    n.kind = kind;
    n.inputs = std::move(inputs);
    return n;
  }

  NodeId push(Node n) {
    graph_.nodes.push_back(std::move(n));
    return graph_.nodes.back().id;
  }

  NodeId push_weighted(Node n, const std::string& name, WeightArray w) {
    n.weights_ref = name;
    graph_.weights[name] = std::move(w);
    return push(std::move(n));
  }

  NodeId pool(OpKind kind, NodeId x, int window, int stride) {
    Node n = make(kind, {x});
    n.attrs.window = window;
    n.attrs.stride = stride;
    return push(std::move(n));
  }

  Graph graph_;
  NodeId next_ = 0;
};

}  // namespace ranger
