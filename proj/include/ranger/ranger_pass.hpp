// SPDX-License-Identifier: Apache-2.0
//
// Range-restriction instrumentation: a Clip after every activation layer and
// after every bound-extension op whose inputs are all bounded.
#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ranger/graph.hpp"
#include "ranger/profiler.hpp"

namespace ranger {

/// How far activation bounds propagate through bound-extension ops.
enum class Extension : std::uint8_t {
  OneHop,      // only the immediate successor of an activation
  Transitive,  // along any chain of MaxPool/AvgPool/Reshape/Concat
};

inline std::string_view to_string(Extension e) { return e == Extension::OneHop ? "one-hop" : "transitive"; }

inline Extension parse_extension(std::string_view text) {
  if (text == "one-hop") return Extension::OneHop;
  if (text == "transitive") return Extension::Transitive;
  throw Error("unknown extension mode '" + std::string(text) + "' (expected one-hop or transitive)");
}

/// Bound assigned to each node of `g` that will be followed by a Clip.
/// Keys are original node ids.
inline std::unordered_map<NodeId, Bound> assign_bounds(const Graph& g, const BoundSet& bounds,
                                                       Extension extension = Extension::Transitive) {
  std::unordered_map<NodeId, Bound> out;
  for (const auto& n : g.nodes) {
    if (is_activation(n.kind)) {
      auto it = bounds.act_bounds.find(n.id);
      if (it == bounds.act_bounds.end()) throw Error("missing bound for node " + std::to_string(n.id));
      if (it->second.low > it->second.up) throw Error("bound for node " + std::to_string(n.id) + " has low > up");
      out[n.id] = it->second;
      continue;
    }
    if (!extends_bound(n.kind)) continue;
    // An input qualifies when it is an activation (one-hop) or already
    // bounded (transitive). Every input must qualify, else clipping would
    // alter fault-free values of an unbounded branch.
    std::optional<Bound> merged;
    bool all = true;
    for (NodeId in : n.inputs) {
      const bool direct = is_activation(g.node(in).kind);
      auto it = out.find(in);
      if (it == out.end() || (extension == Extension::OneHop && !direct)) {
        all = false;
        break;
      }
      if (!merged)
        merged = it->second;
      else
        merged = Bound{std::min(merged->low, it->second.low), std::max(merged->up, it->second.up)};
    }
    if (all && merged) out[n.id] = *merged;
  }
  return out;
}

/// True when some activation already feeds a Clip directly.
inline bool is_instrumented(const Graph& g) {
  const auto consumers = g.consumers();
  for (const auto& n : g.nodes) {
    if (!is_activation(n.kind)) continue;
    auto it = consumers.find(n.id);
    if (it == consumers.end()) continue;
    for (NodeId c : it->second)
      if (g.node(c).kind == OpKind::Clip) return true;
  }
  return false;
}

/// Returns a copy of `graph` with a Clip placed directly after every bounded
/// node. Original ids are kept; Clip ids are fresh and ascending. Every
/// consumer of a bounded node, and the graph output, is rewired to its Clip.
inline Graph insert_ranger(const Graph& graph, const BoundSet& bounds,
                           CorrectionPolicy policy = CorrectionPolicy::to_bound(),
                           Extension extension = Extension::Transitive) {
  if (is_instrumented(graph)) throw Error("graph is already instrumented: an activation feeds a Clip");
  const auto assigned = assign_bounds(graph, bounds, extension);
  Graph out;
  out.task = graph.task;
  out.weights = graph.weights;
  out.output_id = graph.output_id;
  out.nodes.reserve(graph.nodes.size() + assigned.size());
  NodeId fresh = graph.next_id();
  std::unordered_map<NodeId, NodeId> redirect;
  for (const auto& original : graph.nodes) {
    Node n = original;
    for (auto& in : n.inputs)
      if (auto it = redirect.find(in); it != redirect.end()) in = it->second;
    out.nodes.push_back(n);
    auto b = assigned.find(n.id);
    if (b == assigned.end()) continue;
    Node clip;
    clip.id = fresh++;
    clip.kind = OpKind::Clip;
    clip.attrs.low = b->second.low;
    clip.attrs.up = b->second.up;
    clip.attrs.policy = policy;
    clip.inputs = {n.id};
    clip.output_shape = n.output_shape;
    redirect[n.id] = clip.id;
    out.nodes.push_back(std::move(clip));
  }
  if (auto it = redirect.find(out.output_id); it != redirect.end()) out.output_id = it->second;
  return infer_shapes(std::move(out));
}

/// Replaces every `from` activation with `to`. Weights are untouched.
inline Graph act_swap(const Graph& graph, OpKind from, OpKind to) {
  if (!is_activation(from) || !is_activation(to))
    throw Error("act_swap needs activation kinds, got " + std::string(to_string(from)) + " -> " +
                std::string(to_string(to)));
  Graph out = graph;
  for (auto& n : out.nodes)
    if (n.kind == from) n.kind = to;
  return infer_shapes(std::move(out));
}

}  // namespace ranger
