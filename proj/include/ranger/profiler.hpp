// SPDX-License-Identifier: Apache-2.0
//
// Restriction-bound profiling: run fault-free inference over sample data and
// record the value range of every activation layer.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "ranger/engine.hpp"
#include "ranger/io.hpp"
#include "ranger/rng.hpp"

namespace ranger {

struct Bound {
  double low = 0.0;
  double up = 0.0;

  friend bool operator==(const Bound&, const Bound&) = default;
};

/// One (low, up) pair per activation node.
struct BoundSet {
  std::map<NodeId, Bound> act_bounds;
  double percentile = 100.0;
  std::uint64_t sample_count = 0;

  friend bool operator==(const BoundSet&, const BoundSet&) = default;
};

struct ProfileOptions {
  NumericFormat format = NumericFormat::float32();
  /// Values kept per layer when percentile < 100.
  std::size_t reservoir_size = 1'000'000;
  std::uint64_t seed = 0;
  /// Worker threads at percentile 100 (max/min merges are order-free).
  int workers = 1;
};

/// Nearest-rank percentile: the ceil(p/100 * N)-th smallest value.
inline double nearest_rank(std::vector<double> values, double percentile) {
  if (values.empty()) throw Error("percentile of an empty set");
  if (!(percentile > 0.0 && percentile <= 100.0)) throw Error("percentile must lie in (0, 100]");
  const auto n = values.size();
  // Tolerance absorbs representation error in p (e.g. 99.9 * 1000).
  auto rank = static_cast<std::size_t>(std::ceil(percentile * static_cast<double>(n) / 100.0 - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1), values.end());
  return values[rank - 1];
}

namespace detail {

/// Streaming statistics of one activation layer.
struct LayerStats {
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();
  std::vector<double> reservoir;
  std::uint64_t seen = 0;

  void add_extrema(const Tensor& t) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double v = t.value(i);
      min = std::min(min, v);
      max = std::max(max, v);
    }
  }

  void add_sampled(const Tensor& t, std::size_t capacity, Rng& rng) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double v = t.value(i);
      min = std::min(min, v);
      max = std::max(max, v);
      if (reservoir.size() < capacity) {
        reservoir.push_back(v);
      } else {
        std::uniform_int_distribution<std::uint64_t> pick(0, seen);
        const auto j = pick(rng);
        if (j < capacity) reservoir[static_cast<std::size_t>(j)] = v;
      }
      ++seen;
    }
  }

  void merge_extrema(const LayerStats& o) {
    min = std::min(min, o.min);
    max = std::max(max, o.max);
  }
};

inline std::vector<NodeId> activation_nodes(const Graph& g) {
  std::vector<NodeId> ids;
  for (const auto& n : g.nodes)
    if (is_activation(n.kind)) ids.push_back(n.id);
  return ids;
}

}  // namespace detail

/// Derives restriction bounds from fault-free runs over `samples`.
/// ReLU: low = 0, up = percentile of observed values. Tanh: (-1, 1) without
/// sampling.
inline BoundSet profile_bounds(const Graph& graph, std::span<const Tensor> samples, double percentile,
                               const ProfileOptions& options = {}) {
  if (samples.empty()) throw Error("profiling needs at least one sample");
  if (!(percentile > 0.0 && percentile <= 100.0)) throw Error("percentile must lie in (0, 100]");
  const Executor exec(graph, options.format);
  std::vector<NodeId> sampled;
  for (NodeId id : detail::activation_nodes(exec.graph()))
    if (exec.graph().node(id).kind != OpKind::Tanh) sampled.push_back(id);
  std::vector<std::size_t> positions;
  for (NodeId id : sampled) positions.push_back(exec.position(id));

  std::vector<detail::LayerStats> stats(sampled.size());
  if (percentile >= 100.0) {
    const auto workers = static_cast<std::size_t>(std::max(1, options.workers));
    std::vector<std::vector<detail::LayerStats>> partial(workers, std::vector<detail::LayerStats>(sampled.size()));
    const auto body = [&](std::size_t w) {
      for (std::size_t s = w; s < samples.size(); s += workers) {
        const auto trace = exec.run(samples[s]);
        for (std::size_t l = 0; l < positions.size(); ++l) partial[w][l].add_extrema(trace.outputs[positions[l]]);
      }
    };
    if (workers == 1) {
      body(0);
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body, w);
    }
    for (const auto& part : partial)
      for (std::size_t l = 0; l < stats.size(); ++l) stats[l].merge_extrema(part[l]);
  } else {
    Rng rng = make_rng(options.seed, 0x70726f66);
    for (const auto& sample : samples) {
      const auto trace = exec.run(sample);
      for (std::size_t l = 0; l < positions.size(); ++l)
        stats[l].add_sampled(trace.outputs[positions[l]], options.reservoir_size, rng);
    }
  }

  BoundSet out;
  out.percentile = percentile;
  out.sample_count = samples.size();
  for (const auto& n : exec.graph().nodes) {
    if (!is_activation(n.kind)) continue;
    if (n.kind == OpKind::Tanh) {
      out.act_bounds[n.id] = {-1.0, 1.0};
      continue;
    }
    const auto l = static_cast<std::size_t>(std::find(sampled.begin(), sampled.end(), n.id) - sampled.begin());
    const auto& st = stats[l];
    const double up = percentile >= 100.0 ? st.max : nearest_rank(st.reservoir, percentile);
    out.act_bounds[n.id] = {0.0, std::max(0.0, up)};
  }
  return out;
}

inline json bounds_to_json(const BoundSet& b) {
  json bounds = json::object();
  for (const auto& [id, bd] : b.act_bounds) bounds[std::to_string(id)] = json::array({bd.low, bd.up});
  json j;
  j["percentile"] = b.percentile;
  j["sample_count"] = b.sample_count;
  j["bounds"] = std::move(bounds);
  return j;
}

inline BoundSet bounds_from_json(const json& j) {
  BoundSet b;
  try {
    b.percentile = j.at("percentile").get<double>();
    b.sample_count = j.value("sample_count", std::uint64_t{0});
    for (const auto& [key, pair] : j.at("bounds").items()) {
      const auto v = pair.get<std::vector<double>>();
      if (v.size() != 2) throw Error("bound for node " + key + " must be [low, up]");
      if (v[0] > v[1]) throw Error("bound for node " + key + " has low > up");
      b.act_bounds[static_cast<NodeId>(std::stol(key))] = {v[0], v[1]};
    }
  } catch (const json::exception& e) {
    throw Error(std::string("malformed bounds file: ") + e.what());
  }
  return b;
}

inline void save_bounds(const BoundSet& b, const std::filesystem::path& path) {
  detail::write_file(path, bounds_to_json(b).dump(2) + "\n");
}

inline BoundSet load_bounds(const std::filesystem::path& path) {
  try {
    return bounds_from_json(json::parse(detail::read_file(path)));
  } catch (const json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

/// Running per-layer maxima at each checkpoint, normalized by the maximum
/// over all samples.
struct ConvergenceReport {
  std::vector<std::size_t> checkpoints;
  std::vector<NodeId> layers;
  std::vector<std::vector<double>> normalized;  // [layer][checkpoint]

  std::string to_csv() const {
    std::string s = "layer";
    for (auto c : checkpoints) s += "," + std::to_string(c);
    s += "\n";
    for (std::size_t l = 0; l < layers.size(); ++l) {
      s += std::to_string(layers[l]);
      for (double v : normalized[l]) {
        char buf[32];
        std::snprintf(buf, sizeof buf, ",%.6f", v);
        s += buf;
      }
      s += "\n";
    }
    return s;
  }
};

inline ConvergenceReport bound_convergence_report(const Graph& graph, std::span<const Tensor> samples,
                                                  std::vector<std::size_t> checkpoints,
                                                  NumericFormat format = NumericFormat::float32()) {
  const Executor exec(graph, format);
  ConvergenceReport rep;
  rep.layers = detail::activation_nodes(exec.graph());
  std::sort(checkpoints.begin(), checkpoints.end());
  for (auto& c : checkpoints) c = std::min(c, samples.size());
  checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()), checkpoints.end());
  rep.checkpoints = checkpoints;
  std::vector<double> running(rep.layers.size(), -std::numeric_limits<double>::infinity());
  std::vector<std::vector<double>> raw(rep.layers.size());
  std::size_t next = 0;
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const auto trace = exec.run(samples[s]);
    for (std::size_t l = 0; l < rep.layers.size(); ++l) {
      const auto& t = trace.outputs[exec.position(rep.layers[l])];
      for (std::size_t i = 0; i < t.size(); ++i) running[l] = std::max(running[l], t.value(i));
    }
    while (next < checkpoints.size() && checkpoints[next] == s + 1) {
      for (std::size_t l = 0; l < running.size(); ++l) raw[l].push_back(running[l]);
      ++next;
    }
  }
  rep.normalized.resize(rep.layers.size());
  for (std::size_t l = 0; l < rep.layers.size(); ++l) {
    const double global = running[l];
    for (double v : raw[l]) rep.normalized[l].push_back(global > 0.0 ? v / global : 1.0);
  }
  return rep;
}

}  // namespace ranger
