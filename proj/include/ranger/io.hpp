// SPDX-License-Identifier: Apache-2.0
//
// On-disk formats: JSON model manifest, RGWB weights blob, RGTN tensor
// container and MNIST IDX files. All binary integers are little-endian
// except IDX, which is big-endian by definition.
#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ranger/graph.hpp"

namespace ranger {

using json = nlohmann::json;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

class ByteReader {
 public:
  ByteReader(std::string data, std::string source) : data_(std::move(data)), source_(std::move(source)) {}

  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw IoError(source_ + ": truncated at byte " + std::to_string(pos_));
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint32_t u32_le() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{static_cast<std::uint8_t>(data_[pos_ + i])} << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint32_t u32_be() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | static_cast<std::uint8_t>(data_[pos_ + i]);
    pos_ += 4;
    return v;
  }
  float f32_le() { return std::bit_cast<float>(u32_le()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }
  const std::string& source() const { return source_; }

 private:
  std::string data_;
  std::string source_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

inline std::string padding_name(Padding p) { return p == Padding::Same ? "same" : "valid"; }

inline Padding parse_padding(const std::string& s) {
  if (s == "same") return Padding::Same;
  if (s == "valid") return Padding::Valid;
  throw GraphError("unknown padding '" + s + "'");
}

inline json attrs_to_json(const Node& n) {
  json a = json::object();
  switch (n.kind) {
    case OpKind::Input:
    case OpKind::Reshape: a["shape"] = n.attrs.shape; break;
    case OpKind::Conv2D:
      a["stride"] = n.attrs.stride;
      a["padding"] = padding_name(n.attrs.padding);
      break;
    case OpKind::MaxPool:
    case OpKind::AvgPool:
      a["window"] = n.attrs.window;
      a["stride"] = n.attrs.stride;
      break;
    case OpKind::Concat: a["axis"] = n.attrs.axis; break;
    case OpKind::Clip:
      a["low"] = n.attrs.low;
      a["up"] = n.attrs.up;
      a["policy"] = n.attrs.policy.name();
      if (n.attrs.policy.kind == CorrectionPolicy::Kind::RandomInRange) a["seed"] = n.attrs.policy.seed;
      break;
    default: break;
  }
  return a;
}

inline OpAttrs attrs_from_json(OpKind kind, const json& a, NodeId id) {
  OpAttrs attrs;
  const auto need = [&](const char* key) -> const json& {
    if (!a.contains(key))
      throw GraphError("node " + std::to_string(id) + ": missing attribute '" + key + "'");
    return a.at(key);
  };
  switch (kind) {
    case OpKind::Input:
    case OpKind::Reshape: attrs.shape = need("shape").get<Shape>(); break;
    case OpKind::Conv2D:
      attrs.stride = need("stride").get<int>();
      attrs.padding = parse_padding(need("padding").get<std::string>());
      break;
    case OpKind::MaxPool:
    case OpKind::AvgPool:
      attrs.window = need("window").get<int>();
      attrs.stride = need("stride").get<int>();
      break;
    case OpKind::Concat: attrs.axis = need("axis").get<int>(); break;
    case OpKind::Clip:
      attrs.low = need("low").get<double>();
      attrs.up = need("up").get<double>();
      attrs.policy = parse_policy(need("policy").get<std::string>(), a.value("seed", std::uint64_t{0}));
      break;
    default: break;
  }
  return attrs;
}

}  // namespace detail

inline json task_to_json(const TaskSpec& t) {
  json j;
  if (t.is_classification()) {
    j["kind"] = "classification";
    j["num_classes"] = t.num_classes;
    j["topk"] = t.topk;
  } else {
    j["kind"] = "regression";
    j["sdc_thresholds"] = t.sdc_thresholds;
    j["unit"] = t.unit == AngleUnit::Radians ? "radians" : "degrees";
  }
  return j;
}

inline TaskSpec task_from_json(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "classification")
    return TaskSpec::classification(j.at("num_classes").get<int>(), j.value("topk", 1));
  if (kind == "regression") {
    const auto unit = j.value("unit", std::string("degrees"));
    if (unit != "degrees" && unit != "radians") throw GraphError("unknown angle unit '" + unit + "'");
    return TaskSpec::regression(j.at("sdc_thresholds").get<std::vector<double>>(),
                                unit == "radians" ? AngleUnit::Radians : AngleUnit::Degrees);
  }
  throw GraphError("unknown task kind '" + kind + "'");
}

/// Manifest JSON for a graph (weights excluded).
inline json manifest_json(const Graph& g) {
  json nodes = json::array();
  for (const auto& n : g.nodes) {
    json jn;
    jn["id"] = n.id;
    jn["kind"] = std::string(to_string(n.kind));
    jn["attrs"] = detail::attrs_to_json(n);
    jn["inputs"] = n.inputs;
    jn["weights"] = n.weights_ref ? json(*n.weights_ref) : json(nullptr);
    nodes.push_back(std::move(jn));
  }
  json m;
  m["nodes"] = std::move(nodes);
  m["output"] = g.output_id;
  m["task"] = task_to_json(g.task);
  return m;
}

inline std::string manifest_text(const Graph& g) { return manifest_json(g).dump(2) + "\n"; }

/// Builds and validates a graph from a parsed manifest and a weights table.
inline Graph graph_from_manifest(const json& m, std::map<std::string, WeightArray> weights) {
  Graph g;
  try {
    if (!m.contains("nodes") || !m.at("nodes").is_array()) throw GraphError("manifest has no nodes array");
    for (const auto& jn : m.at("nodes")) {
      Node n;
      n.id = jn.at("id").get<NodeId>();
      n.kind = parse_op_kind(jn.at("kind").get<std::string>());
      n.attrs = detail::attrs_from_json(n.kind, jn.value("attrs", json::object()), n.id);
      n.inputs = jn.value("inputs", std::vector<NodeId>{});
      if (jn.contains("weights") && !jn.at("weights").is_null())
        n.weights_ref = jn.at("weights").get<std::string>();
      g.nodes.push_back(std::move(n));
    }
    if (!m.contains("output")) throw GraphError("no output node: manifest lacks 'output'");
    g.output_id = m.at("output").get<NodeId>();
    g.task = task_from_json(m.at("task"));
  } catch (const json::exception& e) {
    throw GraphError(std::string("malformed manifest: ") + e.what());
  }
  g.weights = std::move(weights);
  return infer_shapes(std::move(g));
}

inline std::string encode_weights(const std::map<std::string, WeightArray>& weights) {
  std::string out = "RGWB";
  detail::put_u32(out, static_cast<std::uint32_t>(weights.size()));
  for (const auto& [name, w] : weights) {
    detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    out.push_back(0);  // dtype: float32
    detail::put_u32(out, static_cast<std::uint32_t>(w.shape.size()));
    for (auto d : w.shape) detail::put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : w.values) detail::put_f32(out, v);
  }
  return out;
}

inline std::map<std::string, WeightArray> decode_weights(std::string data, const std::string& source) {
  detail::ByteReader r(std::move(data), source);
  if (r.bytes(4) != "RGWB") throw IoError(source + ": bad magic, expected RGWB");
  const auto count = r.u32_le();
  std::map<std::string, WeightArray> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.bytes(r.u32_le());
    if (r.u8() != 0) throw IoError(source + ": weights '" + name + "' has unsupported dtype");
    WeightArray w;
    const auto rank = r.u32_le();
    for (std::uint32_t d = 0; d < rank; ++d) w.shape.push_back(r.u32_le());
    w.values.resize(static_cast<std::size_t>(element_count(w.shape)));
    for (auto& v : w.values) v = r.f32_le();
    out.emplace(std::move(name), std::move(w));
  }
  if (!r.done()) throw IoError(source + ": trailing bytes after weights");
  return out;
}

inline void save_model(const Graph& g, const std::filesystem::path& manifest_path,
                       const std::filesystem::path& weights_path) {
  validate(g);
  detail::write_file(manifest_path, manifest_text(g));
  detail::write_file(weights_path, encode_weights(g.weights));
}

inline Graph load_model(const std::filesystem::path& manifest_path, const std::filesystem::path& weights_path) {
  json m;
  try {
    m = json::parse(detail::read_file(manifest_path));
  } catch (const json::exception& e) {
    throw GraphError(manifest_path.string() + ": malformed manifest: " + e.what());
  }
  return graph_from_manifest(m, decode_weights(detail::read_file(weights_path), weights_path.string()));
}

/// `model.json` -> `model.bin`.
inline std::filesystem::path default_weights_path(const std::filesystem::path& manifest) {
  auto p = manifest;
  p.replace_extension(".bin");
  return p;
}

// ---------------------------------------------------------------------------
// RGTN tensor container and IDX files.

enum class DType : std::uint8_t { F32 = 0, I32 = 1, U8 = 2 };

/// Loosely typed array read from or written to a tensor file. Every
/// supported dtype is exactly representable as double.
struct TensorBlob {
  DType dtype = DType::F32;
  Shape shape;
  std::vector<double> values;
};

inline std::string encode_rgtn(const TensorBlob& t) {
  std::string out = "RGTN";
  out.push_back(static_cast<char>(t.dtype));
  detail::put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
  for (auto d : t.shape) detail::put_u32(out, static_cast<std::uint32_t>(d));
  for (double v : t.values) {
    switch (t.dtype) {
      case DType::F32: detail::put_f32(out, static_cast<float>(v)); break;
      case DType::I32: detail::put_u32(out, static_cast<std::uint32_t>(static_cast<std::int32_t>(v))); break;
      case DType::U8: out.push_back(static_cast<char>(static_cast<std::uint8_t>(v))); break;
    }
  }
  return out;
}

inline TensorBlob decode_rgtn(std::string data, const std::string& source) {
  detail::ByteReader r(std::move(data), source);
  if (r.bytes(4) != "RGTN") throw IoError(source + ": bad magic, expected RGTN");
  TensorBlob t;
  const auto tag = r.u8();
  if (tag > 2) throw IoError(source + ": unknown dtype tag " + std::to_string(tag));
  t.dtype = static_cast<DType>(tag);
  const auto rank = r.u32_le();
  for (std::uint32_t d = 0; d < rank; ++d) t.shape.push_back(r.u32_le());
  t.values.resize(static_cast<std::size_t>(element_count(t.shape)));
  for (auto& v : t.values) {
    switch (t.dtype) {
      case DType::F32: v = r.f32_le(); break;
      case DType::I32: v = static_cast<std::int32_t>(r.u32_le()); break;
      case DType::U8: v = r.u8(); break;
    }
  }
  if (!r.done()) throw IoError(source + ": trailing bytes after tensor payload");
  return t;
}

/// Unsigned-byte IDX file (MNIST layout: 0x00000803 images, 0x00000801 labels).
inline std::string encode_idx(const TensorBlob& t) {
  std::string out;
  const std::uint32_t magic = 0x00000800u | static_cast<std::uint32_t>(t.shape.size());
  const auto be = [&out](std::uint32_t v) {
    for (int i = 3; i >= 0; --i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  be(magic);
  for (auto d : t.shape) be(static_cast<std::uint32_t>(d));
  for (double v : t.values) out.push_back(static_cast<char>(static_cast<std::uint8_t>(v)));
  return out;
}

inline TensorBlob decode_idx(std::string data, const std::string& source) {
  detail::ByteReader r(std::move(data), source);
  const auto magic = r.u32_be();
  if ((magic & 0xffffff00u) != 0x00000800u)
    throw IoError(source + ": not an unsigned-byte IDX file (magic " + std::to_string(magic) + ")");
  TensorBlob t;
  t.dtype = DType::U8;
  const auto rank = magic & 0xffu;
  if (rank == 0) throw IoError(source + ": IDX rank 0");
  for (std::uint32_t d = 0; d < rank; ++d) t.shape.push_back(r.u32_be());
  t.values.resize(static_cast<std::size_t>(element_count(t.shape)));
  for (auto& v : t.values) v = r.u8();
  if (!r.done()) throw IoError(source + ": trailing bytes after IDX payload");
  return t;
}

inline void write_rgtn(const std::filesystem::path& path, const TensorBlob& t) {
  detail::write_file(path, encode_rgtn(t));
}

inline void write_idx(const std::filesystem::path& path, const TensorBlob& t) {
  detail::write_file(path, encode_idx(t));
}

/// Reads either container, dispatching on the magic bytes.
inline TensorBlob read_tensor_file(const std::filesystem::path& path) {
  std::string data = detail::read_file(path);
  if (data.size() >= 4 && data.compare(0, 4, "RGTN") == 0) return decode_rgtn(std::move(data), path.string());
  return decode_idx(std::move(data), path.string());
}

}  // namespace ranger
