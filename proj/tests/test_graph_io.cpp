// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <nlohmann/json.hpp>

#include "ranger/graph.hpp"
#include "ranger/io.hpp"
#include "ranger/modelzoo/models.hpp"

using namespace ranger;
namespace fs = std::filesystem;

namespace {

const fs::path kData = RANGER_TEST_DATA;

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "ranger_test_graph_io";
  fs::create_directories(dir);
  return dir / name;
}

std::map<std::string, WeightArray> fc_weights() {
  return {{"fc", WeightArray{{4, 2}, {1, 0, 0, 1, 1, 0, 0, 1}}}};
}

nlohmann::json minimal_manifest() {
  return nlohmann::json::parse(R"({
    "nodes": [
      {"id": 0, "kind": "Input", "attrs": {"shape": [1, 4]}, "inputs": [], "weights": null},
      {"id": 1, "kind": "FullyConnected", "attrs": {}, "inputs": [0], "weights": "fc"},
      {"id": 2, "kind": "ReLU", "attrs": {}, "inputs": [1], "weights": null}
    ],
    "output": 2,
    "task": {"kind": "classification", "num_classes": 2, "topk": 1}
  })");
}

// The toy model frozen in tests/data.
Graph golden_graph() {
  GraphBuilder b(TaskSpec::regression({15, 30, 60, 120}));
  const auto x = b.input({1, 4, 4, 1});
  const auto c = b.conv2d(x, "k", WeightArray{{2, 2, 1, 2}, {0.5f, -0.25f, 1, 2, -1, 0.125f, 3, -3}}, 1,
                          Padding::Same);
  const auto r = b.relu(c);
  const auto p = b.max_pool(r, 2, 2);
  const auto k = b.clip(p, 0, 0.1234567890123, CorrectionPolicy::to_zero());
  const auto f = b.reshape(k, {1, 8});
  const auto fc = b.fully_connected(f, "w", WeightArray{{8, 1}, {1, 2, 3, 4, 5, 6, 7, 8}});
  b.atan(fc);
  return std::move(b).build();
}

TEST(Manifest, MinimalGraphLoads) {
  const Graph g = graph_from_manifest(minimal_manifest(), fc_weights());
  EXPECT_EQ(g.nodes.size(), 3u);
  EXPECT_EQ(g.output_node().output_shape, (Shape{1, 2}));
}

TEST(Manifest, ForwardReferenceNamesTheNode) {
  auto m = minimal_manifest();
  m["nodes"][2]["inputs"] = {3};
  m["nodes"].push_back({{"id", 3}, {"kind", "ReLU"}, {"attrs", nlohmann::json::object()}, {"inputs", {1}},
                        {"weights", nullptr}});
  try {
    graph_from_manifest(m, fc_weights());
    FAIL() << "expected GraphError";
  } catch (const GraphError& e) {
    EXPECT_NE(std::string(e.what()).find("forward reference"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("node 2"), std::string::npos) << e.what();
  }
}

TEST(Manifest, DanglingReferenceAndMissingOutput) {
  auto m = minimal_manifest();
  m["nodes"][1]["inputs"] = {9};
  EXPECT_THROW(graph_from_manifest(m, fc_weights()), GraphError);
  auto n = minimal_manifest();
  n.erase("output");
  try {
    graph_from_manifest(n, fc_weights());
    FAIL();
  } catch (const GraphError& e) {
    EXPECT_NE(std::string(e.what()).find("no output node"), std::string::npos);
  }
  auto o = minimal_manifest();
  o["output"] = 7;
  EXPECT_THROW(graph_from_manifest(o, fc_weights()), GraphError);
}

TEST(Manifest, ShapeMismatchNamesTheNode) {
  auto w = fc_weights();
  w["fc"] = WeightArray{{3, 2}, {1, 0, 0, 1, 1, 0}};
  try {
    graph_from_manifest(minimal_manifest(), w);
    FAIL();
  } catch (const GraphError& e) {
    EXPECT_NE(std::string(e.what()).find("node 1"), std::string::npos) << e.what();
  }
}

TEST(Manifest, UnknownWeightsAndKindsFail) {
  EXPECT_THROW(graph_from_manifest(minimal_manifest(), {}), GraphError);
  auto m = minimal_manifest();
  m["nodes"][2]["kind"] = "Gelu";
  EXPECT_THROW(graph_from_manifest(m, fc_weights()), GraphError);
  auto t = minimal_manifest();
  t["task"]["topk"] = 3;
  EXPECT_THROW(graph_from_manifest(t, fc_weights()), GraphError);
}

TEST(Manifest, RoundTripMatchesFrozenGoldenFiles) {
  const Graph g = golden_graph();
  const auto m = scratch("golden.json");
  const auto w = scratch("golden.bin");
  save_model(g, m, w);
  EXPECT_EQ(detail::read_file(m), detail::read_file(kData / "golden_manifest.json"));
  EXPECT_EQ(detail::read_file(w), detail::read_file(kData / "golden_weights.bin"));

  const Graph back = load_model(kData / "golden_manifest.json", kData / "golden_weights.bin");
  EXPECT_EQ(back, g);
  save_model(back, m, w);
  EXPECT_EQ(detail::read_file(m), detail::read_file(kData / "golden_manifest.json"));
}

TEST(Manifest, ClipBoundsKeepFullPrecision) {
  const Graph g = golden_graph();
  const auto text = manifest_text(g);
  EXPECT_NE(text.find("0.1234567890123"), std::string::npos);
  const auto back = graph_from_manifest(nlohmann::json::parse(text), g.weights);
  for (const auto& n : back.nodes)
    if (n.kind == OpKind::Clip) {
      EXPECT_EQ(n.attrs.up, 0.1234567890123);
    }
}

TEST(Manifest, ZooModelsRoundTrip) {
  for (const auto& g : {zoo::lenet_mini(3), zoo::steer_mini(4, AngleUnit::Radians), zoo::toy_mlp(5)}) {
    const auto m = scratch("zoo.json");
    const auto w = default_weights_path(m);
    save_model(g, m, w);
    EXPECT_EQ(load_model(m, w), g);
  }
}

TEST(Manifest, DefaultWeightsPath) { EXPECT_EQ(default_weights_path("a/b/model.json"), fs::path("a/b/model.bin")); }

TEST(Shapes, InferenceRules) {
  GraphBuilder b;
  const auto x = b.input({1, 8, 8, 3});
  const auto c = b.conv2d(x, "k", WeightArray{{3, 3, 3, 4}, std::vector<float>(108, 0.f)});
  const auto s = b.conv2d(c, "k2", WeightArray{{3, 3, 4, 2}, std::vector<float>(72, 0.f)}, 2, Padding::Same);
  const auto p = b.avg_pool(c, 2, 2);
  const auto cat = b.concat({p, p}, -1);
  const auto r = b.reshape(cat, {1, 72});
  Graph g = std::move(b).build(r);
  EXPECT_EQ(g.node(c).output_shape, (Shape{1, 6, 6, 4}));
  EXPECT_EQ(g.node(s).output_shape, (Shape{1, 3, 3, 2}));
  EXPECT_EQ(g.node(p).output_shape, (Shape{1, 3, 3, 4}));
  EXPECT_EQ(g.node(cat).output_shape, (Shape{1, 3, 3, 8}));
  EXPECT_NO_THROW(validate(g));
  g.nodes[2].output_shape = {1, 1};
  EXPECT_THROW(validate(g), GraphError);
}

TEST(Shapes, Errors) {
  {
    GraphBuilder b;
    const auto x = b.input({1, 5});
    b.reshape(x, {1, 4});
    EXPECT_THROW(std::move(b).build(), GraphError);
  }
  {
    GraphBuilder b;
    const auto x = b.input({1, 2, 2, 1});
    b.max_pool(x, 3, 1);
    EXPECT_THROW(std::move(b).build(), GraphError);
  }
  {
    GraphBuilder b;
    const auto x = b.input({1, 2, 2, 1});
    const auto y = b.input({1, 2, 2, 1});
    b.concat({x, y}, 3);
    EXPECT_THROW(std::move(b).build(), GraphError);  // two inputs
  }
  {
    GraphBuilder b;
    const auto x = b.input({1, 2});
    b.clip(x, 1, 0);
    EXPECT_THROW(std::move(b).build(), GraphError);
  }
}

TEST(Weights, BlobLayoutIsFrozen) {
  // "RGWB", count=1, name-length=1, "a", dtype 0, rank 1, dim 2, 1.0f, -2.0f
  const std::string expected("RGWB\x01\0\0\0\x01\0\0\0a\0\x01\0\0\0\x02\0\0\0\0\0\x80\x3f\0\0\0\xc0", 30);
  const std::map<std::string, WeightArray> w{{"a", WeightArray{{2}, {1.0f, -2.0f}}}};
  EXPECT_EQ(encode_weights(w), expected);
  EXPECT_EQ(decode_weights(expected, "mem"), w);
  EXPECT_THROW(decode_weights("RGWX", "mem"), IoError);
  EXPECT_THROW(decode_weights(expected + "x", "mem"), IoError);
  EXPECT_THROW(decode_weights(expected.substr(0, 26), "mem"), IoError);
}

TEST(Tensors, RgtnRoundTripAllDtypes) {
  for (auto dt : {DType::F32, DType::I32, DType::U8}) {
    TensorBlob t{dt, {2, 3}, {0, 1, 2, 3, 4, 255}};
    if (dt != DType::U8) t.values[1] = -7;
    const auto p = scratch("t.rgtn");
    write_rgtn(p, t);
    const auto back = read_tensor_file(p);
    EXPECT_EQ(back.dtype, dt);
    EXPECT_EQ(back.shape, t.shape);
    EXPECT_EQ(back.values, t.values);
  }
}

TEST(Tensors, IdxBigEndianHeader) {
  const TensorBlob t{DType::U8, {2, 2, 2}, {0, 1, 2, 3, 250, 251, 252, 255}};
  const auto bytes = encode_idx(t);
  EXPECT_EQ(bytes.substr(0, 4), std::string("\0\0\x08\x03", 4));
  EXPECT_EQ(bytes.substr(4, 4), std::string("\0\0\0\x02", 4));
  const auto p = scratch("t.idx");
  write_idx(p, t);
  const auto back = read_tensor_file(p);
  EXPECT_EQ(back.shape, t.shape);
  EXPECT_EQ(back.values, t.values);
  EXPECT_THROW(decode_idx(std::string("\0\0\x09\x01\0\0\0\x01\x05", 9), "mem"), IoError);
}

TEST(Tensors, MissingFileIsIoError) { EXPECT_THROW(read_tensor_file(scratch("nope.rgtn")), IoError); }

}  // namespace
