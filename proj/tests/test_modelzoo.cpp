// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "ranger/io.hpp"
#include "ranger/modelzoo/datasets.hpp"
#include "ranger/modelzoo/metrics.hpp"
#include "ranger/modelzoo/models.hpp"
#include "ranger/modelzoo/trainer.hpp"

using namespace ranger;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "ranger_test_zoo";
  fs::create_directories(dir);
  return dir / name;
}

TEST(Datasets, SeedReproducibleAndStamped) {
  for (const std::string name : {"digits", "steering", "separable"}) {
    const auto a = zoo::make_dataset(name, 50, 3);
    const auto b = zoo::make_dataset(name, 50, 3);
    const auto c = zoo::make_dataset(name, 50, 4);
    EXPECT_EQ(a.x, b.x) << name;
    EXPECT_EQ(a.y, b.y) << name;
    EXPECT_NE(a.x, c.x) << name;
    EXPECT_EQ(a.generator, name);
    EXPECT_EQ(a.size(), 50u);
    EXPECT_EQ(a.x.size(), 50 * a.sample_elements());
  }
  EXPECT_THROW(zoo::make_dataset("cifar", 1, 1), Error);
}

TEST(Datasets, DigitsAreEightBitImagesWithAllLabels) {
  const auto d = zoo::make_digits(500, 1);
  EXPECT_EQ(d.sample_shape, (Shape{1, 16, 16, 1}));
  for (float v : d.x) {
    ASSERT_GE(v, 0.0f);
    ASSERT_LE(v, 1.0f);
    ASSERT_EQ(static_cast<float>(std::round(v * 255.0) / 255.0), v);
  }
  std::vector<int> seen(10, 0);
  for (double y : d.y) ++seen.at(static_cast<std::size_t>(y));
  for (int c : seen) EXPECT_GT(c, 20);
}

TEST(Datasets, SteeringTargetsInRange) {
  const auto d = zoo::make_steering(300, 2);
  for (double y : d.y) {
    EXPECT_GE(y, -60.0);
    EXPECT_LE(y, 60.0);
  }
  EXPECT_GT(zoo::constant_predictor_rmse(d), 20.0);
}

TEST(Datasets, IdxRoundTripIsExactForDigits) {
  const auto d = zoo::make_digits(40, 5);
  const auto img = scratch("digits-images.idx"), lab = scratch("digits-labels.idx");
  zoo::save_dataset(d, img, lab);
  const auto back = zoo::load_dataset(img, lab);
  EXPECT_EQ(back.sample_shape, d.sample_shape);
  EXPECT_EQ(back.x, d.x);
  EXPECT_EQ(back.y, d.y);
  EXPECT_EQ(read_tensor_file(img).shape, (Shape{40, 16, 16}));
  const auto meta = json::parse(ranger::detail::read_file(img.string() + ".meta.json"));
  EXPECT_EQ(meta["generator"], "digits");
  EXPECT_EQ(meta["version"], zoo::kGeneratorVersion);
  EXPECT_EQ(meta["seed"], 5);
}

TEST(Datasets, RgtnRoundTripForSteering) {
  const auto d = zoo::make_steering(20, 6);
  const auto img = scratch("steer.rgtn"), lab = scratch("steer-labels.rgtn");
  zoo::save_dataset(d, img, lab);
  const auto back = zoo::load_dataset(img, lab);
  EXPECT_EQ(back.sample_shape, d.sample_shape);
  EXPECT_EQ(back.x, d.x);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(back.y[i], static_cast<double>(static_cast<float>(d.y[i])));
}

TEST(Datasets, LabelCountMismatchFails) {
  const auto d = zoo::make_digits(10, 5);
  const auto img = scratch("m.idx"), lab = scratch("m-labels.idx");
  zoo::save_dataset(d, img, lab);
  write_idx(lab, TensorBlob{DType::U8, {9}, std::vector<double>(9, 1)});
  EXPECT_THROW(zoo::load_dataset(img, lab), IoError);
}

TEST(Datasets, SliceAndSamples) {
  const auto d = zoo::make_separable(30, 4, 1);
  const auto s = d.slice(10, 20);
  EXPECT_EQ(s.size(), 10u);
  EXPECT_EQ(s.features(0)[0], d.features(10)[0]);
  EXPECT_EQ(d.samples(25, 40).size(), 5u);
  EXPECT_EQ(d.slice(40, 50).size(), 0u);
}

TEST(Train, TinyMlpSeparatesSeparableData) {
  const auto data = zoo::make_separable(400, 16, 7);
  zoo::TrainSpec spec;
  spec.arch = "tiny-mlp";
  spec.classes = 2;
  spec.epochs = 15;
  spec.lr = 0.05;
  spec.seed = 3;
  const auto res = zoo::train(spec, data);
  EXPECT_EQ(zoo::evaluate_accuracy(res.graph, data).accuracy, 1.0);
  EXPECT_LT(res.epoch_loss.back(), res.epoch_loss.front());
}

TEST(Train, LenetIsDeterministic) {
  const auto data = zoo::make_digits(300, 2);
  zoo::TrainSpec spec;
  spec.epochs = 1;
  const auto a = zoo::train(spec, data), b = zoo::train(spec, data);
  EXPECT_EQ(encode_weights(a.graph.weights), encode_weights(b.graph.weights));
  EXPECT_EQ(manifest_text(a.graph), manifest_text(b.graph));
  spec.seed = 2;
  EXPECT_NE(encode_weights(zoo::train(spec, data).graph.weights), encode_weights(a.graph.weights));
}

TEST(Train, SteerMiniBeatsConstantPredictor) {
  const auto data = zoo::make_steering(2400, 11);
  const auto trn = data.slice(0, 2000), val = data.slice(2000, 2400);
  zoo::TrainSpec spec;
  spec.arch = "steer-mini";
  spec.epochs = 2;
  spec.lr = 0.02;
  const auto res = zoo::train(spec, trn);
  const auto m = zoo::evaluate_accuracy(res.graph, val);
  EXPECT_LT(m.rmse, zoo::constant_predictor_rmse(val));
  EXPECT_LE(m.avg_deviation, m.rmse);
}

TEST(Train, ErrorsAreReported) {
  zoo::TrainSpec spec;
  EXPECT_THROW(zoo::train(spec, zoo::Dataset{}), Error);
  spec.arch = "resnet";
  EXPECT_THROW(zoo::train(spec, zoo::make_digits(4, 1)), Error);
  zoo::TrainSpec wild;
  wild.arch = "steer-mini";
  wild.lr = 1e12;
  wild.decay = 0;
  wild.epochs = 3;
  EXPECT_THROW(zoo::train(wild, zoo::make_steering(64, 1)), Error);
}

TEST(Metrics, SelfComparisonAndOracle) {
  const auto data = zoo::make_steering(50, 3);
  const Graph g = zoo::steer_mini(1);
  const auto a = zoo::evaluate_accuracy(g, data), b = zoo::evaluate_accuracy(g, data, NumericFormat::float32(), 3);
  EXPECT_EQ(a.rmse, b.rmse);
  EXPECT_EQ(a.avg_deviation, b.avg_deviation);
  const auto pred = zoo::predictions(g, data);
  double sq = 0, ab = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    sq += (pred[i] - data.y[i]) * (pred[i] - data.y[i]);
    ab += std::abs(pred[i] - data.y[i]);
  }
  EXPECT_DOUBLE_EQ(a.rmse, std::sqrt(sq / 50));
  EXPECT_DOUBLE_EQ(a.avg_deviation, ab / 50);

  zoo::Dataset flat;
  flat.y = {1, 3};
  EXPECT_DOUBLE_EQ(zoo::constant_predictor_rmse(flat), 1.0);
}

TEST(Models, ArchitecturesValidate) {
  EXPECT_EQ(zoo::lenet_mini(1).output_node().output_shape, (Shape{1, 10}));
  EXPECT_EQ(zoo::steer_mini(1).output_node().output_shape, (Shape{1, 1}));
  const Graph rad = zoo::steer_mini(1, AngleUnit::Radians);
  EXPECT_EQ(rad.output_node().kind, OpKind::Atan);
  EXPECT_EQ(rad.task.unit, AngleUnit::Radians);
  const Graph t = zoo::tiny_mlp(1, {1, 4, 4, 1}, 3, OpKind::Tanh);
  EXPECT_EQ(t.count(OpKind::Tanh), 2u);
  EXPECT_EQ(t.count(OpKind::ReLU), 0u);
  EXPECT_EQ(zoo::lenet_mini(4), zoo::lenet_mini(4));
}

}  // namespace
