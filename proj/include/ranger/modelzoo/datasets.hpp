// SPDX-License-Identifier: Apache-2.0
//
// Labeled datasets and seed-reproducible synthetic generators: a linearly
// separable vector set, 16x16 handwritten-style digits in MNIST layout, and
// 16x16 lane images labeled with a steering angle in degrees.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "ranger/io.hpp"
#include "ranger/rng.hpp"
#include "ranger/tensor.hpp"

namespace ranger::zoo {

/// Bumped whenever a generator's output changes for a fixed seed.
inline constexpr int kGeneratorVersion = 1;

struct Dataset {
  Shape sample_shape;      // leading dimension 1
  std::vector<float> x;    // size() * sample_elements()
  std::vector<double> y;   // class labels or targets in degrees
  std::string generator;   // empty for loaded files
  std::uint64_t seed = 0;

  std::size_t size() const { return y.size(); }
  std::size_t sample_elements() const { return static_cast<std::size_t>(element_count(sample_shape)); }

  std::span<const float> features(std::size_t i) const {
    return std::span<const float>(x).subspan(i * sample_elements(), sample_elements());
  }

  Tensor sample(std::size_t i, NumericFormat fmt = NumericFormat::float32()) const {
    return Tensor::from_values<float>(sample_shape, features(i), fmt);
  }

  std::vector<Tensor> samples(std::size_t begin, std::size_t end) const {
    std::vector<Tensor> out;
    for (std::size_t i = begin; i < std::min(end, size()); ++i) out.push_back(sample(i));
    return out;
  }

  Dataset slice(std::size_t begin, std::size_t end) const {
    end = std::min(end, size());
    begin = std::min(begin, end);
    Dataset d;
    d.sample_shape = sample_shape;
    d.generator = generator;
    d.seed = seed;
    const auto e = sample_elements();
    d.x.assign(x.begin() + static_cast<std::ptrdiff_t>(begin * e), x.begin() + static_cast<std::ptrdiff_t>(end * e));
    d.y.assign(y.begin() + static_cast<std::ptrdiff_t>(begin), y.begin() + static_cast<std::ptrdiff_t>(end));
    return d;
  }
};

namespace detail {

inline bool is_idx_path(const std::filesystem::path& p) { return p.extension() == ".idx" || p.extension() == ".ubyte"; }

struct Point {
  double x, y;
};

inline double segment_distance(Point p, Point a, Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = a.x + t * dx - p.x, ey = a.y + t * dy - p.y;
  return std::sqrt(ex * ex + ey * ey);
}

inline std::vector<Point> ellipse(double cx, double cy, double rx, double ry, int steps = 16) {
  std::vector<Point> pts;
  for (int i = 0; i <= steps; ++i) {
    const double a = 2 * std::numbers::pi * i / steps;
    pts.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
  }
  return pts;
}

/// Stroke skeletons of the ten digits in a unit box, y pointing down.
inline std::vector<std::vector<Point>> glyph(int digit) {
  switch (digit) {
    case 0: return {ellipse(0.5, 0.5, 0.28, 0.4)};
    case 1: return {{{0.35, 0.25}, {0.52, 0.1}, {0.52, 0.9}}};
    case 2: return {{{0.25, 0.3}, {0.35, 0.12}, {0.6, 0.1}, {0.75, 0.25}, {0.7, 0.45}, {0.25, 0.9}, {0.78, 0.9}}};
    case 3: return {{{0.25, 0.15}, {0.7, 0.15}, {0.45, 0.45}, {0.7, 0.6}, {0.7, 0.8}, {0.5, 0.9}, {0.25, 0.85}}};
    case 4: return {{{0.65, 0.9}, {0.65, 0.1}, {0.2, 0.65}, {0.8, 0.65}}};
    case 5:
      return {{{0.75, 0.1}, {0.3, 0.1}, {0.28, 0.45}, {0.6, 0.42}, {0.75, 0.6}, {0.7, 0.82}, {0.5, 0.9}, {0.25, 0.85}}};
    case 6:
      return {{{0.7, 0.12}, {0.45, 0.15}, {0.3, 0.4}, {0.28, 0.7}, {0.45, 0.9}, {0.68, 0.8}, {0.7, 0.6}, {0.5, 0.5},
               {0.3, 0.6}}};
    case 7: return {{{0.2, 0.1}, {0.8, 0.1}, {0.4, 0.9}}};
    case 8: return {ellipse(0.5, 0.3, 0.18, 0.18), ellipse(0.5, 0.7, 0.22, 0.2)};
    case 9:
      return {{{0.7, 0.4}, {0.5, 0.5}, {0.3, 0.4}, {0.32, 0.2}, {0.5, 0.1}, {0.7, 0.2}, {0.7, 0.4}, {0.65, 0.9}}};
    default: throw Error("digit out of range");
  }
}

/// Anti-aliased strokes on a side x side canvas; accumulates by max.
inline void draw_strokes(std::vector<double>& canvas, int side, const std::vector<std::vector<Point>>& strokes,
                         double thickness) {
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c) {
      const Point p{c + 0.5, r + 0.5};
      double d = 1e9;
      for (const auto& s : strokes)
        for (std::size_t i = 0; i + 1 < s.size(); ++i) d = std::min(d, segment_distance(p, s[i], s[i + 1]));
      const double v = std::clamp(1.0 - std::max(0.0, d - thickness / 2) / 0.8, 0.0, 1.0);
      auto& px = canvas[static_cast<std::size_t>(r * side + c)];
      px = std::max(px, v);
    }
}

/// Adds noise and quantizes to 8-bit levels, as an IDX round trip would.
inline void finish_image(std::vector<double>& canvas, double noise, Rng& rng, std::vector<float>& out) {
  std::normal_distribution<double> n(0.0, noise);
  for (double v : canvas) {
    const double q = std::round(std::clamp(v + n(rng), 0.0, 1.0) * 255.0);
    out.push_back(static_cast<float>(q / 255.0));
  }
}

}  // namespace detail

/// Two Gaussian classes in `dim` dimensions split by a random hyperplane with
/// a margin. Shape [1, dim]; labels 0/1.
inline Dataset make_separable(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x5e9a);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> w(dim);
  double norm = 0;
  for (auto& v : w) {
    v = g(rng);
    norm += v * v;
  }
  norm = std::sqrt(norm);
  for (auto& v : w) v /= norm;
  Dataset d;
  d.sample_shape = {1, static_cast<std::int64_t>(dim)};
  d.generator = "separable";
  d.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(dim);
    double proj = 0;
    for (std::size_t j = 0; j < dim; ++j) proj += (x[j] = g(rng)) * w[j];
    const int label = proj > 0 ? 1 : 0;
    const double shift = (label ? 1.0 : -1.0) * 1.0;  // margin along w
    for (std::size_t j = 0; j < dim; ++j) d.x.push_back(static_cast<float>(x[j] + shift * w[j]));
    d.y.push_back(label);
  }
  return d;
}

/// 16x16 digit images, uniform labels 0..9, pixel values in [0, 1] at 8-bit
/// resolution. Each glyph gets a random affine transform, stroke width and
/// pixel noise. Shape [1, 16, 16, 1].
inline Dataset make_digits(std::size_t n, std::uint64_t seed) {
  constexpr int kSide = 16;
  Dataset d;
  d.sample_shape = {1, kSide, kSide, 1};
  d.generator = "digits";
  d.seed = seed;
  d.x.reserve(n * kSide * kSide);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = make_rng(seed, i);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const int label = static_cast<int>(std::uniform_int_distribution<int>(0, 9)(rng));
    const double scale = kSide * (0.82 + 0.1 * u(rng));
    const double rot = 0.22 * u(rng);
    const double shear = 0.18 * u(rng);
    const double tx = kSide / 2.0 + 1.2 * u(rng), ty = kSide / 2.0 + 1.2 * u(rng);
    const double aspect = 1.0 + 0.12 * u(rng);
    const double thickness = 1.25 + 0.35 * u(rng);
    auto strokes = detail::glyph(label);
    for (auto& s : strokes)
      for (auto& p : s) {
        const double x0 = (p.x - 0.5) * aspect, y0 = p.y - 0.5;
        const double xs = x0 + shear * y0;
        const double xr = std::cos(rot) * xs - std::sin(rot) * y0;
        const double yr = std::sin(rot) * xs + std::cos(rot) * y0;
        p = {tx + scale * xr, ty + scale * yr};
      }
    std::vector<double> canvas(kSide * kSide, 0.0);
    detail::draw_strokes(canvas, kSide, strokes, thickness);
    detail::finish_image(canvas, 0.06, rng, d.x);
    d.y.push_back(label);
  }
  return d;
}

/// 16x16 road images: two lane lines converging toward the top with a
/// heading of theta degrees from vertical, a random lateral offset and
/// clutter. Target theta is uniform in [-60, 60]. Shape [1, 16, 16, 1].
inline Dataset make_steering(std::size_t n, std::uint64_t seed) {
  constexpr int kSide = 16;
  Dataset d;
  d.sample_shape = {1, kSide, kSide, 1};
  d.generator = "steering";
  d.seed = seed;
  d.x.reserve(n * kSide * kSide);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = make_rng(seed, i);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double theta = 60.0 * u(rng);
    const double rad = theta * std::numbers::pi / 180.0;
    const double offset = 1.5 * u(rng);
    const double half_gap = 3.5 + 0.8 * u(rng);
    const detail::Point dir{std::sin(rad), -std::cos(rad)};
    const detail::Point normal{-dir.y, dir.x};
    std::vector<std::vector<detail::Point>> strokes;
    for (double side : {-1.0, 1.0}) {
      const detail::Point base{kSide / 2.0 + offset + side * half_gap * normal.x, kSide + side * half_gap * normal.y};
      strokes.push_back({base, {base.x + 24 * dir.x, base.y + 24 * dir.y}});
    }
    std::vector<double> canvas(kSide * kSide, 0.0);
    detail::draw_strokes(canvas, kSide, strokes, 1.0 + 0.3 * u(rng));
    const int blobs = std::uniform_int_distribution<int>(0, 2)(rng);
    for (int b = 0; b < blobs; ++b) {
      const auto px = std::uniform_int_distribution<int>(0, kSide * kSide - 1)(rng);
      canvas[static_cast<std::size_t>(px)] = std::max(canvas[static_cast<std::size_t>(px)], 0.5 + 0.3 * u(rng));
    }
    detail::finish_image(canvas, 0.05, rng, d.x);
    d.y.push_back(theta);
  }
  return d;
}

inline Dataset make_dataset(const std::string& name, std::size_t n, std::uint64_t seed) {
  if (name == "digits") return make_digits(n, seed);
  if (name == "steering") return make_steering(n, seed);
  if (name == "separable") return make_separable(n, 128, seed);
  throw Error("unknown dataset generator '" + name + "' (expected digits, steering or separable)");
}

/// Images go to IDX (8-bit) when the path ends in .idx or .ubyte, else to
/// RGTN float32. Labels: IDX for integral labels with an IDX path, else
/// RGTN float32. A JSON sidecar records the generator and seed.
inline void save_dataset(const Dataset& d, const std::filesystem::path& images, const std::filesystem::path& labels) {
  TensorBlob img;
  img.shape = {static_cast<std::int64_t>(d.size())};
  for (std::size_t k = 1; k < d.sample_shape.size(); ++k) img.shape.push_back(d.sample_shape[k]);
  if (detail::is_idx_path(images)) {
    if (img.shape.size() == 4 && img.shape[3] == 1) img.shape.pop_back();
    img.dtype = DType::U8;
    for (float v : d.x) img.values.push_back(std::round(std::clamp<double>(v, 0.0, 1.0) * 255.0));
    write_idx(images, img);
  } else {
    for (float v : d.x) img.values.push_back(v);
    write_rgtn(images, img);
  }
  TensorBlob lab;
  lab.shape = {static_cast<std::int64_t>(d.size())};
  lab.values = d.y;
  if (detail::is_idx_path(labels)) {
    lab.dtype = DType::U8;
    write_idx(labels, lab);
  } else {
    write_rgtn(labels, lab);
  }
  if (!d.generator.empty()) {
    json meta{{"generator", d.generator}, {"version", kGeneratorVersion}, {"seed", d.seed}, {"count", d.size()}};
    ranger::detail::write_file(images.string() + ".meta.json", meta.dump(2) + "\n");
  }
}

/// Reads an image file ([N,H,W], [N,H,W,C] or [N,D]) and a label file [N].
/// 8-bit images are scaled to [0, 1].
inline Dataset load_dataset(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto img = read_tensor_file(images);
  const auto lab = read_tensor_file(labels);
  if (img.shape.size() < 2) throw IoError(images.string() + ": image tensor needs rank >= 2");
  if (lab.values.size() != static_cast<std::size_t>(img.shape[0]))
    throw IoError(labels.string() + ": " + std::to_string(lab.values.size()) + " labels for " +
                  std::to_string(img.shape[0]) + " images");
  Dataset d;
  d.sample_shape = {1};
  for (std::size_t k = 1; k < img.shape.size(); ++k) d.sample_shape.push_back(img.shape[k]);
  if (d.sample_shape.size() == 3) d.sample_shape.push_back(1);
  const bool bytes = img.dtype == DType::U8;
  d.x.reserve(img.values.size());
  for (double v : img.values) d.x.push_back(static_cast<float>(bytes ? v / 255.0 : v));
  d.y = lab.values;
  return d;
}

}  // namespace ranger::zoo
