// SPDX-License-Identifier: Apache-2.0
// Acceptance harness: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Every seed, size and tolerance is fixed below.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ranger/ranger.hpp"

using namespace ranger;

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kSeed = 2024;
constexpr double kAccuracyTolerancePp = 0.1;  // percentage points
constexpr double kReductionGate = 5.0;
constexpr double kOverheadLimit = 0.02;

int workers() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, bool ok, const std::string& what, const std::string& detail) {
  if (!ok) ++failures;
  std::cout << (ok ? "PASS" : "FAIL") << " [" << id << "] " << what << ": " << detail << std::endl;
}

std::string fmt_rate(const CampaignResult& r) {
  std::ostringstream s;
  s.precision(3);
  s << std::fixed << 100.0 * r.sdc << "% +/- " << 100.0 * r.ci95 << "%";
  return s.str();
}

std::vector<Tensor> uniform_inputs(const Shape& shape, std::size_t n, std::uint64_t seed, double lo, double hi) {
  Rng rng = make_rng(seed, 0xacc);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(static_cast<std::size_t>(element_count(shape)));
    for (auto& x : v) x = u(rng);
    out.push_back(Tensor::from_values<double>(shape, v));
  }
  return out;
}

// First `count` validation samples that every variant predicts correctly.
void pick_correct(const std::vector<Variant>& variants, const zoo::Dataset& val, NumericFormat fmt, std::size_t count,
                  CampaignConfig& cfg) {
  std::vector<Executor> execs;
  for (const auto& v : variants) execs.emplace_back(v.graph, fmt);
  for (std::size_t i = 0; i < val.size() && cfg.inputs.size() < count; ++i) {
    const std::vector<Tensor> in{val.sample(i, fmt)};
    const std::vector<double> y{val.y[i]};
    const bool ok = std::all_of(execs.begin(), execs.end(),
                                [&](const Executor& e) { return !first_incorrect_input(e, in, y); });
    if (!ok) continue;
    cfg.inputs.push_back(in[0]);
    cfg.expected.push_back(y[0]);
  }
  if (cfg.inputs.size() < count) throw Error("not enough correctly predicted validation inputs");
}

BoundSet profile(const Graph& g, const zoo::Dataset& data, double p, NumericFormat fmt) {
  ProfileOptions opts;
  opts.format = fmt;
  opts.seed = kSeed;
  opts.workers = workers();
  const auto samples = data.samples(0, data.size());
  return profile_bounds(g, samples, p, opts);
}

struct Zoo {
  zoo::Dataset digits_train, digits_val, digits_profile;
  zoo::Dataset steer_train, steer_val, steer_profile;
  Graph lenet, steer, tanh_mlp;
};

// Each whole training split is its profiling set.
Zoo build_zoo() {
  Zoo z;
  const auto digits = zoo::make_digits(7000, kSeed);
  z.digits_train = digits.slice(0, 6000);
  z.digits_val = digits.slice(6000, 7000);
  z.digits_profile = z.digits_train;
  const auto steering = zoo::make_steering(6000, kSeed + 1);
  z.steer_train = steering.slice(0, 5000);
  z.steer_val = steering.slice(5000, 6000);
  z.steer_profile = z.steer_train;

  zoo::TrainSpec lenet;
  lenet.epochs = 3;
  lenet.seed = kSeed;
  z.lenet = zoo::train(lenet, z.digits_train).graph;

  zoo::TrainSpec steer;
  steer.arch = "steer-mini";
  steer.epochs = 3;
  steer.lr = 0.02;
  steer.seed = kSeed;
  z.steer = zoo::train(steer, z.steer_train).graph;

  zoo::TrainSpec mlp;
  mlp.arch = "tiny-mlp";
  mlp.activation = OpKind::Tanh;
  mlp.epochs = 3;
  mlp.seed = kSeed;
  z.tanh_mlp = zoo::train(mlp, z.digits_train).graph;
  return z;
}

void criterion1() {
  const auto t0 = Clock::now();
  const Graph toy = zoo::toy_mlp(kSeed);
  const auto inputs = uniform_inputs({1, 8}, 4, kSeed, -1.0, 1.0);
  bool ok = true;
  std::ostringstream detail;
  std::size_t max_sites = 0;
  for (auto fmt : {NumericFormat::float32(), NumericFormat::fixed32(), NumericFormat::fixed16()}) {
    CampaignConfig cfg;
    cfg.variants = {{"toy", toy}};
    cfg.inputs = inputs;
    cfg.format = fmt;
    cfg.workers = workers();
    cfg.mode = CampaignMode::Exhaustive;
    const auto exact = run_campaign(cfg).at(0);
    cfg.mode = CampaignMode::Sampled;
    cfg.trials_per_input = 5000 / inputs.size();
    cfg.seed = kSeed;
    const auto sampled = run_campaign(cfg).at(0);
    max_sites = std::max<std::size_t>(max_sites, exact.n);
    const bool inside = std::abs(sampled.sdc - exact.sdc) <= sampled.ci95 && sampled.n == 5000;
    ok = ok && inside;
    detail << fmt.name() << " exact " << 100.0 * exact.sdc << "% (" << exact.n << " sites) sampled " << fmt_rate(sampled)
           << "; ";
  }
  const double secs = seconds_since(t0);
  ok = ok && max_sites <= 100000 && secs < 120.0;
  detail << secs << " s";
  report(1, ok, "exhaustive oracle vs 5000-trial sampled campaign", detail.str());
}

// Criteria 2 and 5 share this body.
void efficacy(int id, const Zoo& z, NumericFormat fmt) {
  const auto t0 = Clock::now();
  const Graph ranger = insert_ranger(z.lenet, profile(z.lenet, z.digits_profile, 100, fmt));
  CampaignConfig cfg;
  cfg.variants = {{"original", z.lenet}, {"ranger", ranger}};
  pick_correct(cfg.variants, z.digits_val, fmt, 10, cfg);
  cfg.trials_per_input = 3000;
  cfg.format = fmt;
  cfg.exclude_last_fc = true;
  cfg.seed = kSeed;
  cfg.workers = workers();
  const auto res = run_campaign(cfg);
  const double secs = seconds_since(t0);
  const bool ok = res[1].sdc <= res[0].sdc / kReductionGate && ci_disjoint(res[0], res[1]) && secs < 600.0;
  std::ostringstream detail;
  detail << fmt.name() << " original " << fmt_rate(res[0]) << ", ranger " << fmt_rate(res[1]) << ", "
         << (res[1].sdc > 0 ? res[0].sdc / res[1].sdc : INFINITY) << "x, " << secs << " s";
  report(id, ok, "lenet-mini SDC reduction >= 5x with disjoint CIs", detail.str());
}

void criterion3(const Zoo& z) {
  bool ok = true;
  std::ostringstream detail;
  detail.precision(8);
  for (auto fmt : {NumericFormat::float32(), NumericFormat::fixed32()}) {
    const Graph lr = insert_ranger(z.lenet, profile(z.lenet, z.digits_profile, 100, fmt));
    const auto a = zoo::evaluate_accuracy(z.lenet, z.digits_val, fmt, workers());
    const auto b = zoo::evaluate_accuracy(lr, z.digits_val, fmt, workers());
    const double diff_pp = 100.0 * std::abs(a.accuracy - b.accuracy);
    ok = ok && a.n >= 1000 && diff_pp <= kAccuracyTolerancePp;
    detail << fmt.name() << " lenet " << 100.0 * a.accuracy << "% vs " << 100.0 * b.accuracy << "%; ";

    const Graph sr = insert_ranger(z.steer, profile(z.steer, z.steer_profile, 100, fmt));
    const auto c = zoo::evaluate_accuracy(z.steer, z.steer_val, fmt, workers());
    const auto d = zoo::evaluate_accuracy(sr, z.steer_val, fmt, workers());
    const auto same6 = [](double x, double y) { return std::llround(x * 1e6) == std::llround(y * 1e6); };
    ok = ok && c.n >= 1000 && same6(c.rmse, d.rmse) && same6(c.avg_deviation, d.avg_deviation);
    detail << "steer rmse " << c.rmse << " vs " << d.rmse << ", avg dev " << c.avg_deviation << " vs "
           << d.avg_deviation << "; ";
  }
  report(3, ok, "fault-free accuracy preserved on 1000-sample validation splits", detail.str());
}

void criterion4(const Zoo& z) {
  bool ok = true;
  std::ostringstream detail;
  detail.precision(4);
  const std::vector<std::pair<std::string, Graph>> models{
      {"lenet-mini", z.lenet},
      {"steer-mini", z.steer},
      {"steer-mini-rad", zoo::steer_mini(kSeed, AngleUnit::Radians)},
      {"tiny-mlp-relu", zoo::tiny_mlp(kSeed, {1, 16, 16, 1}, 10)},
      {"tiny-mlp-tanh", z.tanh_mlp},
  };
  for (const auto& [name, g] : models) {
    BoundSet bounds;
    for (const auto& n : g.nodes)
      if (is_activation(n.kind)) bounds.act_bounds[n.id] = n.kind == OpKind::Tanh ? Bound{-1, 1} : Bound{0, 1};
    const auto assigned = assign_bounds(g, bounds, Extension::Transitive);
    std::uint64_t elements = 0;
    for (const auto& [id, b] : assigned) elements += static_cast<std::uint64_t>(element_count(g.node(id).output_shape));
    const auto before = count_flops(g).total, after = count_flops(insert_ranger(g, bounds)).total;
    const double overhead = static_cast<double>(after - before) / static_cast<double>(before);
    ok = ok && after - before == 2 * elements && overhead < kOverheadLimit;
    detail << name << " " << 100.0 * overhead << "%; ";
  }
  report(4, ok, "FLOP overhead < 2% and equal to 2x bounded elements", detail.str());
}

void criterion6(const Zoo& z) {
  const auto fmt = NumericFormat::fixed32();
  const Graph ranger = insert_ranger(z.lenet, profile(z.lenet, z.digits_profile, 100, fmt));
  CampaignConfig cfg;
  cfg.variants = {{"original", z.lenet}, {"ranger", ranger}};
  pick_correct(cfg.variants, z.digits_val, fmt, 10, cfg);
  cfg.trials_per_input = 1000;
  cfg.format = fmt;
  cfg.exclude_last_fc = true;
  cfg.seed = kSeed;
  cfg.workers = workers();
  bool ok = true;
  std::ostringstream detail;
  std::optional<CampaignResult> prev;
  for (int k = 2; k <= 5; ++k) {
    cfg.bit_count = k;
    const auto res = run_campaign(cfg);
    if (prev) ok = ok && res[0].sdc + res[0].ci95 >= prev->sdc - prev->ci95;
    ok = ok && res[1].sdc < res[0].sdc;
    detail << "k=" << k << " " << fmt_rate(res[0]) << " -> " << fmt_rate(res[1]) << "; ";
    prev = res[0];
  }
  report(6, ok, "multi-bit SDC non-decreasing in k and reduced by ranger", detail.str());
}

void criterion7(const Zoo& z) {
  const auto fmt = NumericFormat::fixed32();
  const std::vector<double> percentiles{100, 99.9, 99, 98};
  std::vector<Variant> variants;
  std::vector<zoo::Metrics> metrics;
  for (double p : percentiles) {
    variants.push_back({"p" + std::to_string(p), insert_ranger(z.steer, profile(z.steer, z.steer_profile, p, fmt))});
    metrics.push_back(zoo::evaluate_accuracy(variants.back().graph, z.steer_val, fmt, workers()));
  }
  CampaignConfig cfg;
  cfg.variants = variants;
  pick_correct(cfg.variants, z.steer_val, fmt, 10, cfg);
  cfg.trials_per_input = 3000;
  cfg.format = fmt;
  cfg.exclude_last_fc = true;
  cfg.seed = kSeed;
  cfg.workers = workers();
  const auto res = run_campaign(cfg);
  bool ok = true;
  std::ostringstream detail;
  detail.precision(5);
  for (std::size_t i = 0; i < percentiles.size(); ++i) {
    if (i > 0) {
      ok = ok && res[i].sdc <= res[i - 1].sdc;
      ok = ok && metrics[i].rmse >= metrics[i - 1].rmse && metrics[i].avg_deviation >= metrics[i - 1].avg_deviation;
    }
    detail << "p" << percentiles[i] << " sdc " << fmt_rate(res[i]) << " (" << res[i].sdc_count << "/" << res[i].n
           << ", mean over thresholds " << 100.0 * res[i].mean_threshold_rate() << "%) rmse " << metrics[i].rmse << " avg "
           << metrics[i].avg_deviation << "; ";
  }
  report(7, ok, "lower percentiles trade accuracy for SDC on steer-mini", detail.str());
}

void criterion8() {
  CampaignConfig cfg;
  cfg.variants = {{"chain", zoo::positive_chain(kSeed)}};
  cfg.inputs = uniform_inputs({1, 4}, 4, kSeed, 0.5, 3.0);
  cfg.format = NumericFormat::fixed32();
  cfg.mode = CampaignMode::Exhaustive;
  cfg.workers = workers();
  const auto r = run_campaign(cfg).at(0);
  const auto rate = [&](int b) {
    const auto i = static_cast<std::size_t>(b);
    return static_cast<double>(r.bit_sdc[i]) / static_cast<double>(r.bit_trials[i]);
  };
  bool ok = true;
  const int f = cfg.format.frac_bits, top = cfg.format.total_bits - 2;  // the sign bit is excluded
  for (int k = f; k <= top; ++k)
    for (int j = 0; j < k; ++j) ok = ok && rate(k) >= rate(j);
  std::ostringstream detail;
  for (int b = 0; b <= top + 1; ++b) detail << rate(b) << (b <= top ? "," : "");
  report(8, ok, "per-bit SDC of integer-field bits dominates lower bits", "bits 0..31 " + detail.str());
}

void criterion9(const Zoo& z) {
  std::size_t mismatches = 0, checked = 0;
  const std::vector<std::pair<const Graph*, const zoo::Dataset*>> cases{
      {&z.lenet, &z.digits_profile}, {&z.steer, &z.steer_profile}, {&z.tanh_mlp, &z.digits_profile}};
  for (auto fmt : {NumericFormat::float32(), NumericFormat::fixed32(), NumericFormat::fixed16()}) {
    for (const auto& [g, data] : cases) {
      const Executor a(*g, fmt), b(insert_ranger(*g, profile(*g, *data, 100, fmt)), fmt);
      for (std::size_t i = 0; i < data->size(); ++i, ++checked) {
        const Tensor x = data->sample(i, fmt);
        mismatches += !a.infer(x).bit_equal(b.infer(x));
      }
    }
  }
  report(9, mismatches == 0, "instrumented graphs match originals on the profiling set",
         std::to_string(mismatches) + " mismatches over " + std::to_string(checked) + " runs");
}

void criterion10(const Zoo& z) {
  const auto fmt = NumericFormat::fixed32();
  const Graph& g = z.tanh_mlp;
  CampaignConfig cfg;
  cfg.variants = {{"original", g},
                  {"act_swap", act_swap(g, OpKind::ReLU, OpKind::Tanh)},
                  {"ranger", insert_ranger(g, profile(g, z.digits_profile, 100, fmt))}};
  pick_correct(cfg.variants, z.digits_val, fmt, 10, cfg);
  cfg.trials_per_input = 3000;
  cfg.format = fmt;
  cfg.exclude_last_fc = true;
  cfg.seed = kSeed;
  cfg.workers = workers();
  const auto res = run_campaign(cfg);
  const auto red = compare_variants(res);
  const bool swap_zero = res[1].sdc_count == res[0].sdc_count;
  const bool ok = swap_zero && res[2].sdc < res[0].sdc && ci_disjoint(res[0], res[2]);
  report(10, ok, "act_swap gives 0% reduction on a Tanh model while ranger reduces SDC",
         "original " + fmt_rate(res[0]) + ", act_swap " + fmt_rate(res[1]) + ", ranger " + fmt_rate(res[2]));
}

void guarded(int id, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(id, false, "error", e.what());
  }
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  guarded(1, criterion1);
  Zoo z;
  try {
    z = build_zoo();
  } catch (const std::exception& e) {
    for (int id : {2, 3, 4, 5, 6, 7, 9, 10}) report(id, false, "model training failed", e.what());
    guarded(8, criterion8);
    return 1;
  }
  std::cout << "# models trained in " << seconds_since(t0) << " s" << std::endl;
  guarded(2, [&] { efficacy(2, z, NumericFormat::fixed32()); });
  guarded(3, [&] { criterion3(z); });
  guarded(4, [&] { criterion4(z); });
  guarded(5, [&] { efficacy(5, z, NumericFormat::fixed16()); });
  guarded(6, [&] { criterion6(z); });
  guarded(7, [&] { criterion7(z); });
  guarded(8, criterion8);
  guarded(9, [&] { criterion9(z); });
  guarded(10, [&] { criterion10(z); });
  std::cout << "# " << failures << " failing criteria, " << seconds_since(t0) << " s total" << std::endl;
  return failures == 0 ? 0 : 1;
}
