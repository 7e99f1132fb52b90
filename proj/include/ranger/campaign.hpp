// SPDX-License-Identifier: Apache-2.0
//
// Fault-injection campaigns. Each trial flips bits in one operator output of
// one input's execution and classifies the final output against the golden
// run. Faults are a pure function of (seed, trial index), so variants that
// share original node ids see the same faults.
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "ranger/engine.hpp"
#include "ranger/io.hpp"
#include "ranger/rng.hpp"

namespace ranger {

enum class Outcome : std::uint8_t { Masked, SDC, Detectable };

inline std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Masked: return "masked";
    case Outcome::SDC: return "sdc";
    case Outcome::Detectable: return "detectable";
  }
  return "?";
}

inline Outcome parse_outcome(std::string_view s) {
  if (s == "masked") return Outcome::Masked;
  if (s == "sdc") return Outcome::SDC;
  if (s == "detectable") return Outcome::Detectable;
  throw Error("unknown outcome '" + std::string(s) + "'");
}

enum class CampaignMode : std::uint8_t { Sampled, Exhaustive };
/// Multi-bit faults: k bits of one value, or one bit in each of k values of
/// the same operator output.
enum class MultiBitMode : std::uint8_t { SingleValue, MultiValue };

inline CampaignMode parse_mode(std::string_view s) {
  if (s == "sampled") return CampaignMode::Sampled;
  if (s == "exhaustive") return CampaignMode::Exhaustive;
  throw Error("unknown campaign mode '" + std::string(s) + "' (expected sampled or exhaustive)");
}

inline MultiBitMode parse_multi_bit(std::string_view s) {
  if (s == "single-value") return MultiBitMode::SingleValue;
  if (s == "multi-value") return MultiBitMode::MultiValue;
  throw Error("unknown multi-bit mode '" + std::string(s) + "' (expected single-value or multi-value)");
}

/// Half-width of the normal-approximation 95% interval of a proportion.
inline double ci95_half_width(double p, std::uint64_t n) {
  if (n == 0) return 0.0;
  return 1.96 * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

/// Indices of the k largest values; ties go to the lower index.
inline std::vector<std::size_t> top_k(const Tensor& t, int k) {
  std::vector<std::size_t> idx(t.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const auto kk = std::min<std::size_t>(static_cast<std::size_t>(std::max(k, 1)), idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(kk), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double va = t.value(a), vb = t.value(b);
                      return va > vb || (va == vb && a < b);
                    });
  idx.resize(kk);
  return idx;
}

inline std::size_t argmax(const Tensor& t) { return top_k(t, 1).at(0); }

/// Scalar regression output in degrees.
inline double regression_degrees(const Tensor& t, AngleUnit unit) {
  const double v = t.value(0);
  return unit == AngleUnit::Radians ? v * 180.0 / std::numbers::pi : v;
}

struct Classification {
  Outcome outcome = Outcome::Masked;
  /// Regression: exceeds[i] is true when the deviation passes threshold i.
  std::vector<bool> exceeds;
};

/// SDC: golden top-1 label missing from the faulty top-k (classification),
/// or deviation above the smallest threshold (regression). Non-finite
/// faulty outputs are detectable failures.
inline Classification classify_outcome(const Tensor& golden, const Tensor& faulty, const TaskSpec& task) {
  if (golden.shape() != faulty.shape())
    throw Error("outcome shapes differ: " + shape_string(golden.shape()) + " vs " + shape_string(faulty.shape()));
  Classification c;
  if (task.is_classification()) {
    if (!faulty.all_finite()) {
      c.outcome = Outcome::Detectable;
      return c;
    }
    const auto label = argmax(golden);
    const auto top = top_k(faulty, task.topk);
    c.outcome = std::find(top.begin(), top.end(), label) == top.end() ? Outcome::SDC : Outcome::Masked;
    return c;
  }
  c.exceeds.assign(task.sdc_thresholds.size(), false);
  if (!faulty.all_finite()) {
    c.outcome = Outcome::Detectable;
    return c;
  }
  const double dev = std::abs(regression_degrees(golden, task.unit) - regression_degrees(faulty, task.unit));
  for (std::size_t i = 0; i < task.sdc_thresholds.size(); ++i) c.exceeds[i] = dev > task.sdc_thresholds[i];
  c.outcome = !c.exceeds.empty() && c.exceeds[0] ? Outcome::SDC : Outcome::Masked;
  return c;
}

/// Eligible fault sites: operator outputs in list order, weighted by element
/// count.
struct SiteUniverse {
  std::vector<NodeId> ops;
  std::vector<std::size_t> sizes;
  std::vector<std::size_t> prefix;  // prefix[i] = elements before ops[i]
  std::size_t total = 0;
  int width = 32;

  /// Op index holding global element `e`.
  std::size_t locate(std::size_t e) const {
    auto it = std::upper_bound(prefix.begin(), prefix.end(), e);
    return static_cast<std::size_t>(it - prefix.begin()) - 1;
  }
};

/// `min_elements` drops ops too small for multi-value faults.
inline SiteUniverse site_universe(const Graph& shaped, NumericFormat format, const FaultPolicy& policy,
                                  std::size_t min_elements = 1) {
  const auto excluded = policy.exclude_last_fc ? last_fc_region(shaped) : std::unordered_set<NodeId>{};
  SiteUniverse u;
  u.width = format.width();
  for (const auto& n : shaped.nodes) {
    if (!is_operator(n.kind)) continue;
    if (n.kind == OpKind::Clip && !policy.allow_clip_targets) continue;
    if (excluded.count(n.id)) continue;
    const auto size = static_cast<std::size_t>(element_count(n.output_shape));
    if (size < min_elements) continue;
    u.ops.push_back(n.id);
    u.sizes.push_back(size);
    u.prefix.push_back(u.total);
    u.total += size;
  }
  return u;
}

/// Draws the fault of one trial: element uniform over the universe, then k
/// distinct bits (single-value) or k distinct elements of the same op with
/// one bit each (multi-value).
inline FaultSpec sample_fault(const SiteUniverse& u, int bit_count, MultiBitMode mode, std::uint64_t seed,
                              std::uint64_t trial_index) {
  if (u.total == 0) throw Error("no eligible fault sites");
  if (bit_count < 1 || bit_count > u.width) throw Error("bit count must lie in [1, format width]");
  Rng rng = make_rng(seed, trial_index);
  const auto draw = [&rng](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  const auto e = draw(u.total);
  const auto op = u.locate(e);
  FaultSpec f;
  f.target_op = u.ops[op];
  f.trial_index = trial_index;
  const auto k = static_cast<std::size_t>(bit_count);
  if (mode == MultiBitMode::SingleValue || k == 1) {
    std::vector<unsigned> bits(static_cast<std::size_t>(u.width));
    for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = static_cast<unsigned>(i);
    for (std::size_t i = 0; i < k; ++i) std::swap(bits[i], bits[i + draw(bits.size() - i)]);
    bits.resize(k);
    std::sort(bits.begin(), bits.end());
    f.upsets.push_back({e - u.prefix[op], std::move(bits)});
    return f;
  }
  if (u.sizes[op] < k) throw Error("operator " + std::to_string(u.ops[op]) + " has fewer than k elements");
  std::vector<std::size_t> elems{e - u.prefix[op]};
  while (elems.size() < k) {
    const auto c = draw(u.sizes[op]);
    if (std::find(elems.begin(), elems.end(), c) == elems.end()) elems.push_back(c);
  }
  std::sort(elems.begin(), elems.end());
  for (auto el : elems) f.upsets.push_back({el, {static_cast<unsigned>(draw(static_cast<std::size_t>(u.width)))}});
  return f;
}

/// All k-subsets of [0, width) in lexicographic order.
inline std::vector<std::vector<unsigned>> bit_combinations(int width, int k) {
  std::vector<std::vector<unsigned>> out;
  std::vector<unsigned> c(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) c[static_cast<std::size_t>(i)] = static_cast<unsigned>(i);
  if (k <= 0 || k > width) return out;
  while (true) {
    out.push_back(c);
    int i = k - 1;
    while (i >= 0 && c[static_cast<std::size_t>(i)] == static_cast<unsigned>(width - k + i)) --i;
    if (i < 0) break;
    ++c[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < k; ++j) c[static_cast<std::size_t>(j)] = c[static_cast<std::size_t>(j - 1)] + 1;
  }
  return out;
}

struct Variant {
  std::string name;
  Graph graph;
};

struct CampaignConfig {
  std::vector<Variant> variants;  // the first one is the baseline
  std::vector<Tensor> inputs;
  /// Class labels or regression targets in degrees; empty skips the
  /// correct-prediction check.
  std::vector<double> expected;
  std::size_t trials_per_input = 1000;
  NumericFormat format = NumericFormat::fixed32();
  std::uint64_t seed = 0;
  int bit_count = 1;
  bool exclude_last_fc = false;
  CampaignMode mode = CampaignMode::Sampled;
  MultiBitMode multi_bit = MultiBitMode::SingleValue;
  bool include_clip_sites = false;
  int workers = 1;
  ExecOptions exec;
  /// JSON-lines trial log; existing entries are reused on resume.
  std::optional<std::filesystem::path> trial_log;
};

struct CampaignResult {
  std::string variant;
  std::string format;
  std::string mode;
  int bit_count = 1;
  std::uint64_t seed = 0;
  std::uint64_t n = 0;
  std::uint64_t sdc_count = 0;
  std::uint64_t masked_count = 0;
  std::uint64_t detectable_count = 0;
  double sdc = 0.0;
  double masked = 0.0;
  double detectable = 0.0;
  double ci95 = 0.0;
  std::vector<double> thresholds;
  std::vector<std::uint64_t> threshold_sdc_counts;
  std::vector<std::uint64_t> bit_trials;  // per bit position
  std::vector<std::uint64_t> bit_sdc;
  std::uint64_t flops = 0;
  double flops_overhead = 0.0;  // relative to the baseline variant
  std::string trial_log;

  double threshold_rate(std::size_t i) const {
    return n ? static_cast<double>(threshold_sdc_counts.at(i)) / static_cast<double>(n) : 0.0;
  }
  double threshold_ci95(std::size_t i) const { return ci95_half_width(threshold_rate(i), n); }
  /// Mean SDC rate over all regression thresholds; the plain rate otherwise.
  double mean_threshold_rate() const {
    if (thresholds.empty()) return sdc;
    double s = 0.0;
    for (std::size_t i = 0; i < thresholds.size(); ++i) s += threshold_rate(i);
    return s / static_cast<double>(thresholds.size());
  }
};

/// True when the two 95% intervals of the SDC rate are disjoint.
inline bool ci_disjoint(const CampaignResult& a, const CampaignResult& b) {
  return a.sdc + a.ci95 < b.sdc - b.ci95 || b.sdc + b.ci95 < a.sdc - a.ci95;
}

namespace detail {

struct TrialRecord {
  std::uint8_t done = 0;
  Outcome outcome = Outcome::Masked;
  std::uint32_t exceeds = 0;  // bitmask over thresholds
};

inline std::string trial_line(const std::string& variant, std::uint64_t trial, std::size_t input,
                              const FaultSpec& f, const TrialRecord& r, std::size_t thresholds) {
  json j;
  j["variant"] = variant;
  j["trial"] = trial;
  j["input"] = input;
  j["op"] = f.target_op;
  json ups = json::array();
  for (const auto& u : f.upsets) ups.push_back({{"element", u.element_index}, {"bits", u.bit_positions}});
  j["upsets"] = std::move(ups);
  j["outcome"] = std::string(to_string(r.outcome));
  std::vector<bool> ex;
  for (std::size_t i = 0; i < thresholds; ++i) ex.push_back((r.exceeds >> i) & 1u);
  if (thresholds) j["exceeds"] = ex;
  return j.dump();
}

/// Completed trials from an existing log, keyed by variant then trial.
inline std::unordered_map<std::string, std::unordered_map<std::uint64_t, TrialRecord>> read_trial_log(
    const std::filesystem::path& path) {
  std::unordered_map<std::string, std::unordered_map<std::uint64_t, TrialRecord>> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error&) {
      break;  // a torn final line from an interrupted run
    }
    TrialRecord r;
    r.done = 1;
    r.outcome = parse_outcome(j.at("outcome").get<std::string>());
    if (j.contains("exceeds")) {
      const auto ex = j["exceeds"].get<std::vector<bool>>();
      for (std::size_t i = 0; i < ex.size(); ++i)
        if (ex[i]) r.exceeds |= 1u << i;
    }
    out[j.at("variant").get<std::string>()][j.at("trial").get<std::uint64_t>()] = r;
  }
  return out;
}

inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace detail

/// Golden outputs of `graph` must match `expected` (label, or a deviation
/// within the smallest threshold). Returns the offending input index.
inline std::optional<std::size_t> first_incorrect_input(const Executor& exec, const std::vector<Tensor>& inputs,
                                                        const std::vector<double>& expected) {
  const auto& task = exec.graph().task;
  for (std::size_t i = 0; i < inputs.size() && i < expected.size(); ++i) {
    const Tensor out = exec.infer(inputs[i]);
    if (task.is_classification()) {
      if (static_cast<double>(argmax(out)) != expected[i]) return i;
    } else {
      const double dev = std::abs(regression_degrees(out, task.unit) - expected[i]);
      if (!(dev <= task.sdc_thresholds.front())) return i;
    }
  }
  return std::nullopt;
}

/// Runs every variant over the same fault plan. Results are independent of
/// the worker count.
inline std::vector<CampaignResult> run_campaign(const CampaignConfig& cfg) {
  if (cfg.variants.empty()) throw Error("campaign has no variants");
  if (cfg.inputs.empty()) throw Error("campaign has no inputs");
  if (cfg.mode == CampaignMode::Sampled && cfg.trials_per_input < 1) throw Error("trials per input must be >= 1");
  if (!cfg.expected.empty() && cfg.expected.size() != cfg.inputs.size())
    throw Error("expected values must match the number of inputs");
  if (cfg.mode == CampaignMode::Exhaustive && cfg.multi_bit == MultiBitMode::MultiValue && cfg.bit_count > 1)
    throw Error("exhaustive mode supports single-value faults only");
  const FaultPolicy policy{cfg.include_clip_sites, cfg.exclude_last_fc};
  const auto min_elements = cfg.multi_bit == MultiBitMode::MultiValue ? static_cast<std::size_t>(cfg.bit_count) : 1;

  auto resumed = cfg.trial_log ? detail::read_trial_log(*cfg.trial_log)
                               : std::unordered_map<std::string, std::unordered_map<std::uint64_t, detail::TrialRecord>>{};
  std::ofstream log;
  if (cfg.trial_log) {
    if (cfg.trial_log->has_parent_path()) std::filesystem::create_directories(cfg.trial_log->parent_path());
    log.open(*cfg.trial_log, std::ios::app);
    if (!log) throw IoError("cannot open trial log " + cfg.trial_log->string());
  }

  std::vector<CampaignResult> results;
  std::uint64_t base_flops = 0;
  for (std::size_t v = 0; v < cfg.variants.size(); ++v) {
    const auto& variant = cfg.variants[v];
    const Executor exec(variant.graph, cfg.format, cfg.exec);
    const auto& task = exec.graph().task;
    if (auto bad = first_incorrect_input(exec, cfg.inputs, cfg.expected))
      throw Error("variant '" + variant.name + "' mispredicts input " + std::to_string(*bad) +
                  " without faults");
    const auto universe = site_universe(exec.graph(), cfg.format, policy, min_elements);
    if (universe.total == 0) throw Error("variant '" + variant.name + "' has no eligible fault sites");
    const auto out_pos = exec.position(exec.graph().output_id);
    std::vector<ExecutionTrace> golden;
    for (const auto& in : cfg.inputs) golden.push_back(exec.run(in));

    // Trial t belongs to input t / per_input.
    const auto combos = cfg.mode == CampaignMode::Exhaustive ? bit_combinations(universe.width, cfg.bit_count)
                                                             : std::vector<std::vector<unsigned>>{};
    const std::uint64_t per_input = cfg.mode == CampaignMode::Exhaustive
                                        ? static_cast<std::uint64_t>(universe.total) * combos.size()
                                        : cfg.trials_per_input;
    const std::uint64_t total = per_input * cfg.inputs.size();
    const auto fault_of = [&](std::uint64_t t) {
      if (cfg.mode == CampaignMode::Sampled)
        return sample_fault(universe, cfg.bit_count, cfg.multi_bit, cfg.seed, t);
      const std::uint64_t local = t % per_input;
      const auto e = static_cast<std::size_t>(local / combos.size());
      const auto op = universe.locate(e);
      FaultSpec f;
      f.target_op = universe.ops[op];
      f.trial_index = t;
      f.upsets.push_back({e - universe.prefix[op], combos[local % combos.size()]});
      return f;
    };

    std::vector<detail::TrialRecord> records(total);
    if (auto it = resumed.find(variant.name); it != resumed.end())
      for (const auto& [t, r] : it->second)
        if (t < total) records[t] = r;

    const auto run_block = [&](std::uint64_t begin, std::uint64_t end) {
      std::atomic<std::uint64_t> next{begin};
      const auto body = [&] {
        Executor::Workspace ws;
        for (std::uint64_t t = next++; t < end; t = next++) {
          if (records[t].done) continue;
          const auto input = static_cast<std::size_t>(t / per_input);
          const auto f = fault_of(t);
          const Tensor& faulty = exec.rerun_with_fault(golden[input], f, ws, policy);
          const auto c = classify_outcome(golden[input].outputs[out_pos], faulty, task);
          detail::TrialRecord r;
          r.done = 2;  // fresh, not yet logged
          r.outcome = c.outcome;
          for (std::size_t i = 0; i < c.exceeds.size(); ++i)
            if (c.exceeds[i]) r.exceeds |= 1u << i;
          records[t] = r;
        }
      };
      const auto workers = std::max(1, cfg.workers);
      if (workers == 1) {
        body();
      } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(body);
      }
      if (!log.is_open()) return;
      for (std::uint64_t t = begin; t < end; ++t) {
        if (records[t].done != 2) continue;
        log << detail::trial_line(variant.name, t, static_cast<std::size_t>(t / per_input), fault_of(t), records[t],
                                  task.sdc_thresholds.size())
            << '\n';
        records[t].done = 1;
      }
      log.flush();
    };
    constexpr std::uint64_t kBlock = 4096;
    for (std::uint64_t b = 0; b < total; b += kBlock) run_block(b, std::min(total, b + kBlock));

    CampaignResult res;
    res.variant = variant.name;
    res.format = cfg.format.name();
    res.mode = cfg.mode == CampaignMode::Sampled ? "sampled" : "exhaustive";
    res.bit_count = cfg.bit_count;
    res.seed = cfg.seed;
    res.n = total;
    if (!task.is_classification()) res.thresholds = task.sdc_thresholds;
    res.threshold_sdc_counts.assign(res.thresholds.size(), 0);
    res.bit_trials.assign(static_cast<std::size_t>(universe.width), 0);
    res.bit_sdc.assign(static_cast<std::size_t>(universe.width), 0);
    for (std::uint64_t t = 0; t < total; ++t) {
      const auto& r = records[t];
      switch (r.outcome) {
        case Outcome::SDC: ++res.sdc_count; break;
        case Outcome::Masked: ++res.masked_count; break;
        case Outcome::Detectable: ++res.detectable_count; break;
      }
      for (std::size_t i = 0; i < res.thresholds.size(); ++i)
        if ((r.exceeds >> i) & 1u) ++res.threshold_sdc_counts[i];
      for (const auto& u : fault_of(t).upsets)
        for (auto bit : u.bit_positions) {
          ++res.bit_trials[bit];
          if (r.outcome == Outcome::SDC) ++res.bit_sdc[bit];
        }
    }
    const auto dn = static_cast<double>(total);
    res.sdc = static_cast<double>(res.sdc_count) / dn;
    res.masked = static_cast<double>(res.masked_count) / dn;
    res.detectable = static_cast<double>(res.detectable_count) / dn;
    res.ci95 = ci95_half_width(res.sdc, total);
    res.flops = exec.flops().total;
    if (v == 0) base_flops = res.flops;
    res.flops_overhead =
        base_flops ? static_cast<double>(res.flops) / static_cast<double>(base_flops) - 1.0 : 0.0;
    if (cfg.trial_log) res.trial_log = cfg.trial_log->string();
    results.push_back(std::move(res));
  }
  return results;
}

// ---- reports -------------------------------------------------------------

namespace detail {

inline std::string threshold_key(double t) {
  std::ostringstream s;
  s << t;
  return s.str();
}

}  // namespace detail

inline json to_json(const CampaignResult& r) {
  json j;
  j["variant"] = r.variant;
  j["format"] = r.format;
  j["mode"] = r.mode;
  j["bits"] = r.bit_count;
  j["seed"] = r.seed;
  j["n"] = r.n;
  j["sdc"] = r.sdc;
  j["masked"] = r.masked;
  j["detectable"] = r.detectable;
  j["ci95"] = r.ci95;
  j["counts"] = {{"sdc", r.sdc_count}, {"masked", r.masked_count}, {"detectable", r.detectable_count}};
  json per = json::object();
  for (std::size_t i = 0; i < r.thresholds.size(); ++i)
    per[detail::threshold_key(r.thresholds[i])] = {
        {"threshold", r.thresholds[i]}, {"sdc", r.threshold_rate(i)}, {"count", r.threshold_sdc_counts[i]},
        {"ci95", r.threshold_ci95(i)}};
  j["per_threshold"] = std::move(per);
  json hist = json::array();
  for (std::size_t b = 0; b < r.bit_trials.size(); ++b)
    hist.push_back({{"bit", b}, {"trials", r.bit_trials[b]}, {"sdc", r.bit_sdc[b]}});
  j["per_bit_histogram"] = std::move(hist);
  j["flops"] = {{"total", r.flops}, {"overhead", r.flops_overhead}};
  if (!r.trial_log.empty()) j["trial_log"] = r.trial_log;
  return j;
}

inline CampaignResult result_from_json(const json& j) {
  CampaignResult r;
  try {
    r.variant = j.at("variant").get<std::string>();
    r.format = j.value("format", std::string{});
    r.mode = j.value("mode", std::string{});
    r.bit_count = j.value("bits", 1);
    r.seed = j.value("seed", std::uint64_t{0});
    r.n = j.at("n").get<std::uint64_t>();
    r.sdc = j.at("sdc").get<double>();
    r.masked = j.at("masked").get<double>();
    r.detectable = j.at("detectable").get<double>();
    r.ci95 = j.at("ci95").get<double>();
    if (j.contains("counts")) {
      r.sdc_count = j["counts"].at("sdc").get<std::uint64_t>();
      r.masked_count = j["counts"].at("masked").get<std::uint64_t>();
      r.detectable_count = j["counts"].at("detectable").get<std::uint64_t>();
    }
    std::vector<std::pair<double, std::uint64_t>> per;
    for (const auto& [key, v] : j.at("per_threshold").items())
      per.emplace_back(v.at("threshold").get<double>(), v.at("count").get<std::uint64_t>());
    std::sort(per.begin(), per.end());
    for (const auto& [t, c] : per) {
      r.thresholds.push_back(t);
      r.threshold_sdc_counts.push_back(c);
    }
    for (const auto& h : j.at("per_bit_histogram")) {
      r.bit_trials.push_back(h.at("trials").get<std::uint64_t>());
      r.bit_sdc.push_back(h.at("sdc").get<std::uint64_t>());
    }
    r.flops = j.at("flops").at("total").get<std::uint64_t>();
    r.flops_overhead = j.at("flops").at("overhead").get<double>();
    r.trial_log = j.value("trial_log", std::string{});
  } catch (const json::exception& e) {
    throw Error(std::string("malformed campaign report: ") + e.what());
  }
  return r;
}

inline json report_json(const std::vector<CampaignResult>& results) {
  json arr = json::array();
  for (const auto& r : results) arr.push_back(to_json(r));
  return json{{"results", std::move(arr)}};
}

inline std::vector<CampaignResult> results_from_report(const json& j) {
  std::vector<CampaignResult> out;
  const json& arr = j.is_array() ? j : j.at("results");
  for (const auto& r : arr) out.push_back(result_from_json(r));
  return out;
}

inline std::string percent(double v, int digits = 2) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f%%", digits, 100.0 * v);
  return buf;
}

inline std::string result_table(const std::vector<CampaignResult>& results) {
  std::string s;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-18s %8s %10s %9s %9s %11s %12s\n", "variant", "n", "sdc", "+/-ci95",
                "masked", "detectable", "flops");
  s += buf;
  for (const auto& r : results) {
    std::snprintf(buf, sizeof buf, "%-18s %8llu %10s %9s %9s %11s %12llu\n", r.variant.c_str(),
                  static_cast<unsigned long long>(r.n), percent(r.sdc).c_str(), percent(r.ci95).c_str(),
                  percent(r.masked).c_str(), percent(r.detectable).c_str(),
                  static_cast<unsigned long long>(r.flops));
    s += buf;
    for (std::size_t i = 0; i < r.thresholds.size(); ++i) {
      std::snprintf(buf, sizeof buf, "  > %-6g deg      %10s %9s\n", r.thresholds[i], percent(r.threshold_rate(i)).c_str(),
                    percent(r.threshold_ci95(i)).c_str());
      s += buf;
    }
  }
  return s;
}

/// Per-bit SDC histogram as CSV: variant,bit,trials,sdc,rate.
inline std::string bit_histogram_csv(const std::vector<CampaignResult>& results) {
  std::string s = "variant,bit,trials,sdc,rate\n";
  char buf[160];
  for (const auto& r : results)
    for (std::size_t b = 0; b < r.bit_trials.size(); ++b) {
      const double rate = r.bit_trials[b] ? static_cast<double>(r.bit_sdc[b]) / static_cast<double>(r.bit_trials[b]) : 0.0;
      std::snprintf(buf, sizeof buf, "%s,%zu,%llu,%llu,%.6f\n", r.variant.c_str(), b,
                    static_cast<unsigned long long>(r.bit_trials[b]), static_cast<unsigned long long>(r.bit_sdc[b]),
                    rate);
      s += buf;
    }
  return s;
}

/// Relative SDC reduction of one variant against the baseline.
struct Reduction {
  std::string variant;
  std::string label;  // "sdc" or "> T deg"
  double baseline = 0.0;
  double protected_rate = 0.0;
  std::optional<double> reduction;  // empty when the baseline rate is 0
};

/// Rows for every non-baseline result: overall rate, then each threshold.
/// The first result is the baseline.
inline std::vector<Reduction> compare_variants(const std::vector<CampaignResult>& results) {
  if (results.empty()) throw Error("nothing to compare");
  const auto& base = results.front();
  const auto row = [](std::string variant, std::string label, double u, double p) {
    Reduction r{std::move(variant), std::move(label), u, p, std::nullopt};
    if (u > 0.0) r.reduction = 1.0 - p / u;
    return r;
  };
  std::vector<Reduction> out;
  for (std::size_t i = 1; i < results.size(); ++i) {
    const auto& r = results[i];
    out.push_back(row(r.variant, "sdc", base.sdc, r.sdc));
    for (std::size_t t = 0; t < r.thresholds.size() && t < base.thresholds.size(); ++t)
      out.push_back(row(r.variant, "> " + detail::threshold_key(r.thresholds[t]) + " deg", base.threshold_rate(t),
                        r.threshold_rate(t)));
  }
  return out;
}

inline std::string reduction_table(const std::vector<Reduction>& rows, const std::string& baseline_name) {
  std::string s;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-18s %-12s %12s %12s %12s\n", "variant", "metric", baseline_name.c_str(),
                "protected", "reduction");
  s += buf;
  for (const auto& r : rows) {
    const std::string red = r.reduction ? percent(*r.reduction, 1) : "n/a";
    std::snprintf(buf, sizeof buf, "%-18s %-12s %12s %12s %12s\n", r.variant.c_str(), r.label.c_str(),
                  percent(r.baseline).c_str(), percent(r.protected_rate).c_str(), red.c_str());
    s += buf;
  }
  return s;
}

inline std::string reduction_csv(const std::vector<Reduction>& rows) {
  std::string s = "variant,metric,baseline,protected,reduction\n";
  char buf[256];
  for (const auto& r : rows) {
    if (r.reduction)
      std::snprintf(buf, sizeof buf, "%s,%s,%.6f,%.6f,%.6f\n", r.variant.c_str(), r.label.c_str(), r.baseline,
                    r.protected_rate, *r.reduction);
    else
      std::snprintf(buf, sizeof buf, "%s,%s,%.6f,%.6f,n/a\n", r.variant.c_str(), r.label.c_str(), r.baseline,
                    r.protected_rate);
    s += buf;
  }
  return s;
}

}  // namespace ranger
