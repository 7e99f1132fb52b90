// SPDX-License-Identifier: Apache-2.0
//
// ranger: profile -> instrument -> inject -> evaluate -> report.
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ranger/ranger.hpp"

namespace fs = std::filesystem;
using namespace ranger;

namespace {

struct DataSource {
  std::string images;
  std::string labels;
  std::string synthetic;
  std::uint64_t data_seed = 1;
  std::size_t count = 1000;
  std::size_t offset = 0;
  std::size_t limit = 0;

  void add(CLI::App* sub) {
    sub->add_option("--images", images, "Image tensor file (IDX or RGTN)");
    sub->add_option("--labels", labels, "Label/target tensor file (IDX or RGTN)");
    sub->add_option("--synthetic", synthetic, "Generate data instead: digits, steering or separable")
        ->check(CLI::IsMember({"digits", "steering", "separable"}));
    sub->add_option("--data-seed", data_seed, "Seed of the synthetic generator");
    sub->add_option("--count", count, "Number of synthetic samples to generate");
    sub->add_option("--offset", offset, "Skip this many leading samples");
    sub->add_option("--limit", limit, "Use at most this many samples (0 = all)");
  }

  bool given() const { return !synthetic.empty() || !images.empty(); }

  zoo::Dataset load() const {
    zoo::Dataset d;
    if (!synthetic.empty()) {
      d = zoo::make_dataset(synthetic, count, data_seed);
    } else {
      if (images.empty() || labels.empty()) throw CLI::ValidationError("data", "need --images and --labels, or --synthetic");
      d = zoo::load_dataset(images, labels);
    }
    const auto end = limit ? offset + limit : d.size();
    return d.slice(offset, end);
  }
};

struct ModelPath {
  std::string manifest;
  std::string weights;

  Graph load() const {
    const fs::path w = weights.empty() ? default_weights_path(manifest) : fs::path(weights);
    return load_model(manifest, w);
  }
};

void save_graph(const Graph& g, const std::string& out, const std::string& weights) {
  const fs::path w = weights.empty() ? default_weights_path(out) : fs::path(weights);
  save_model(g, out, w);
  std::cout << "wrote " << out << " and " << w.string() << "\n";
}

NumericFormat format_option(const std::string& s) { return parse_format(s); }

void print_metrics(const std::string& name, const Graph& g, const zoo::Metrics& m) {
  if (g.task.is_classification())
    std::printf("%-16s n=%zu accuracy=%.4f%%\n", name.c_str(), m.n, 100.0 * m.accuracy);
  else
    std::printf("%-16s n=%zu rmse=%.6f avg_deviation=%.6f\n", name.c_str(), m.n, m.rmse, m.avg_deviation);
}

json metrics_json(const zoo::Metrics& m) {
  return {{"n", m.n}, {"accuracy", m.accuracy}, {"rmse", m.rmse}, {"avg_deviation", m.avg_deviation}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Range-restriction fault-resilience toolkit for neural-network inference"};
  app.set_config("--config", "", "TOML experiment file; one [section] per subcommand");
  app.require_subcommand(1);
  app.fallthrough(false);

  // ---- train -------------------------------------------------------------
  auto* train = app.add_subcommand("train", "Train a model-zoo architecture");
  zoo::TrainSpec spec;
  DataSource train_data;
  std::string train_out, train_weights, activation = "relu", unit = "degrees", data_out;
  double val_fraction = 0.2;
  train->add_option("--arch", spec.arch, "tiny-mlp, lenet-mini or steer-mini")
      ->check(CLI::IsMember({"tiny-mlp", "lenet-mini", "steer-mini"}));
  train->add_option("--epochs", spec.epochs)->check(CLI::PositiveNumber);
  train->add_option("--lr", spec.lr);
  train->add_option("--decay", spec.decay);
  train->add_option("--batch", spec.batch)->check(CLI::PositiveNumber);
  train->add_option("--seed", spec.seed, "Weight init and shuffle seed");
  train->add_option("--classes", spec.classes, "tiny-mlp output classes");
  train->add_option("--activation", activation)->check(CLI::IsMember({"relu", "tanh"}));
  train->add_option("--unit", unit, "steer-mini output unit")->check(CLI::IsMember({"degrees", "radians"}));
  train->add_option("--val-fraction", val_fraction, "Held-out tail of the data")->check(CLI::Range(0.0, 0.9));
  train->add_option("--data-out", data_out, "Also write the data as <prefix>-images/-labels files");
  train->add_option("--out", train_out, "Model manifest to write")->required();
  train->add_option("--weights", train_weights, "Weights blob (default: manifest with .bin)");
  train_data.add(train);

  // ---- profile -----------------------------------------------------------
  auto* profile = app.add_subcommand("profile", "Derive activation bounds from sample data");
  ModelPath profile_model;
  DataSource profile_data;
  double percentile = 100.0;
  std::string profile_format = "float32", profile_out;
  ProfileOptions popts;
  profile->add_option("--model", profile_model.manifest)->required();
  profile->add_option("--weights", profile_model.weights);
  profile->add_option("--percentile", percentile)->check(CLI::Range(0.0, 100.0));
  profile->add_option("--format", profile_format, "float32, fixed32, fixed16 or fixedT:F");
  profile->add_option("--seed", popts.seed, "Reservoir seed below the 100th percentile");
  profile->add_option("--reservoir", popts.reservoir_size);
  profile->add_option("--workers", popts.workers)->check(CLI::PositiveNumber);
  profile->add_option("--out", profile_out, "Bounds JSON to write")->required();
  profile_data.add(profile);

  // ---- instrument --------------------------------------------------------
  auto* instrument = app.add_subcommand("instrument", "Insert range-restriction Clip nodes");
  ModelPath inst_model;
  std::string inst_bounds, policy_name = "to-bound", extension_name = "transitive", inst_out, inst_weights;
  std::uint64_t policy_seed = 0;
  instrument->add_option("--model", inst_model.manifest)->required();
  instrument->add_option("--weights", inst_model.weights);
  instrument->add_option("--bounds", inst_bounds)->required();
  instrument->add_option("--policy", policy_name)->check(CLI::IsMember({"to-bound", "to-zero", "random"}));
  instrument->add_option("--seed", policy_seed, "Seed of the random policy");
  instrument->add_option("--extension", extension_name)->check(CLI::IsMember({"one-hop", "transitive"}));
  instrument->add_option("--out", inst_out)->required();
  instrument->add_option("--out-weights", inst_weights);

  // ---- inject ------------------------------------------------------------
  auto* inject = app.add_subcommand("inject", "Run a fault-injection campaign");
  ModelPath inj_model;
  DataSource inj_data;
  std::string inj_bounds, inj_format = "fixed32", mode = "sampled", multi = "single-value", inj_out, inj_csv,
                          inj_log, inj_policy = "to-bound", inj_extension = "transitive", act_swap_spec;
  std::vector<std::string> extra_variants;
  std::size_t trials = 1000, num_inputs = 10, random_inputs = 0;
  int bits = 1, workers = 1;
  std::uint64_t inj_seed = 0;
  bool exclude_last_fc = false, include_clip = false;
  inject->add_option("--model", inj_model.manifest, "Baseline model")->required();
  inject->add_option("--weights", inj_model.weights);
  inject->add_option("--bounds", inj_bounds, "Adds an instrumented variant named 'ranger'");
  inject->add_option("--policy", inj_policy)->check(CLI::IsMember({"to-bound", "to-zero", "random"}));
  inject->add_option("--extension", inj_extension)->check(CLI::IsMember({"one-hop", "transitive"}));
  inject->add_option("--variant", extra_variants, "Extra variant as NAME=manifest.json (repeatable)");
  inject->add_option("--act-swap", act_swap_spec, "Adds an act-swap variant, e.g. relu:tanh");
  inject->add_option("--trials", trials, "Trials per input (sampled mode)")->check(CLI::PositiveNumber);
  inject->add_option("--bits", bits, "Bits flipped per fault")->check(CLI::Range(1, 32));
  inject->add_option("--multi-bit", multi)->check(CLI::IsMember({"single-value", "multi-value"}));
  inject->add_option("--format", inj_format);
  inject->add_option("--seed", inj_seed);
  inject->add_option("--mode", mode)->check(CLI::IsMember({"sampled", "exhaustive"}));
  inject->add_flag("--exclude-last-fc", exclude_last_fc, "Never inject into the last FullyConnected layer");
  inject->add_flag("--include-clip-sites", include_clip, "Allow faults in Clip outputs");
  inject->add_option("--inputs", num_inputs, "Correctly predicted inputs to use")->check(CLI::PositiveNumber);
  inject->add_option("--random-inputs", random_inputs, "Use N seeded uniform [-1, 1] inputs instead of data");
  inject->add_option("--workers", workers)->check(CLI::PositiveNumber);
  inject->add_option("--log", inj_log, "JSON-lines trial log (resumable)");
  inject->add_option("--out", inj_out, "Report JSON");
  inject->add_option("--csv", inj_csv, "Per-bit histogram CSV");
  inj_data.add(inject);

  // ---- evaluate ----------------------------------------------------------
  auto* evaluate = app.add_subcommand("evaluate", "Fault-free accuracy or RMSE on a dataset");
  std::vector<std::string> eval_models;
  DataSource eval_data;
  std::string eval_format = "float32", eval_out;
  int eval_workers = 1;
  evaluate->add_option("--model", eval_models, "Model manifest(s); weights next to each")->required();
  evaluate->add_option("--format", eval_format);
  evaluate->add_option("--workers", eval_workers)->check(CLI::PositiveNumber);
  evaluate->add_option("--out", eval_out, "Metrics JSON");
  eval_data.add(evaluate);

  // ---- report ------------------------------------------------------------
  auto* report = app.add_subcommand("report", "Compare campaign reports");
  std::vector<std::string> compare;
  std::string report_csv, report_hist;
  report->add_option("--compare", compare, "Report JSON files; the first result is the baseline")->required();
  report->add_option("--csv", report_csv, "Reduction table as CSV");
  report->add_option("--histogram-csv", report_hist, "Per-bit histograms as CSV");

  // ---- convergence -------------------------------------------------------
  auto* convergence = app.add_subcommand("convergence", "Running activation maxima versus sample count");
  ModelPath conv_model;
  DataSource conv_data;
  std::vector<std::size_t> checkpoints{10, 100, 1000};
  std::string conv_format = "float32", conv_out;
  convergence->add_option("--model", conv_model.manifest)->required();
  convergence->add_option("--weights", conv_model.weights);
  convergence->add_option("--checkpoints", checkpoints)->delimiter(',');
  convergence->add_option("--format", conv_format);
  convergence->add_option("--out", conv_out, "CSV to write (default: stdout)");
  conv_data.add(convergence);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*train) {
      spec.activation = activation == "tanh" ? OpKind::Tanh : OpKind::ReLU;
      spec.unit = unit == "radians" ? AngleUnit::Radians : AngleUnit::Degrees;
      if (!train_data.given()) throw Error("train needs --synthetic or --images/--labels");
      const auto data = train_data.load();
      if (!data_out.empty()) {
        const bool idx = data.generator == "digits";
        zoo::save_dataset(data, data_out + (idx ? "-images.idx" : "-images.rgtn"),
                          data_out + (idx ? "-labels.idx" : "-labels.rgtn"));
      }
      const auto n_train = static_cast<std::size_t>(static_cast<double>(data.size()) * (1.0 - val_fraction));
      const auto tr = data.slice(0, n_train), va = data.slice(n_train, data.size());
      const auto res = zoo::train(spec, tr);
      for (std::size_t e = 0; e < res.epoch_loss.size(); ++e)
        std::printf("epoch %zu loss %.6f\n", e + 1, res.epoch_loss[e]);
      if (va.size()) print_metrics("validation", res.graph, zoo::evaluate_accuracy(res.graph, va));
      save_graph(res.graph, train_out, train_weights);
    } else if (*profile) {
      popts.format = format_option(profile_format);
      const Graph g = profile_model.load();
      const auto data = profile_data.load();
      const auto samples = data.samples(0, data.size());
      const auto bounds = profile_bounds(g, samples, percentile, popts);
      save_bounds(bounds, profile_out);
      for (const auto& [id, b] : bounds.act_bounds) std::printf("node %d: [%g, %g]\n", id, b.low, b.up);
      std::cout << "wrote " << profile_out << "\n";
    } else if (*instrument) {
      const Graph g = inst_model.load();
      const auto bounds = load_bounds(inst_bounds);
      const Graph out = insert_ranger(g, bounds, parse_policy(policy_name, policy_seed), parse_extension(extension_name));
      const auto before = count_flops(g).total, after = count_flops(out).total;
      std::printf("inserted %zu Clip nodes; FLOPs %llu -> %llu (+%.3f%%)\n", out.count(OpKind::Clip) - g.count(OpKind::Clip),
                  static_cast<unsigned long long>(before), static_cast<unsigned long long>(after),
                  100.0 * (static_cast<double>(after) / static_cast<double>(before) - 1.0));
      save_graph(out, inst_out, inst_weights);
    } else if (*inject) {
      CampaignConfig cfg;
      cfg.format = format_option(inj_format);
      cfg.trials_per_input = trials;
      cfg.bit_count = bits;
      cfg.seed = inj_seed;
      cfg.exclude_last_fc = exclude_last_fc;
      cfg.include_clip_sites = include_clip;
      cfg.mode = parse_mode(mode);
      cfg.multi_bit = parse_multi_bit(multi);
      cfg.workers = workers;
      if (!inj_log.empty()) cfg.trial_log = inj_log;
      const Graph base = inj_model.load();
      cfg.variants.push_back({"original", base});
      if (!inj_bounds.empty())
        cfg.variants.push_back({"ranger", insert_ranger(base, load_bounds(inj_bounds), parse_policy(inj_policy, inj_seed),
                                                        parse_extension(inj_extension))});
      if (!act_swap_spec.empty()) {
        const auto colon = act_swap_spec.find(':');
        if (colon == std::string::npos) throw Error("--act-swap expects FROM:TO, e.g. relu:tanh");
        const auto kind = [](std::string s) {
          if (s == "relu") return OpKind::ReLU;
          if (s == "tanh") return OpKind::Tanh;
          throw Error("unknown activation '" + s + "'");
        };
        cfg.variants.push_back(
            {"act-swap", act_swap(base, kind(act_swap_spec.substr(0, colon)), kind(act_swap_spec.substr(colon + 1)))});
      }
      for (const auto& v : extra_variants) {
        const auto eq = v.find('=');
        if (eq == std::string::npos) throw Error("--variant expects NAME=manifest.json");
        const fs::path m = v.substr(eq + 1);
        cfg.variants.push_back({v.substr(0, eq), load_model(m, default_weights_path(m))});
      }
      if (random_inputs) {
        Rng rng = make_rng(inj_seed, 0x1a9u);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        const auto& shape = base.input_node().output_shape;
        for (std::size_t i = 0; i < random_inputs; ++i) {
          std::vector<double> vals(static_cast<std::size_t>(element_count(shape)));
          for (auto& v : vals) v = u(rng);
          cfg.inputs.push_back(Tensor::from_values<double>(shape, vals));
        }
      } else {
        const auto data = inj_data.load();
        std::vector<Executor> execs;
        for (const auto& v : cfg.variants) execs.emplace_back(v.graph, cfg.format);
        for (std::size_t i = 0; i < data.size() && cfg.inputs.size() < num_inputs; ++i) {
          const Tensor x = data.sample(i);
          bool ok = true;
          for (const auto& e : execs) ok = ok && !first_incorrect_input(e, {x}, {data.y[i]});
          if (!ok) continue;
          cfg.inputs.push_back(x);
          cfg.expected.push_back(data.y[i]);
        }
        if (cfg.inputs.size() < num_inputs)
          throw Error("only " + std::to_string(cfg.inputs.size()) + " correctly predicted inputs available");
      }
      const auto results = run_campaign(cfg);
      std::cout << result_table(results);
      if (results.size() > 1) std::cout << "\n" << reduction_table(compare_variants(results), results.front().variant);
      if (!inj_out.empty()) {
        ranger::detail::write_file(inj_out, report_json(results).dump(2) + "\n");
        std::cout << "wrote " << inj_out << "\n";
      }
      if (!inj_csv.empty()) ranger::detail::write_file(inj_csv, bit_histogram_csv(results));
    } else if (*evaluate) {
      const auto fmt = format_option(eval_format);
      const auto data = eval_data.load();
      json out = json::object();
      for (const auto& m : eval_models) {
        const Graph g = load_model(m, default_weights_path(m));
        const auto metrics = zoo::evaluate_accuracy(g, data, fmt, eval_workers);
        print_metrics(fs::path(m).stem().string(), g, metrics);
        out[m] = metrics_json(metrics);
      }
      if (!eval_out.empty()) ranger::detail::write_file(eval_out, out.dump(2) + "\n");
    } else if (*report) {
      std::vector<CampaignResult> all;
      for (const auto& path : compare) {
        json j;
        try {
          j = json::parse(ranger::detail::read_file(path));
        } catch (const json::parse_error& e) {
          throw IoError(path + ": " + e.what());
        }
        for (auto& r : results_from_report(j)) all.push_back(std::move(r));
      }
      std::cout << result_table(all) << "\n";
      const auto rows = compare_variants(all);
      std::cout << reduction_table(rows, all.front().variant);
      if (!report_csv.empty()) ranger::detail::write_file(report_csv, reduction_csv(rows));
      if (!report_hist.empty()) ranger::detail::write_file(report_hist, bit_histogram_csv(all));
    } else if (*convergence) {
      const Graph g = conv_model.load();
      const auto data = conv_data.load();
      const auto samples = data.samples(0, data.size());
      const auto rep = bound_convergence_report(g, samples, checkpoints, format_option(conv_format));
      if (conv_out.empty())
        std::cout << rep.to_csv();
      else
        ranger::detail::write_file(conv_out, rep.to_csv());
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
