// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The nfbt Authors
//
// nfbt: dataset generation, Monte-Carlo runs, plot data, error-stats calibration.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "nfbt/harness.hpp"

namespace {

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kPartial = 3 };

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string estimators;
  std::string profile;
  std::string out;
};

nfbt::ExperimentConfig build_config(const Common& c) {
  std::optional<std::string> profile;
  if (!c.profile.empty()) profile = c.profile;
  nfbt::ExperimentConfig cfg =
      c.config.empty() ? nfbt::profile_defaults(profile.value_or("paper")) : nfbt::load_config(c.config, profile);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.estimators.empty()) cfg.estimators = nfbt::split_list(c.estimators);
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* app, Common& c, const char* out_help) {
  app->add_option("--config", c.config, "TOML configuration file")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "master seed (overrides the config)");
  app->add_option("--estimators", c.estimators, "comma-separated estimator ids");
  app->add_option("--profile", c.profile, "default profile")->check(CLI::IsMember({"paper", "desk"}));
  app->add_option("--out", c.out, out_help)->required();
}

std::string snr_tag(double snr) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", snr);
  return buf;
}

int gen_dataset(const Common& c, std::int64_t n) {
  const auto cfg = build_config(c);
  const std::filesystem::path p(c.out);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  nfbt::generate_dataset(cfg, n, c.out);
  std::cerr << "wrote " << n << " records to " << c.out << '\n';
  return kOk;
}

int run(const Common& c) {
  const auto cfg = build_config(c);
  const auto results = nfbt::run_experiment(cfg);
  nfbt::write_results_dir(c.out, cfg, results);
  std::cerr << "wrote " << results.records.size() << " rows to " << c.out << '\n';
  if (!results.failures.empty()) {
    std::cerr << results.failures.size() << " failures, see " << (std::filesystem::path(c.out) / "failures.log")
              << '\n';
    return kPartial;
  }
  return kOk;
}

int calibrate(const Common& c) {
  const auto cfg = build_config(c);
  namespace fs = std::filesystem;
  fs::create_directories(c.out);
  const auto pooled = nfbt::calibrate_error_stats(nfbt::calibration_pairs(cfg, -1), cfg.threshold);
  nfbt::save_error_stats((fs::path(c.out) / "error_stats.json").string(), pooled);
  for (std::size_t s = 0; s < cfg.snr_points.size(); ++s) {
    const auto pairs = nfbt::calibration_pairs(cfg, static_cast<int>(s));
    if (pairs.empty()) continue;
    const auto st = nfbt::calibrate_error_stats(pairs, cfg.threshold);
    nfbt::save_error_stats((fs::path(c.out) / ("error_stats_snr" + snr_tag(cfg.snr_points[s]) + ".json")).string(),
                           st);
  }
  std::cerr << "wrote error statistics to " << c.out << '\n';
  return kOk;
}

int plot_data(const std::string& results, const std::string& kind, const std::string& out) {
  if (out.empty() || out == "-") {
    nfbt::emit_plot_data(results, kind, std::cout);
    return kOk;
  }
  std::ofstream f(out, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + out);
  nfbt::emit_plot_data(results, kind, f);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"near-field multi-path beam training experiments"};
  app.require_subcommand(1);

  Common gen, runc, cal;
  std::int64_t n_samples = 0;
  auto* g = app.add_subcommand("gen-dataset", "write an NDJSON training dataset");
  add_common(g, gen, "dataset file");
  g->add_option("--n-samples", n_samples, "number of records")->required()->check(CLI::NonNegativeNumber);

  auto* r = app.add_subcommand("run", "run the Monte-Carlo sweep");
  add_common(r, runc, "results directory");

  auto* k = app.add_subcommand("calibrate", "estimate Stage-1 error statistics");
  add_common(k, cal, "output directory");

  std::string results, kind, plot_out;
  auto* p = app.add_subcommand("plot-data", "emit tidy CSV for one plot");
  p->add_option("--results", results, "results directory")->required()->check(CLI::ExistingDirectory);
  p->add_option("--kind", kind, "plot kind")->required()->check(CLI::IsMember(nfbt::plot_kinds()));
  p->add_option("--out", plot_out, "output CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*g) return gen_dataset(gen, n_samples);
    if (*r) return run(runc);
    if (*k) return calibrate(cal);
    return plot_data(results, kind, plot_out);
  } catch (const nfbt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const nfbt::SchemaError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
}
