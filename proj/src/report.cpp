// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The nfbt Authors

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "nfbt/harness.hpp"

namespace nfbt {

using nlohmann::json;

namespace {

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

json num_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

const char* kResultsHeader =
    "n_antennas,snr_db,trial,seed,estimator,nmse_db,nmse_unaligned_db,rate,perfect_rate,rmse_theta,rmse_range,"
    "matched_pairs,misses,false_alarms,n_true_paths,n_est_paths,path_count_correct,fitness,residual,pilots";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& s, std::int64_t row) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw SchemaError("not a number: '" + s + "'", row);
  }
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double q = 0.0;
  for (double x : v) q += (x - m) * (x - m);
  return std::sqrt(q / static_cast<double>(v.size() - 1));
}

double iqr(const std::vector<double>& v) { return quantile(v, 0.75) - quantile(v, 0.25); }

/// Groups keyed by (n_antennas, snr, estimator) in first-seen estimator order.
struct GroupKey {
  int n_antennas;
  double snr_db;
  int estimator_rank;
  std::string estimator;
  bool operator<(const GroupKey& o) const {
    return std::tie(n_antennas, snr_db, estimator_rank) < std::tie(o.n_antennas, o.snr_db, o.estimator_rank);
  }
};

std::map<GroupKey, std::vector<const TrialRecord*>> group(const std::vector<TrialRecord>& records) {
  std::map<std::string, int> rank;
  for (const auto& r : records) rank.emplace(r.estimator, static_cast<int>(rank.size()));
  std::map<GroupKey, std::vector<const TrialRecord*>> g;
  for (const auto& r : records) g[GroupKey{r.n_antennas, r.snr_db, rank[r.estimator], r.estimator}].push_back(&r);
  return g;
}

void write_plot_row(std::ostream& out, double x, const std::string& series, double value, double spread) {
  out << num(x) << ',' << series << ',' << num(value) << ',' << num(spread) << '\n';
}

std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  return in;
}

}  // namespace

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

void write_results_csv(std::ostream& out, const std::vector<TrialRecord>& records) {
  out << kResultsHeader << '\n';
  for (const auto& r : records) {
    out << r.n_antennas << ',' << num(r.snr_db) << ',' << r.trial << ',' << r.seed << ',' << r.estimator << ','
        << num(r.nmse_db) << ',' << num(r.nmse_unaligned_db) << ',' << num(r.rate) << ',' << num(r.perfect_rate)
        << ',' << num(r.rmse_theta) << ',' << num(r.rmse_range) << ',' << r.matched_pairs << ',' << r.misses << ','
        << r.false_alarms << ',' << r.n_true_paths << ',' << r.n_est_paths << ',' << (r.path_count_correct ? 1 : 0)
        << ',' << num(r.fitness) << ',' << num(r.residual) << ',' << r.pilots << '\n';
  }
}

void write_runtime_csv(std::ostream& out, const std::vector<TrialRecord>& records) {
  out << "n_antennas,snr_db,trial,estimator,runtime_s\n";
  for (const auto& r : records)
    out << r.n_antennas << ',' << num(r.snr_db) << ',' << r.trial << ',' << r.estimator << ',' << num(r.runtime_s)
        << '\n';
}

void write_trajectories_csv(std::ostream& out, const std::vector<TrialRecord>& records) {
  out << "n_antennas,snr_db,trial,estimator,iteration,fitness,residual\n";
  for (const auto& r : records)
    for (std::size_t i = 0; i < r.fitness_trajectory.size(); ++i)
      out << r.n_antennas << ',' << num(r.snr_db) << ',' << r.trial << ',' << r.estimator << ',' << i << ','
          << num(r.fitness_trajectory[i]) << ',' << num(r.residual_trajectory[i]) << '\n';
}

void write_summary_json(std::ostream& out, const ExperimentConfig& cfg, const ExperimentResults& results) {
  json j;
  j["profile"] = cfg.profile;
  j["seed"] = cfg.seed;
  j["n_trials"] = cfg.n_trials;
  j["estimators"] = cfg.estimators;
  j["snr_db"] = cfg.snr_points;
  j["pilot_power_w"] = cfg.pilot_power();
  j["noise_power"] = "set per trial from snr_db and ||h||";
  const bool file = cfg.coarse.kind == CoarseSource::Kind::kFile;
  j["coarse_source"] = file ? "file" : "synthetic";
  j["error_stats"] = file ? cfg.coarse.error_stats_file : "synthetic error model";
  j["rows"] = results.records.size();
  j["failures"] = results.failures.size();

  json groups = json::array();
  for (const auto& [key, rows] : group(results.records)) {
    std::vector<double> nm, nmu, rate, prate, correct;
    MatchedErrors acc;
    for (const TrialRecord* r : rows) {
      nm.push_back(r->nmse_db);
      nmu.push_back(r->nmse_unaligned_db);
      rate.push_back(r->rate);
      prate.push_back(r->perfect_rate);
      correct.push_back(r->path_count_correct ? 1.0 : 0.0);
      if (r->matched_pairs > 0) {
        acc.sum_sq_theta += r->rmse_theta * r->rmse_theta * r->matched_pairs;
        acc.sum_sq_range += r->rmse_range * r->rmse_range * r->matched_pairs;
        acc.pairs += r->matched_pairs;
      }
      acc.misses += r->misses;
      acc.false_alarms += r->false_alarms;
    }
    json g;
    g["n_antennas"] = key.n_antennas;
    g["snr_db"] = key.snr_db;
    g["estimator"] = key.estimator;
    g["count"] = rows.size();
    g["nmse_db_median"] = num_or_null(median(nm));
    g["nmse_db_mean"] = num_or_null(mean(nm));
    g["nmse_unaligned_db_median"] = num_or_null(median(nmu));
    g["rate_median"] = num_or_null(median(rate));
    g["rate_mean"] = num_or_null(mean(rate));
    g["perfect_rate_median"] = num_or_null(median(prate));
    g["rmse_theta"] = acc.pairs > 0 ? json(std::sqrt(acc.sum_sq_theta / acc.pairs)) : json(nullptr);
    g["rmse_range"] = acc.pairs > 0 ? json(std::sqrt(acc.sum_sq_range / acc.pairs)) : json(nullptr);
    g["matched_pairs"] = acc.pairs;
    g["misses"] = acc.misses;
    g["false_alarms"] = acc.false_alarms;
    g["path_count_accuracy"] = mean(correct);
    groups.push_back(std::move(g));
  }
  j["groups"] = std::move(groups);
  out << j.dump(2) << '\n';
}

void write_failures_log(std::ostream& out, const std::vector<TrialFailure>& failures) {
  for (const auto& f : failures)
    out << "n_antennas=" << f.n_antennas << " snr_db=" << num(f.snr_db) << " trial=" << f.trial
        << " estimator=" << (f.estimator.empty() ? "*" : f.estimator) << ": " << f.message << '\n';
}

void write_results_dir(const std::string& dir, const ExperimentConfig& cfg, const ExperimentResults& results) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto open = [&dir](const char* name) {
    std::ofstream out(fs::path(dir) / name, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + (fs::path(dir) / name).string());
    return out;
  };
  {
    auto o = open("results.csv");
    write_results_csv(o, results.records);
  }
  {
    auto o = open("summary.json");
    write_summary_json(o, cfg, results);
  }
  {
    auto o = open("trajectories.csv");
    write_trajectories_csv(o, results.records);
  }
  {
    auto o = open("runtime.csv");
    write_runtime_csv(o, results.records);
  }
  {
    auto o = open("failures.log");
    write_failures_log(o, results.failures);
  }
}

std::vector<TrialRecord> read_results_csv(std::istream& in) {
  std::vector<TrialRecord> out;
  std::string line;
  std::int64_t row = 0;
  if (!std::getline(in, line)) return out;
  ++row;
  if (line != kResultsHeader) throw SchemaError("unexpected results header", row);
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 20) throw SchemaError("expected 20 columns", row);
    TrialRecord r;
    r.n_antennas = static_cast<int>(to_double(c[0], row));
    r.snr_db = to_double(c[1], row);
    r.trial = static_cast<int>(to_double(c[2], row));
    r.seed = std::stoull(c[3]);
    r.estimator = c[4];
    r.nmse_db = to_double(c[5], row);
    r.nmse_unaligned_db = to_double(c[6], row);
    r.rate = to_double(c[7], row);
    r.perfect_rate = to_double(c[8], row);
    r.rmse_theta = to_double(c[9], row);
    r.rmse_range = to_double(c[10], row);
    r.matched_pairs = static_cast<int>(to_double(c[11], row));
    r.misses = static_cast<int>(to_double(c[12], row));
    r.false_alarms = static_cast<int>(to_double(c[13], row));
    r.n_true_paths = static_cast<int>(to_double(c[14], row));
    r.n_est_paths = static_cast<int>(to_double(c[15], row));
    r.path_count_correct = c[16] == "1";
    r.fitness = to_double(c[17], row);
    r.residual = to_double(c[18], row);
    r.pilots = static_cast<long>(to_double(c[19], row));
    out.push_back(std::move(r));
  }
  return out;
}

void emit_plot_data(const std::string& results_dir, const std::string& kind, std::ostream& out) {
  namespace fs = std::filesystem;
  const auto& kinds = plot_kinds();
  if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) throw ConfigError("unknown plot kind '" + kind + "'");
  out << "x,series,value,spread\n";
  const fs::path dir(results_dir);

  if (kind == "convergence") {
    auto in = open_in(dir / "trajectories.csv");
    std::string line;
    std::getline(in, line);
    // (estimator, iteration) -> fitness values across trials
    std::map<std::pair<std::string, int>, std::vector<double>> by;
    std::vector<std::string> order;
    std::int64_t row = 1;
    while (std::getline(in, line)) {
      ++row;
      const auto c = split_csv(line);
      if (c.size() != 7) throw SchemaError("expected 7 columns", row);
      if (std::find(order.begin(), order.end(), c[3]) == order.end()) order.push_back(c[3]);
      by[{c[3], static_cast<int>(to_double(c[4], row))}].push_back(to_double(c[5], row));
    }
    for (const auto& est : order)
      for (const auto& [key, v] : by)
        if (key.first == est) write_plot_row(out, key.second, est, median(v), iqr(v));
    return;
  }

  if (kind == "runtime") {
    auto in = open_in(dir / "runtime.csv");
    std::string line;
    std::getline(in, line);
    std::map<std::pair<double, std::string>, std::vector<double>> by;
    std::vector<std::string> order;
    std::int64_t row = 1;
    while (std::getline(in, line)) {
      ++row;
      const auto c = split_csv(line);
      if (c.size() != 5) throw SchemaError("expected 5 columns", row);
      if (std::find(order.begin(), order.end(), c[3]) == order.end()) order.push_back(c[3]);
      by[{to_double(c[1], row), c[3]}].push_back(to_double(c[4], row));
    }
    std::vector<double> xs;
    for (const auto& [key, v] : by)
      if (std::find(xs.begin(), xs.end(), key.first) == xs.end()) xs.push_back(key.first);
    for (double x : xs)
      for (const auto& est : order) {
        auto it = by.find({x, est});
        if (it != by.end()) write_plot_row(out, x, est, mean(it->second), stddev(it->second));
      }
    return;
  }

  auto in = open_in(dir / "results.csv");
  const auto records = read_results_csv(in);
  for (const auto& [key, rows] : group(records)) {
    std::vector<double> v;
    if (kind == "nmse_vs_snr") {
      for (const auto* r : rows) v.push_back(r->nmse_db);
      write_plot_row(out, key.snr_db, key.estimator, median(v), iqr(v));
    } else if (kind == "rate_vs_snr") {
      for (const auto* r : rows) v.push_back(r->rate);
      write_plot_row(out, key.snr_db, key.estimator, median(v), iqr(v));
    } else if (kind == "rate_vs_antennas") {
      for (const auto* r : rows) v.push_back(r->rate);
      write_plot_row(out, key.n_antennas, key.estimator + "@" + num(key.snr_db) + "dB", median(v), iqr(v));
    } else {  // rmse_vs_snr
      double st = 0.0, sr = 0.0;
      int n = 0;
      for (const auto* r : rows) {
        if (r->matched_pairs == 0) continue;
        st += r->rmse_theta * r->rmse_theta * r->matched_pairs;
        sr += r->rmse_range * r->rmse_range * r->matched_pairs;
        n += r->matched_pairs;
      }
      if (n == 0) continue;
      write_plot_row(out, key.snr_db, key.estimator + ":theta", std::sqrt(st / n), std::nan(""));
      write_plot_row(out, key.snr_db, key.estimator + ":range", std::sqrt(sr / n), std::nan(""));
    }
  }
}

}  // namespace nfbt
