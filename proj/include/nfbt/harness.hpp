// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The nfbt Authors

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nfbt/channel.hpp"
#include "nfbt/codebook.hpp"
#include "nfbt/metrics.hpp"
#include "nfbt/phase_retrieval.hpp"
#include "nfbt/refine.hpp"
#include "nfbt/stage1.hpp"
#include "nfbt/types.hpp"

namespace nfbt {

// ---------------------------------------------------------------- seeds

std::uint64_t splitmix64(std::uint64_t x);

/// Seed of trial `trial` at grid point `point`:
///   splitmix64(splitmix64(splitmix64(master) ^ point) ^ trial).
/// Adding trials or grid points never changes existing seeds.
std::uint64_t trial_seed(std::uint64_t master, std::uint64_t point, std::uint64_t trial);

/// Independent generator for one purpose inside a trial.
enum class Stream : std::uint64_t {
  kScenario = 1,
  kSweep = 2,
  kCoarse = 3,
  kProposed = 10,
  kLos = 11,
  kPsoFull = 12,
};

Rng stream_rng(std::uint64_t trial_seed, Stream s);

// ---------------------------------------------------------------- config

inline const std::vector<std::string>& known_estimators() {
  static const std::vector<std::string> ids{"perfect", "proposed", "coarse", "los", "farfield", "pso_full"};
  return ids;
}

struct CoarseSource {
  enum class Kind { kSynthetic, kFile };
  Kind kind = Kind::kSynthetic;
  CoarseErrorModel synthetic;
  std::string coarse_file;
  std::string error_stats_file;
  std::string dataset_file;
};

struct ExperimentConfig {
  std::string profile = "paper";
  ScenarioConfig<double> scenario;
  double pilot_power_dbm = 10.0;
  double noise_power_dbm = -80.0;
  std::vector<double> snr_points{0.0, 10.0, 20.0};
  std::vector<int> antenna_counts;  // empty: scenario.array.n_antennas only
  int n_trials = 100;
  std::vector<std::string> estimators = known_estimators();
  PsoParams<double> pso;
  GsParams<double> gs;
  double k_sigma = 3.0;
  double threshold = kDefaultThreshold;
  std::uint64_t seed = 1;
  CoarseSource coarse;
  int los_range_grid = 64;
  bool farfield_single_beam = false;
  bool record_trajectories = true;
  int threads = 0;  // 0: library default

  double pilot_power() const { return dbm_to_watt(pilot_power_dbm); }
  std::vector<int> antenna_grid() const;
  void validate() const;
};

/// "paper": N = 256, 30 GHz, 50-particle swarm. "desk": the same with N = 64 and
/// 100 trials.
ExperimentConfig profile_defaults(const std::string& profile);

/// Overlays a TOML document on the defaults of `profile_override`, else of the
/// document's own `profile` key, else of "paper". Unknown keys are rejected.
ExperimentConfig parse_config(const std::string& toml_text,
                              const std::optional<std::string>& profile_override = std::nullopt);
ExperimentConfig load_config(const std::string& path,
                             const std::optional<std::string>& profile_override = std::nullopt);

std::vector<std::string> split_list(const std::string& csv);

// ---------------------------------------------------------------- dataset

struct DatasetRecord {
  VecXd pattern;
  double los_theta = 0.0;
  double los_range = 0.0;
  VecXd thetas;  // l_max slots, zero padded
  VecXd ranges;
  VecXi present;
  double snr_db = 0.0;
  std::uint64_t seed = 0;
};

/// Noiseless channel plus the DFT sweep for one seed.
struct TrialScene {
  ArrayGeometry<double> array;
  ChannelRealization<double> truth;
  CVecXd h;
  double pilot_power = 0.0;
  double noise_power = 0.0;
  PowerPattern<double> pattern;
};

TrialScene make_scene(const ExperimentConfig& cfg, int n_antennas, double snr_db, std::uint64_t seed,
                      const DftCodebook<double>& codebook);

DatasetRecord to_record(const TrialScene& scene, int l_max, double snr_db, std::uint64_t seed);

/// Record k uses SNR point k mod S and the seed of trial k / S at that point,
/// so record k and trial (k mod S, k / S) of `run` share a channel.
void generate_dataset(const ExperimentConfig& cfg, std::int64_t n_samples, std::ostream& out);
void generate_dataset(const ExperimentConfig& cfg, std::int64_t n_samples, const std::string& path);

std::vector<DatasetRecord> read_dataset(std::istream& in);
std::vector<DatasetRecord> load_dataset(const std::string& path);
void write_record(std::ostream& out, const DatasetRecord& r);

// ---------------------------------------------------------------- experiment

struct TrialRecord {
  int n_antennas = 0;
  double snr_db = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;
  std::string estimator;
  double nmse_db = 0.0;
  double nmse_unaligned_db = 0.0;
  double rate = 0.0;
  double perfect_rate = 0.0;
  double rmse_theta = 0.0;  // NaN when the estimator reports no positions
  double rmse_range = 0.0;
  int matched_pairs = 0;
  int misses = 0;
  int false_alarms = 0;
  int n_true_paths = 0;
  int n_est_paths = 0;
  bool path_count_correct = false;
  double fitness = 0.0;  // NaN unless the estimator runs a swarm
  double residual = 0.0;
  long pilots = 0;
  double runtime_s = 0.0;  // written to runtime.csv only
  std::vector<double> fitness_trajectory;
  std::vector<double> residual_trajectory;
};

struct TrialFailure {
  int n_antennas = 0;
  double snr_db = 0.0;
  int trial = 0;
  std::string estimator;  // empty when the whole trial failed
  std::string message;
};

struct ExperimentResults {
  std::vector<TrialRecord> records;  // (n_antennas, snr, trial, estimator) order
  std::vector<TrialFailure> failures;
};

/// Runs every configured estimator on one scene.
std::vector<TrialRecord> run_trial(const ExperimentConfig& cfg, const DftCodebook<double>& codebook,
                                   const TrialScene& scene, double snr_db, std::uint64_t seed, int trial,
                                   const CoarseEstimate& coarse, const ErrorStats& stats,
                                   std::vector<TrialFailure>& failures);

/// Position errors with the LoS paired by index and NLoS paths matched by
/// minimum squared distance. Path 0 of `est` is the LoS estimate.
MatchedErrors position_errors(const ParameterVectord& est, const ChannelRealization<double>& truth);

ExperimentResults run_experiment(const ExperimentConfig& cfg);

/// Synthetic or file-based coarse estimates matched against their truths.
std::vector<CalibrationPair> calibration_pairs(const ExperimentConfig& cfg, int snr_index);

// ---------------------------------------------------------------- reporting

void write_results_csv(std::ostream& out, const std::vector<TrialRecord>& records);
void write_runtime_csv(std::ostream& out, const std::vector<TrialRecord>& records);
void write_trajectories_csv(std::ostream& out, const std::vector<TrialRecord>& records);
void write_summary_json(std::ostream& out, const ExperimentConfig& cfg, const ExperimentResults& results);
void write_failures_log(std::ostream& out, const std::vector<TrialFailure>& failures);

/// Writes results.csv, summary.json, trajectories.csv, runtime.csv and
/// failures.log under `dir`.
void write_results_dir(const std::string& dir, const ExperimentConfig& cfg, const ExperimentResults& results);

std::vector<TrialRecord> read_results_csv(std::istream& in);

inline const std::vector<std::string>& plot_kinds() {
  static const std::vector<std::string> kinds{"nmse_vs_snr", "rate_vs_snr", "rmse_vs_snr",
                                              "rate_vs_antennas", "convergence", "runtime"};
  return kinds;
}

/// Tidy CSV "x,series,value,spread" from a results directory. Spread is the
/// interquartile range for medians and the standard deviation for means.
void emit_plot_data(const std::string& results_dir, const std::string& kind, std::ostream& out);

double median(std::vector<double> v);
double quantile(std::vector<double> v, double q);

}  // namespace nfbt
