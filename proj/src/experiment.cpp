// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The nfbt Authors

#include <chrono>
#include <limits>
#include <map>
#include <memory>
#include <sstream>

#include <tbb/global_control.h>
#include <tbb/parallel_for.h>

#include "nfbt/benchmarks.hpp"
#include "nfbt/harness.hpp"
#include "nfbt/metrics.hpp"

namespace nfbt {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
constexpr double kNmseFloor = 1e-30;  // -300 dB, stands in for an exact estimate

struct EstimatorOutput {
  CVecXd h;
  std::optional<ParameterVectord> eta;
  int n_paths = 0;
  double fitness = kNan;
  double residual = kNan;
  long pilots = 0;
  std::vector<double> fitness_trajectory;
  std::vector<double> residual_trajectory;
};

FitnessModel<double> make_model(const ExperimentConfig& cfg, const DftCodebook<double>& cb, const TrialScene& s,
                                const SearchRegion& region) {
  return FitnessModel<double>{s.array, &cb, s.pattern.values, region, cfg.pso.penalty_weight, cfg.gs};
}

EstimatorOutput from_swarm(const RefinedEstimate<double>& r, const TrialScene& s, bool keep_trajectory) {
  EstimatorOutput o;
  o.eta = r.eta;
  o.n_paths = r.eta.n_paths();
  o.h = reconstruct_channel(s.array, r.eta, r.gains, s.pilot_power);
  o.fitness = r.fitness;
  o.residual = r.residual;
  o.pilots = s.array.n_antennas;
  if (keep_trajectory) {
    o.fitness_trajectory = r.fitness_trajectory;
    o.residual_trajectory = r.residual_trajectory;
  }
  return o;
}

}  // namespace

MatchedErrors position_errors(const ParameterVectord& est, const ChannelRealization<double>& truth) {
  MatchedErrors e;
  if (est.n_paths() == 0) {
    e.misses = truth.path_count();
    return e;
  }
  const double dt = est.theta(0) - truth.los.theta;
  const double dr = est.range(0) - truth.los.range;
  e.sum_sq_theta = dt * dt;
  e.sum_sq_range = dr * dr;
  e.pairs = 1;
  const int ne = est.n_paths() - 1;
  const int nt = static_cast<int>(truth.nlos.size());
  SlotPositions a{VecXd(est.thetas().tail(ne)), VecXd(est.ranges().tail(ne))};
  SlotPositions b{VecXd(nt), VecXd(nt)};
  for (int m = 0; m < nt; ++m) {
    b.thetas(m) = truth.nlos[m].theta;
    b.ranges(m) = truth.nlos[m].range;
  }
  e += matched_errors(a, b);
  return e;
}

std::vector<TrialRecord> run_trial(const ExperimentConfig& cfg, const DftCodebook<double>& codebook,
                                   const TrialScene& scene, double snr_db, std::uint64_t seed, int trial,
                                   const CoarseEstimate& coarse, const ErrorStats& stats,
                                   std::vector<TrialFailure>& failures) {
  const int N = scene.array.n_antennas;
  const Detection det = threshold_paths(coarse.logits, cfg.threshold);
  const SearchRegion region = build_search_region(coarse, det, stats, scene.array, cfg.k_sigma);
  const ParameterVectord eta_coarse = coarse_parameters(coarse, region, stats);
  const double rate_bound = perfect_rate(scene.h, scene.pilot_power, scene.noise_power);
  const int n_true = scene.truth.path_count();

  std::vector<TrialRecord> out;
  for (const std::string& id : cfg.estimators) {
    const auto t0 = std::chrono::steady_clock::now();
    EstimatorOutput o;
    try {
      if (id == "perfect") {
        o.h = scene.h;
        o.eta = ParameterVectord::from_realization(scene.truth);
        o.n_paths = n_true;
      } else if (id == "coarse") {
        const auto f = make_model(cfg, codebook, scene, region).evaluate(eta_coarse);
        o.h = reconstruct_channel(scene.array, eta_coarse, f.gains, scene.pilot_power);
        o.eta = eta_coarse;
        o.n_paths = eta_coarse.n_paths();
        o.fitness = f.value;
        o.residual = f.residual;
        o.pilots = N;
      } else if (id == "proposed") {
        Rng rng = stream_rng(seed, Stream::kProposed);
        const auto r = pso_refine(make_model(cfg, codebook, scene, region), eta_coarse, cfg.pso, rng);
        o = from_swarm(r, scene, cfg.record_trajectories);
      } else if (id == "pso_full") {
        Rng rng = stream_rng(seed, Stream::kPsoFull);
        const auto r = pso_full_space(make_model(cfg, codebook, scene, region), region.n_paths(), cfg.pso, rng);
        o = from_swarm(r, scene, cfg.record_trajectories);
      } else if (id == "los") {
        Rng rng = stream_rng(seed, Stream::kLos);
        const auto measure = make_beam_measurement(scene.h, scene.pilot_power, scene.noise_power, rng);
        const auto est = los_two_phase(scene.pattern.values, codebook, cfg.los_range_grid, measure, scene.pilot_power);
        o.h = est.channel(scene.array);
        ParameterVectord eta(1);
        eta.theta(0) = est.theta;
        eta.range(0) = est.range;
        o.eta = eta;
        o.n_paths = 1;
        o.pilots = N + est.extra_pilots;
      } else if (id == "farfield") {
        const int k = cfg.farfield_single_beam ? 1 : region.n_paths();
        const auto est = far_field_estimate(scene.pattern.values, codebook, k, cfg.gs, scene.pilot_power);
        o.h = est.channel;
        o.n_paths = k;
        o.pilots = N;
      } else {
        throw ConfigError("unknown estimator '" + id + "'");
      }
      if (!o.h.allFinite()) throw NumericalError("non-finite channel estimate");
    } catch (const std::exception& e) {
      failures.push_back(TrialFailure{N, snr_db, trial, id, e.what()});
      continue;
    }
    const auto t1 = std::chrono::steady_clock::now();

    TrialRecord r;
    r.n_antennas = N;
    r.snr_db = snr_db;
    r.trial = trial;
    r.seed = seed;
    r.estimator = id;
    const auto nm = nmse(scene.h, o.h);
    r.nmse_db = linear_to_db(std::max(nm.aligned, kNmseFloor));
    r.nmse_unaligned_db = linear_to_db(std::max(nm.unaligned, kNmseFloor));
    r.rate = achievable_rate(scene.h, o.h, scene.pilot_power, scene.noise_power).value;
    r.perfect_rate = rate_bound;
    if (o.eta) {
      const MatchedErrors pe = position_errors(*o.eta, scene.truth);
      r.matched_pairs = pe.pairs;
      r.misses = pe.misses;
      r.false_alarms = pe.false_alarms;
      r.rmse_theta = pe.pairs > 0 ? std::sqrt(pe.sum_sq_theta / pe.pairs) : kNan;
      r.rmse_range = pe.pairs > 0 ? std::sqrt(pe.sum_sq_range / pe.pairs) : kNan;
    } else {
      r.rmse_theta = r.rmse_range = kNan;
    }
    r.n_true_paths = n_true;
    r.n_est_paths = o.n_paths;
    r.path_count_correct = o.n_paths == n_true;
    r.fitness = o.fitness;
    r.residual = o.residual;
    r.pilots = o.pilots;
    r.runtime_s = std::chrono::duration<double>(t1 - t0).count();
    r.fitness_trajectory = std::move(o.fitness_trajectory);
    r.residual_trajectory = std::move(o.residual_trajectory);
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

struct Task {
  int n_antennas = 0;
  double snr_db = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;
  const CoarseEstimate* file_coarse = nullptr;
  const VecXd* file_pattern = nullptr;
};

struct TaskResult {
  std::vector<TrialRecord> records;
  std::vector<TrialFailure> failures;
};

}  // namespace

ExperimentResults run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::unique_ptr<tbb::global_control> limit;
  if (cfg.threads > 0)
    limit = std::make_unique<tbb::global_control>(tbb::global_control::max_allowed_parallelism, cfg.threads);

  const bool from_file = cfg.coarse.kind == CoarseSource::Kind::kFile;
  std::vector<CoarseEstimate> file_coarse;
  std::vector<DatasetRecord> dataset;
  ErrorStats stats = ErrorStats::uniform(cfg.scenario.l_max, cfg.coarse.synthetic.error);
  std::vector<Task> tasks;
  ExperimentResults results;

  if (from_file) {
    file_coarse = load_coarse_estimates(cfg.coarse.coarse_file);
    dataset = load_dataset(cfg.coarse.dataset_file);
    stats = load_error_stats(cfg.coarse.error_stats_file);
    stats.validate();
    for (const auto& c : file_coarse) {
      if (c.trial < 0 || c.trial >= static_cast<std::int64_t>(dataset.size())) {
        std::ostringstream os;
        os << "coarse record refers to dataset row " << c.trial << " of " << dataset.size();
        results.failures.push_back(TrialFailure{0, kNan, static_cast<int>(c.trial), "", os.str()});
        continue;
      }
      const DatasetRecord& d = dataset[static_cast<std::size_t>(c.trial)];
      tasks.push_back(Task{static_cast<int>(d.pattern.size()), d.snr_db, static_cast<int>(c.trial), d.seed, &c,
                           &d.pattern});
    }
  } else {
    const std::vector<int> antennas = cfg.antenna_grid();
    const std::size_t S = cfg.snr_points.size();
    for (std::size_t a = 0; a < antennas.size(); ++a) {
      for (std::size_t s = 0; s < S; ++s) {
        for (int t = 0; t < cfg.n_trials; ++t) {
          const std::uint64_t point = a * S + s;
          tasks.push_back(Task{antennas[a], cfg.snr_points[s], t,
                               trial_seed(cfg.seed, point, static_cast<std::uint64_t>(t)), nullptr, nullptr});
        }
      }
    }
  }

  std::map<int, DftCodebook<double>> codebooks;
  for (const auto& t : tasks) {
    if (codebooks.count(t.n_antennas)) continue;
    ArrayGeometry<double> a = cfg.scenario.array;
    a.n_antennas = t.n_antennas;
    codebooks.emplace(t.n_antennas, build_dft_codebook(a));
  }

  std::vector<TaskResult> slots(tasks.size());
  tbb::parallel_for(std::size_t(0), tasks.size(), [&](std::size_t i) {
    const Task& t = tasks[i];
    TaskResult& res = slots[i];
    try {
      const DftCodebook<double>& cb = codebooks.at(t.n_antennas);
      const TrialScene scene = make_scene(cfg, t.n_antennas, t.snr_db, t.seed, cb);
      CoarseEstimate coarse;
      if (t.file_coarse != nullptr) {
        const VecXd& stored = *t.file_pattern;
        if (stored.size() != scene.pattern.values.size() ||
            (stored - scene.pattern.values).norm() > 1e-9 * stored.norm())
          throw ConfigError("dataset pattern does not match the regenerated sweep; config differs from the dataset");
        coarse = *t.file_coarse;
      } else {
        Rng rng = stream_rng(t.seed, Stream::kCoarse);
        coarse = synthetic_coarse_estimate(scene.truth, cfg.coarse.synthetic, rng);
      }
      res.records = run_trial(cfg, cb, scene, t.snr_db, t.seed, t.trial, coarse, stats, res.failures);
    } catch (const std::exception& e) {
      res.records.clear();
      res.failures.push_back(TrialFailure{t.n_antennas, t.snr_db, t.trial, "", e.what()});
    }
  });

  for (auto& s : slots) {
    for (auto& r : s.records) results.records.push_back(std::move(r));
    for (auto& f : s.failures) results.failures.push_back(std::move(f));
  }
  return results;
}

std::vector<CalibrationPair> calibration_pairs(const ExperimentConfig& cfg, int snr_index) {
  cfg.validate();
  std::vector<CalibrationPair> pairs;
  if (cfg.coarse.kind == CoarseSource::Kind::kFile) {
    const auto coarse = load_coarse_estimates(cfg.coarse.coarse_file);
    const auto dataset = load_dataset(cfg.coarse.dataset_file);
    for (const auto& c : coarse) {
      if (c.trial < 0 || c.trial >= static_cast<std::int64_t>(dataset.size()))
        throw SchemaError("coarse record refers to a missing dataset row", c.trial);
      const DatasetRecord& d = dataset[static_cast<std::size_t>(c.trial)];
      if (snr_index >= 0 && d.snr_db != cfg.snr_points.at(snr_index)) continue;
      ScenarioConfig<double> sc = cfg.scenario;
      sc.array.n_antennas = static_cast<int>(d.pattern.size());
      Rng rng = stream_rng(d.seed, Stream::kScenario);
      pairs.emplace_back(c, sample_scenario(sc, rng));
    }
    return pairs;
  }
  const std::size_t S = cfg.snr_points.size();
  for (std::size_t s = 0; s < S; ++s) {
    if (snr_index >= 0 && static_cast<int>(s) != snr_index) continue;
    for (int t = 0; t < cfg.n_trials; ++t) {
      const std::uint64_t seed = trial_seed(cfg.seed, s, static_cast<std::uint64_t>(t));
      Rng scen = stream_rng(seed, Stream::kScenario);
      const auto truth = sample_scenario(cfg.scenario, scen);
      Rng rng = stream_rng(seed, Stream::kCoarse);
      pairs.emplace_back(synthetic_coarse_estimate(truth, cfg.coarse.synthetic, rng), truth);
    }
  }
  return pairs;
}

}  // namespace nfbt
