// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The nfbt Authors

#include <fstream>

#include <json.hpp>

#include "nfbt/harness.hpp"

namespace nfbt {

using nlohmann::json;

TrialScene make_scene(const ExperimentConfig& cfg, int n_antennas, double snr_db, std::uint64_t seed,
                      const DftCodebook<double>& codebook) {
  ScenarioConfig<double> sc = cfg.scenario;
  sc.array.n_antennas = n_antennas;
  if (codebook.size() != n_antennas) throw ConfigError("codebook size differs from the antenna count");
  TrialScene s;
  s.array = sc.array;
  Rng scen = stream_rng(seed, Stream::kScenario);
  s.truth = sample_scenario(sc, scen);
  s.h = assemble_channel(s.array, s.truth);
  s.pilot_power = cfg.pilot_power();
  s.noise_power = noise_power_for_snr(s.h, s.pilot_power, snr_db);
  Rng noise = stream_rng(seed, Stream::kSweep);
  s.pattern = sweep(s.h, codebook, s.pilot_power, s.noise_power, noise);
  return s;
}

DatasetRecord to_record(const TrialScene& scene, int l_max, double snr_db, std::uint64_t seed) {
  DatasetRecord r;
  r.pattern = scene.pattern.values;
  r.los_theta = scene.truth.los.theta;
  r.los_range = scene.truth.los.range;
  r.thetas = VecXd::Zero(l_max);
  r.ranges = VecXd::Zero(l_max);
  r.present = VecXi::Zero(l_max);
  for (std::size_t i = 0; i < scene.truth.nlos.size(); ++i) {
    r.thetas(i) = scene.truth.nlos[i].theta;
    r.ranges(i) = scene.truth.nlos[i].range;
    r.present(i) = 1;
  }
  r.snr_db = snr_db;
  r.seed = seed;
  return r;
}

void write_record(std::ostream& out, const DatasetRecord& r) {
  json j;
  j["pattern"] = std::vector<double>(r.pattern.data(), r.pattern.data() + r.pattern.size());
  j["los"] = {{"theta", r.los_theta}, {"range", r.los_range}};
  json paths = json::array();
  for (Eigen::Index i = 0; i < r.thetas.size(); ++i) paths.push_back({{"theta", r.thetas(i)}, {"range", r.ranges(i)}});
  j["paths"] = std::move(paths);
  j["c"] = std::vector<int>(r.present.data(), r.present.data() + r.present.size());
  j["snr_db"] = r.snr_db;
  j["seed"] = r.seed;
  out << j.dump() << '\n';
}

void generate_dataset(const ExperimentConfig& cfg, std::int64_t n_samples, std::ostream& out) {
  cfg.validate();
  if (n_samples < 0) throw ConfigError("sample count must be non-negative");
  const int N = cfg.scenario.array.n_antennas;
  const DftCodebook<double> cb = build_dft_codebook(cfg.scenario.array);
  const auto S = static_cast<std::int64_t>(cfg.snr_points.size());
  out << "# nfbt dataset: n_antennas=" << N << " l_max=" << cfg.scenario.l_max << " pilot_power_dbm="
      << cfg.pilot_power_dbm << " seed=" << cfg.seed << '\n';
  for (std::int64_t k = 0; k < n_samples; ++k) {
    const double snr = cfg.snr_points[k % S];
    const std::uint64_t seed = trial_seed(cfg.seed, static_cast<std::uint64_t>(k % S), static_cast<std::uint64_t>(k / S));
    const TrialScene scene = make_scene(cfg, N, snr, seed, cb);
    write_record(out, to_record(scene, cfg.scenario.l_max, snr, seed));
  }
}

void generate_dataset(const ExperimentConfig& cfg, std::int64_t n_samples, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  generate_dataset(cfg, n_samples, out);
}

namespace {

double finite_number(const json& j, const char* what, std::int64_t row) {
  if (!j.is_number()) throw SchemaError(std::string(what) + " is not a number", row);
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw SchemaError(std::string(what) + " is not finite", row);
  return v;
}

const json& field(const json& j, const char* key, std::int64_t row) {
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(std::string("missing field '") + key + "'", row);
  return *it;
}

}  // namespace

std::vector<DatasetRecord> read_dataset(std::istream& in) {
  std::vector<DatasetRecord> out;
  std::string line;
  std::int64_t row = 0;
  Eigen::Index n_pattern = -1, n_slots = -1;
  while (std::getline(in, line)) {
    ++row;
    const auto pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos || line[pos] == '#') continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw SchemaError(std::string("malformed JSON: ") + e.what(), row);
    }
    if (!j.is_object()) throw SchemaError("record is not an object", row);
    DatasetRecord r;
    const json& pat = field(j, "pattern", row);
    if (!pat.is_array() || pat.empty()) throw SchemaError("'pattern' must be a non-empty array", row);
    r.pattern.resize(static_cast<Eigen::Index>(pat.size()));
    for (std::size_t n = 0; n < pat.size(); ++n) {
      r.pattern(n) = finite_number(pat[n], "pattern entry", row);
      if (r.pattern(n) < 0.0) throw SchemaError("negative pattern entry", row);
    }
    const json& los = field(j, "los", row);
    r.los_theta = finite_number(field(los, "theta", row), "los.theta", row);
    r.los_range = finite_number(field(los, "range", row), "los.range", row);
    const json& paths = field(j, "paths", row);
    const json& c = field(j, "c", row);
    if (!paths.is_array() || !c.is_array() || paths.size() != c.size())
      throw SchemaError("'paths' and 'c' must be arrays of equal length", row);
    const auto L = static_cast<Eigen::Index>(paths.size());
    if ((n_pattern >= 0 && r.pattern.size() != n_pattern) || (n_slots >= 0 && L != n_slots))
      throw SchemaError("record arity differs from earlier records", row);
    n_pattern = r.pattern.size();
    n_slots = L;
    r.thetas.resize(L);
    r.ranges.resize(L);
    r.present.resize(L);
    for (Eigen::Index i = 0; i < L; ++i) {
      r.thetas(i) = finite_number(field(paths[i], "theta", row), "path theta", row);
      r.ranges(i) = finite_number(field(paths[i], "range", row), "path range", row);
      if (!c[i].is_number_integer() || (c[i].get<int>() != 0 && c[i].get<int>() != 1))
        throw SchemaError("'c' entries must be 0 or 1", row);
      r.present(i) = c[i].get<int>();
    }
    r.snr_db = finite_number(field(j, "snr_db", row), "snr_db", row);
    const json& seed = field(j, "seed", row);
    if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0))
      throw SchemaError("'seed' must be a non-negative integer", row);
    r.seed = seed.get<std::uint64_t>();
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<DatasetRecord> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_dataset(in);
}

}  // namespace nfbt
