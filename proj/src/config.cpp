// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The nfbt Authors

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "nfbt/harness.hpp"

namespace nfbt {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t trial_seed(std::uint64_t master, std::uint64_t point, std::uint64_t trial) {
  return splitmix64(splitmix64(splitmix64(master) ^ point) ^ trial);
}

Rng stream_rng(std::uint64_t trial_seed, Stream s) {
  return Rng(splitmix64(trial_seed + 0xD1B54A32D192ED03ULL * static_cast<std::uint64_t>(s)));
}

std::vector<int> ExperimentConfig::antenna_grid() const {
  return antenna_counts.empty() ? std::vector<int>{scenario.array.n_antennas} : antenna_counts;
}

void ExperimentConfig::validate() const {
  scenario.validate();
  if (n_trials < 1) throw ConfigError("n_trials must be at least 1");
  if (snr_points.empty()) throw ConfigError("snr_db needs at least one point");
  for (double s : snr_points)
    if (!std::isfinite(s)) throw ConfigError("SNR points must be finite");
  for (int n : antenna_counts)
    if (n < 1) throw ConfigError("antenna counts must be positive");
  if (estimators.empty()) throw ConfigError("no estimators selected");
  std::set<std::string> seen;
  for (const auto& e : estimators) {
    const auto& ids = known_estimators();
    if (std::find(ids.begin(), ids.end(), e) == ids.end()) throw ConfigError("unknown estimator '" + e + "'");
    if (!seen.insert(e).second) throw ConfigError("estimator '" + e + "' listed twice");
  }
  pso.validate();
  gs.validate();
  if (!(k_sigma > 0.0)) throw ConfigError("k_sigma must be positive");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must lie in (0, 1)");
  if (!std::isfinite(pilot_power_dbm) || !std::isfinite(noise_power_dbm)) throw ConfigError("powers must be finite");
  if (los_range_grid < 1) throw ConfigError("LoS range grid needs at least one point");
  if (threads < 0) throw ConfigError("threads must be non-negative");
  coarse.synthetic.validate();
  if (coarse.synthetic.l_max != scenario.l_max) throw ConfigError("coarse slot count differs from l_max");
  if (coarse.kind == CoarseSource::Kind::kFile) {
    for (const std::string* f : {&coarse.coarse_file, &coarse.error_stats_file, &coarse.dataset_file}) {
      if (f->empty()) throw ConfigError("file coarse source needs coarse_file, error_stats_file and dataset_file");
      if (!std::filesystem::exists(*f)) throw ConfigError("missing file: " + *f);
    }
  }
}

ExperimentConfig profile_defaults(const std::string& profile) {
  ExperimentConfig c;
  c.profile = profile;
  c.scenario.array = ArrayGeometry<double>::half_wavelength(256, 0.01);
  c.scenario.theta_low = -0.5;
  c.scenario.theta_high = 0.5;
  c.scenario.range_low = 8.0;
  c.scenario.range_high = 38.0;
  c.scenario.nlos_count_choices = {2, 3, 4};
  c.scenario.kappa_db = 0.0;
  c.scenario.kappa_db_high = 30.0;
  c.scenario.l_max = 5;
  c.coarse.synthetic.l_max = 5;
  if (profile == "paper") {
    c.snr_points = {-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0};
    c.n_trials = 500;
  } else if (profile == "desk") {
    c.scenario.array.n_antennas = 64;
    c.snr_points = {0.0, 10.0, 20.0};
    c.n_trials = 100;
  } else {
    throw ConfigError("unknown profile '" + profile + "' (expected paper or desk)");
  }
  return c;
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto a = item.find_first_not_of(" \t");
    const auto b = item.find_last_not_of(" \t");
    if (a != std::string::npos) out.push_back(item.substr(a, b - a + 1));
  }
  return out;
}

namespace {

void reject_unknown(const toml::table& t, const std::string& where, std::initializer_list<const char*> allowed) {
  for (const auto& [k, v] : t) {
    const std::string key(k.str());
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown key '" + where + key + "'");
  }
}

const toml::table* subtable(const toml::table& t, const char* key) {
  const toml::node* n = t.get(key);
  if (n == nullptr) return nullptr;
  if (!n->is_table()) throw ConfigError(std::string("'") + key + "' must be a table");
  return n->as_table();
}

template <typename T>
void read(const toml::table& t, const char* key, T& dst) {
  const toml::node* n = t.get(key);
  if (n == nullptr) return;
  if constexpr (std::is_same_v<T, bool>) {
    auto v = n->value<bool>();
    if (!v) throw ConfigError(std::string("'") + key + "' must be a boolean");
    dst = *v;
  } else if constexpr (std::is_same_v<T, std::string>) {
    auto v = n->value<std::string>();
    if (!v) throw ConfigError(std::string("'") + key + "' must be a string");
    dst = *v;
  } else if constexpr (std::is_integral_v<T>) {
    auto v = n->value<std::int64_t>();
    if (!v || !n->is_integer()) throw ConfigError(std::string("'") + key + "' must be an integer");
    dst = static_cast<T>(*v);
  } else {
    auto v = n->value<double>();
    if (!v) throw ConfigError(std::string("'") + key + "' must be a number");
    dst = static_cast<T>(*v);
  }
}

template <typename T>
void read_list(const toml::table& t, const char* key, std::vector<T>& dst) {
  const toml::node* n = t.get(key);
  if (n == nullptr) return;
  const toml::array* a = n->as_array();
  if (a == nullptr) throw ConfigError(std::string("'") + key + "' must be an array");
  std::vector<T> out;
  for (const auto& e : *a) {
    if constexpr (std::is_same_v<T, std::string>) {
      auto v = e.value<std::string>();
      if (!v) throw ConfigError(std::string("'") + key + "' must hold strings");
      out.push_back(*v);
    } else if constexpr (std::is_integral_v<T>) {
      auto v = e.value<std::int64_t>();
      if (!v || !e.is_integer()) throw ConfigError(std::string("'") + key + "' must hold integers");
      out.push_back(static_cast<T>(*v));
    } else {
      auto v = e.value<double>();
      if (!v) throw ConfigError(std::string("'") + key + "' must hold numbers");
      out.push_back(static_cast<T>(*v));
    }
  }
  dst = std::move(out);
}

}  // namespace

ExperimentConfig parse_config(const std::string& toml_text, const std::optional<std::string>& profile_override) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "TOML parse error at line " << e.source().begin.line << ": " << e.description();
    throw ConfigError(os.str());
  }
  reject_unknown(root, "",
                 {"profile", "seed", "n_trials", "snr_db", "antenna_counts", "estimators", "pilot_power_dbm",
                  "noise_power_dbm", "threads", "array", "scenario", "pso", "gs", "stage1", "benchmarks", "output"});

  std::string profile = "paper";
  read(root, "profile", profile);
  if (profile_override) profile = *profile_override;
  ExperimentConfig c = profile_defaults(profile);

  std::int64_t seed = static_cast<std::int64_t>(c.seed);
  read(root, "seed", seed);
  if (seed < 0) throw ConfigError("seed must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);
  read(root, "n_trials", c.n_trials);
  read_list(root, "snr_db", c.snr_points);
  read_list(root, "antenna_counts", c.antenna_counts);
  read_list(root, "estimators", c.estimators);
  read(root, "pilot_power_dbm", c.pilot_power_dbm);
  read(root, "noise_power_dbm", c.noise_power_dbm);
  read(root, "threads", c.threads);

  if (const auto* t = subtable(root, "array")) {
    reject_unknown(*t, "array.", {"n_antennas", "wavelength", "frequency_ghz", "spacing"});
    auto& a = c.scenario.array;
    read(*t, "n_antennas", a.n_antennas);
    if (t->contains("wavelength") && t->contains("frequency_ghz"))
      throw ConfigError("give either array.wavelength or array.frequency_ghz");
    read(*t, "wavelength", a.wavelength);
    if (t->contains("frequency_ghz")) {
      double f = 0.0;
      read(*t, "frequency_ghz", f);
      if (!(f > 0.0)) throw ConfigError("frequency must be positive");
      a.wavelength = 299792458.0 / (f * 1e9);
    }
    a.spacing = a.wavelength / 2.0;
    read(*t, "spacing", a.spacing);
  }
  if (const auto* t = subtable(root, "scenario")) {
    reject_unknown(*t, "scenario.",
                   {"theta_low", "theta_high", "range_low", "range_high", "nlos_counts", "kappa_db", "kappa_db_high",
                    "l_max"});
    auto& s = c.scenario;
    read(*t, "theta_low", s.theta_low);
    read(*t, "theta_high", s.theta_high);
    read(*t, "range_low", s.range_low);
    read(*t, "range_high", s.range_high);
    read_list(*t, "nlos_counts", s.nlos_count_choices);
    read(*t, "kappa_db", s.kappa_db);
    // A lone kappa_db fixes kappa; kappa_db_high turns it into a range.
    if (t->contains("kappa_db")) s.kappa_db_high = s.kappa_db;
    read(*t, "kappa_db_high", s.kappa_db_high);
    read(*t, "l_max", s.l_max);
    c.coarse.synthetic.l_max = s.l_max;
  }
  if (const auto* t = subtable(root, "pso")) {
    reject_unknown(*t, "pso.",
                   {"particles", "iterations", "inertia", "cognitive", "social", "penalty_weight", "velocity_clamp",
                    "scalar_tau", "early_stop"});
    read(*t, "particles", c.pso.n_particles);
    read(*t, "iterations", c.pso.n_iterations);
    read(*t, "inertia", c.pso.inertia);
    read(*t, "cognitive", c.pso.cognitive);
    read(*t, "social", c.pso.social);
    read(*t, "penalty_weight", c.pso.penalty_weight);
    read(*t, "velocity_clamp", c.pso.velocity_clamp);
    read(*t, "scalar_tau", c.pso.scalar_tau);
    read(*t, "early_stop", c.pso.early_stop);
  }
  if (const auto* t = subtable(root, "gs")) {
    reject_unknown(*t, "gs.", {"tol", "max_iter", "ridge", "init"});
    read(*t, "tol", c.gs.tol);
    read(*t, "max_iter", c.gs.max_iter);
    read(*t, "ridge", c.gs.ridge);
    std::string init;
    read(*t, "init", init);
    if (init == "auto") c.gs.init = GsInit::kAuto;
    else if (init == "spectral") c.gs.init = GsInit::kSpectral;
    else if (init == "lifted") c.gs.init = GsInit::kLifted;
    else if (!init.empty()) throw ConfigError("gs.init must be auto, spectral or lifted");
  }
  if (const auto* t = subtable(root, "stage1")) {
    reject_unknown(*t, "stage1.",
                   {"k_sigma", "threshold", "source", "coarse_file", "error_stats_file", "dataset_file", "synthetic"});
    read(*t, "k_sigma", c.k_sigma);
    read(*t, "threshold", c.threshold);
    std::string source;
    read(*t, "source", source);
    if (source == "file") c.coarse.kind = CoarseSource::Kind::kFile;
    else if (source == "synthetic") c.coarse.kind = CoarseSource::Kind::kSynthetic;
    else if (!source.empty()) throw ConfigError("stage1.source must be synthetic or file");
    read(*t, "coarse_file", c.coarse.coarse_file);
    read(*t, "error_stats_file", c.coarse.error_stats_file);
    read(*t, "dataset_file", c.coarse.dataset_file);
    if (const auto* s = subtable(*t, "synthetic")) {
      reject_unknown(*s, "stage1.synthetic.",
                     {"mu_theta", "sigma_theta", "mu_range", "sigma_range", "miss_prob", "logit"});
      auto& m = c.coarse.synthetic;
      read(*s, "mu_theta", m.error.mu_theta);
      read(*s, "sigma_theta", m.error.sigma_theta);
      read(*s, "mu_range", m.error.mu_range);
      read(*s, "sigma_range", m.error.sigma_range);
      read(*s, "miss_prob", m.miss_prob);
      read(*s, "logit", m.logit);
    }
  }
  if (const auto* t = subtable(root, "benchmarks")) {
    reject_unknown(*t, "benchmarks.", {"los_range_grid", "farfield_single_beam"});
    read(*t, "los_range_grid", c.los_range_grid);
    read(*t, "farfield_single_beam", c.farfield_single_beam);
  }
  if (const auto* t = subtable(root, "output")) {
    reject_unknown(*t, "output.", {"trajectories"});
    read(*t, "trajectories", c.record_trajectories);
  }
  return c;
}

ExperimentConfig load_config(const std::string& path, const std::optional<std::string>& profile_override) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), profile_override);
}

}  // namespace nfbt
