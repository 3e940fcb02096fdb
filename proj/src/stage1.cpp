// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The nfbt Authors

#include "nfbt/stage1.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "nfbt/assignment.hpp"

namespace nfbt {

using nlohmann::json;

void CoarseEstimate::validate() const {
  if (thetas.size() != ranges.size() || thetas.size() != logits.size())
    throw ConfigError("coarse estimate slot arrays differ in length");
  if (!std::isfinite(los_theta) || !std::isfinite(los_range) || !thetas.allFinite() || !ranges.allFinite() ||
      !logits.allFinite())
    throw ConfigError("coarse estimate has non-finite entries");
}

void ErrorStats::validate() const {
  if (slots.empty()) throw ConfigError("error statistics need at least the LoS slot");
  for (const auto& s : slots) {
    if (!std::isfinite(s.mu_theta) || !std::isfinite(s.mu_range) || !std::isfinite(s.sigma_theta) ||
        !std::isfinite(s.sigma_range))
      throw ConfigError("error statistics must be finite");
    if (s.sigma_theta < 0.0 || s.sigma_range < 0.0) throw ConfigError("standard deviations must be non-negative");
  }
}

bool SearchRegion::contains(const ParameterVectord& eta) const {
  if (eta.n_paths() != n_paths()) return false;
  for (int l = 0; l < n_paths(); ++l)
    if (!theta[l].contains(eta.theta(l)) || !range[l].contains(eta.range(l))) return false;
  return true;
}

SearchRegion SearchRegion::full_space(const ArrayGeometry<double>& array, int n_paths) {
  SearchRegion r;
  const Interval t{-1.0, 1.0, false};
  const double zf = fresnel_distance(array), zr = rayleigh_distance(array);
  const Interval rg{zf, zr, !(zr > zf)};
  for (int l = 0; l < n_paths; ++l) {
    r.slots.push_back(l == 0 ? 0 : l);
    r.theta.push_back(t);
    r.range.push_back(rg);
  }
  return r;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Detection threshold_paths(const VecXd& logits, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must lie in (0, 1)");
  Detection d;
  for (Eigen::Index l = 0; l < logits.size(); ++l)
    if (sigmoid(logits(l)) >= threshold) d.slots.push_back(static_cast<int>(l) + 1);
  d.count = static_cast<int>(d.slots.size());
  return d;
}

namespace {

struct Moments {
  std::vector<double> dt, dr;

  void add(double t, double r) {
    dt.push_back(t);
    dr.push_back(r);
  }
  std::size_t size() const { return dt.size(); }
};

void mean_std(const std::vector<double>& x, double& mu, double& sigma) {
  const double n = static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x) s += v;
  mu = s / n;
  double q = 0.0;
  for (double v : x) q += (v - mu) * (v - mu);
  sigma = std::sqrt(q / (n - 1.0));
}

SlotStats slot_stats(const Moments& m) {
  SlotStats s;
  mean_std(m.dt, s.mu_theta, s.sigma_theta);
  mean_std(m.dr, s.mu_range, s.sigma_range);
  return s;
}

/// Spread of the true NLoS positions, used to put angle and range on one
/// scale before matching.
Standardizer truth_standardizer(const std::vector<CalibrationPair>& pairs) {
  std::vector<double> t, r;
  for (const auto& [est, truth] : pairs) {
    for (const auto& p : truth.nlos) {
      t.push_back(p.theta);
      r.push_back(p.range);
    }
  }
  Standardizer z;
  if (t.size() < 2) return z;
  mean_std(t, z.theta_mean, z.theta_std);
  mean_std(r, z.range_mean, z.range_std);
  if (!(z.theta_std > 0.0)) z.theta_std = 1.0;
  if (!(z.range_std > 0.0)) z.range_std = 1.0;
  return z;
}

}  // namespace

ErrorStats calibrate_error_stats(const std::vector<CalibrationPair>& pairs, double threshold) {
  if (pairs.size() < 2) throw ConfigError("calibration needs at least two estimate/truth pairs");
  const int l_max = pairs.front().first.l_max();
  std::vector<Moments> per_slot(l_max + 1);
  Moments pooled;
  const Standardizer z = truth_standardizer(pairs);

  for (const auto& [est, truth] : pairs) {
    est.validate();
    if (est.l_max() != l_max) throw ConfigError("coarse estimates disagree on the slot count");
    per_slot[0].add(est.los_theta - truth.los.theta, est.los_range - truth.los.range);

    const Detection det = threshold_paths(est.logits, threshold);
    SlotPositions e{VecXd(det.count), VecXd(det.count)};
    for (int i = 0; i < det.count; ++i) {
      e.thetas(i) = est.thetas(det.slots[i] - 1);
      e.ranges(i) = est.ranges(det.slots[i] - 1);
    }
    const int nt = static_cast<int>(truth.nlos.size());
    SlotPositions t{VecXd(nt), VecXd(nt)};
    for (int m = 0; m < nt; ++m) {
      t.thetas(m) = truth.nlos[m].theta;
      t.ranges(m) = truth.nlos[m].range;
    }
    for (const auto& [ei, ti] : match_paths(e, t, z).pairs) {
      const double dt = e.thetas(ei) - t.thetas(ti);
      const double dr = e.ranges(ei) - t.ranges(ti);
      per_slot[det.slots[ei]].add(dt, dr);
      pooled.add(dt, dr);
    }
  }

  ErrorStats out;
  out.slots.resize(l_max + 1);
  out.slots[0] = slot_stats(per_slot[0]);
  const SlotStats fallback = pooled.size() >= 2 ? slot_stats(pooled) : out.slots[0];
  for (int k = 1; k <= l_max; ++k) out.slots[k] = per_slot[k].size() >= 2 ? slot_stats(per_slot[k]) : fallback;
  return out;
}

namespace {

Interval confine(double center, double half_width, double lo, double hi) {
  Interval iv{std::max(center - half_width, lo), std::min(center + half_width, hi), false};
  if (iv.lb > iv.ub) {
    // Whole box fell outside [lo, hi]: collapse onto the violated clamp.
    const double point = center + half_width < lo ? lo : hi;
    iv.lb = iv.ub = point;
  }
  iv.degenerate = !(iv.ub > iv.lb);
  return iv;
}

}  // namespace

SearchRegion build_search_region(const CoarseEstimate& coarse, const Detection& detection, const ErrorStats& stats,
                                 const ArrayGeometry<double>& array, double k_sigma) {
  if (!(k_sigma > 0.0)) throw ConfigError("k_sigma must be positive");
  stats.validate();
  coarse.validate();
  const double zf = fresnel_distance(array), zr = rayleigh_distance(array);
  SearchRegion region;
  auto add = [&](int slot, double theta, double range) {
    if (slot >= static_cast<int>(stats.slots.size())) throw ConfigError("no error statistics for a detected slot");
    const SlotStats& s = stats.slots[slot];
    region.slots.push_back(slot);
    region.theta.push_back(confine(theta - s.mu_theta, k_sigma * s.sigma_theta, -1.0, 1.0));
    region.range.push_back(confine(range - s.mu_range, k_sigma * s.sigma_range, zf, zr));
  };
  add(0, coarse.los_theta, coarse.los_range);
  for (int slot : detection.slots) {
    if (slot < 1 || slot > coarse.l_max()) throw ConfigError("detected slot out of range");
    add(slot, coarse.thetas(slot - 1), coarse.ranges(slot - 1));
  }
  return region;
}

ParameterVectord coarse_parameters(const CoarseEstimate& coarse, const SearchRegion& region,
                                   const ErrorStats& stats) {
  ParameterVectord eta(region.n_paths());
  for (int l = 0; l < region.n_paths(); ++l) {
    const int slot = region.slots[l];
    const SlotStats& s = stats.slots.at(slot);
    const double t = slot == 0 ? coarse.los_theta : coarse.thetas(slot - 1);
    const double r = slot == 0 ? coarse.los_range : coarse.ranges(slot - 1);
    eta.theta(l) = region.theta[l].clamp(t - s.mu_theta);
    eta.range(l) = region.range[l].clamp(r - s.mu_range);
  }
  return eta;
}

void CoarseErrorModel::validate() const {
  ErrorStats::uniform(0, error).validate();
  if (!(miss_prob >= 0.0 && miss_prob <= 1.0)) throw ConfigError("miss probability must lie in [0, 1]");
  if (l_max < 0) throw ConfigError("l_max must be non-negative");
  if (!(logit > 0.0)) throw ConfigError("saturation logit must be positive");
}

CoarseEstimate synthetic_coarse_estimate(const ChannelRealization<double>& truth, const CoarseErrorModel& model,
                                         Rng& rng) {
  model.validate();
  if (static_cast<int>(truth.nlos.size()) > model.l_max) throw ConfigError("more NLoS paths than slots");
  // normal_distribution needs sigma > 0; the zero-sigma result is discarded.
  const auto positive = [](double s) { return s > 0.0 ? s : 1.0; };
  std::normal_distribution<double> nt(model.error.mu_theta, positive(model.error.sigma_theta));
  std::normal_distribution<double> nr(model.error.mu_range, positive(model.error.sigma_range));
  std::bernoulli_distribution miss(model.miss_prob);
  // A zero sigma still consumes draws so the stream layout does not depend on
  // the error model.
  auto draw = [&rng](std::normal_distribution<double>& d, double mu, double sigma) {
    const double x = d(rng);
    return sigma > 0.0 ? x : mu;
  };

  CoarseEstimate c;
  c.thetas = VecXd::Zero(model.l_max);
  c.ranges = VecXd::Zero(model.l_max);
  c.logits = VecXd::Constant(model.l_max, -model.logit);
  c.los_theta = truth.los.theta + draw(nt, model.error.mu_theta, model.error.sigma_theta);
  c.los_range = truth.los.range + draw(nr, model.error.mu_range, model.error.sigma_range);
  for (std::size_t i = 0; i < truth.nlos.size(); ++i) {
    const bool missed = miss(rng);
    const double dt = draw(nt, model.error.mu_theta, model.error.sigma_theta);
    const double dr = draw(nr, model.error.mu_range, model.error.sigma_range);
    if (missed) continue;
    c.thetas(i) = truth.nlos[i].theta + dt;
    c.ranges(i) = truth.nlos[i].range + dr;
    c.logits(i) = model.logit;
  }
  return c;
}

namespace {

double number(const json& obj, const char* key, std::int64_t row) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(std::string("missing field '") + key + "'", row);
  if (!it->is_number()) throw SchemaError(std::string("field '") + key + "' is not a number", row);
  const double v = it->get<double>();
  if (!std::isfinite(v)) throw SchemaError(std::string("field '") + key + "' is not finite", row);
  return v;
}

const json& member(const json& obj, const char* key, std::int64_t row) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(std::string("missing field '") + key + "'", row);
  return *it;
}

bool skip_line(const std::string& line) {
  const auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string::npos || line[pos] == '#';
}

json parse_row(const std::string& line, std::int64_t row) {
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("malformed JSON: ") + e.what(), row);
  }
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

}  // namespace

std::vector<CoarseEstimate> read_coarse_estimates(std::istream& in) {
  std::vector<CoarseEstimate> out;
  std::string line;
  std::int64_t row = 0;
  int arity = -1;
  while (std::getline(in, line)) {
    ++row;
    if (skip_line(line)) continue;
    const json j = parse_row(line, row);
    if (!j.is_object()) throw SchemaError("record is not an object", row);
    const json& trial = member(j, "trial", row);
    if (!trial.is_number_integer()) throw SchemaError("field 'trial' is not an integer", row);
    const json& los = member(j, "los", row);
    if (!los.is_object()) throw SchemaError("field 'los' is not an object", row);
    const json& paths = member(j, "paths", row);
    if (!paths.is_array()) throw SchemaError("field 'paths' is not an array", row);
    const int n = static_cast<int>(paths.size());
    if (arity >= 0 && n != arity) {
      std::ostringstream os;
      os << "expected " << arity << " path slots, found " << n;
      throw SchemaError(os.str(), row);
    }
    arity = n;

    CoarseEstimate c;
    c.trial = trial.get<std::int64_t>();
    c.los_theta = number(los, "theta", row);
    c.los_range = number(los, "range", row);
    c.thetas.resize(n);
    c.ranges.resize(n);
    c.logits.resize(n);
    for (int i = 0; i < n; ++i) {
      const json& p = paths[i];
      if (!p.is_object()) throw SchemaError("path slot is not an object", row);
      c.thetas(i) = number(p, "theta", row);
      c.ranges(i) = number(p, "range", row);
      c.logits(i) = number(p, "logit", row);
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<CoarseEstimate> load_coarse_estimates(const std::string& path) {
  auto in = open_in(path);
  return read_coarse_estimates(in);
}

void write_coarse_estimate(std::ostream& out, const CoarseEstimate& c) {
  c.validate();
  json j;
  j["trial"] = c.trial;
  j["los"] = {{"theta", c.los_theta}, {"range", c.los_range}};
  json paths = json::array();
  for (int i = 0; i < c.l_max(); ++i)
    paths.push_back({{"theta", c.thetas(i)}, {"range", c.ranges(i)}, {"logit", c.logits(i)}});
  j["paths"] = std::move(paths);
  out << j.dump() << '\n';
}

void save_coarse_estimates(const std::string& path, const std::vector<CoarseEstimate>& list) {
  auto out = open_out(path);
  for (const auto& c : list) write_coarse_estimate(out, c);
}

ErrorStats read_error_stats(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("error statistics must be a JSON object");
  const json& slots = member(j, "slots", -1);
  if (!slots.is_array() || slots.empty()) throw SchemaError("field 'slots' must be a non-empty array");
  ErrorStats s;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const json& o = slots[i];
    const auto idx = static_cast<std::int64_t>(i + 1);
    if (!o.is_object()) throw SchemaError("slot entry is not an object", idx);
    SlotStats x{number(o, "mu_theta", idx), number(o, "sigma_theta", idx), number(o, "mu_range", idx),
                number(o, "sigma_range", idx)};
    if (x.sigma_theta < 0.0 || x.sigma_range < 0.0) throw SchemaError("negative standard deviation", idx);
    s.slots.push_back(x);
  }
  return s;
}

ErrorStats load_error_stats(const std::string& path) {
  auto in = open_in(path);
  return read_error_stats(in);
}

void write_error_stats(std::ostream& out, const ErrorStats& stats) {
  stats.validate();
  json slots = json::array();
  for (const auto& s : stats.slots)
    slots.push_back({{"mu_theta", s.mu_theta},
                     {"sigma_theta", s.sigma_theta},
                     {"mu_range", s.mu_range},
                     {"sigma_range", s.sigma_range}});
  out << json{{"slots", slots}}.dump(2) << '\n';
}

void save_error_stats(const std::string& path, const ErrorStats& stats) {
  auto out = open_out(path);
  write_error_stats(out, stats);
}

}  // namespace nfbt
