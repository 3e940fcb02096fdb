// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The nfbt Authors

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "nfbt/channel.hpp"
#include "nfbt/parameters.hpp"
#include "nfbt/types.hpp"

namespace nfbt {

/// Stage-1 output for one trial. Slot arrays have length l_max and cover the
/// NLoS slots only; the LoS path is always present.
struct CoarseEstimate {
  std::int64_t trial = 0;
  double los_theta = 0.0;
  double los_range = 0.0;
  VecXd thetas;
  VecXd ranges;
  VecXd logits;

  int l_max() const { return static_cast<int>(thetas.size()); }
  void validate() const;
};

struct SlotStats {
  double mu_theta = 0.0;
  double sigma_theta = 0.0;
  double mu_range = 0.0;
  double sigma_range = 0.0;
};

/// slots[0] is the LoS slot, slots[k] the k-th NLoS slot.
struct ErrorStats {
  std::vector<SlotStats> slots;

  int l_max() const { return static_cast<int>(slots.size()) - 1; }
  void validate() const;
  static ErrorStats uniform(int l_max, const SlotStats& s) { return ErrorStats{std::vector<SlotStats>(l_max + 1, s)}; }
};

struct Interval {
  double lb = 0.0;
  double ub = 0.0;
  bool degenerate = false;

  double width() const { return ub - lb; }
  bool contains(double x) const { return lb <= x && x <= ub; }
  double clamp(double x) const { return x < lb ? lb : (x > ub ? ub : x); }
};

/// Per-path boxes in ParameterVector order: LoS first, then detected slots.
struct SearchRegion {
  std::vector<int> slots;  // 0 = LoS, k = NLoS slot k
  std::vector<Interval> theta;
  std::vector<Interval> range;

  int n_paths() const { return static_cast<int>(theta.size()); }
  bool contains(const ParameterVectord& eta) const;
  /// Box spanning [-1, 1] x [Z_Fres, Z_Rayl] for every path.
  static SearchRegion full_space(const ArrayGeometry<double>& array, int n_paths);
};

struct Detection {
  std::vector<int> slots;  // 1-based NLoS slot numbers, ascending
  int count = 0;
};

inline constexpr double kDefaultThreshold = 0.5;

double sigmoid(double x);

Detection threshold_paths(const VecXd& logits, double threshold = kDefaultThreshold);

using CalibrationPair = std::pair<CoarseEstimate, ChannelRealization<double>>;

/// Per-slot sample mean and standard deviation of estimate - truth. Detected
/// NLoS slots are matched to the real truth paths first, in units standardized
/// by the spread of the true positions; slots with fewer than
/// two matched samples take the statistics pooled over all NLoS slots.
ErrorStats calibrate_error_stats(const std::vector<CalibrationPair>& pairs, double threshold = kDefaultThreshold);

/// Bias-corrected k-sigma boxes clamped to |theta| <= 1 and [Z_Fres, Z_Rayl].
SearchRegion build_search_region(const CoarseEstimate& coarse, const Detection& detection, const ErrorStats& stats,
                                 const ArrayGeometry<double>& array, double k_sigma = 3.0);

/// Bias-corrected coarse positions of the region's paths, clamped into the
/// region.
ParameterVectord coarse_parameters(const CoarseEstimate& coarse, const SearchRegion& region,
                                   const ErrorStats& stats);

struct CoarseErrorModel {
  SlotStats error{0.0, 0.02, 0.0, 1.0};
  double miss_prob = 0.0;
  int l_max = 5;
  double logit = 40.0;

  void validate() const;
};

/// Truth plus Gaussian position errors. NLoS path i fills slot i; each is
/// missed with probability miss_prob. Missed and padded slots hold zeros and
/// logit -model.logit.
CoarseEstimate synthetic_coarse_estimate(const ChannelRealization<double>& truth, const CoarseErrorModel& model,
                                         Rng& rng);

// Coarse-estimate NDJSON: one object per line,
//   {"trial": int, "los": {"theta", "range"}, "paths": [{"theta", "range", "logit"}, ...]}
// Blank lines and lines starting with '#' are skipped.
std::vector<CoarseEstimate> read_coarse_estimates(std::istream& in);
std::vector<CoarseEstimate> load_coarse_estimates(const std::string& path);
void write_coarse_estimate(std::ostream& out, const CoarseEstimate& c);
void save_coarse_estimates(const std::string& path, const std::vector<CoarseEstimate>& list);

// Error-stats JSON: {"slots": [{"mu_theta", "sigma_theta", "mu_range", "sigma_range"}, ...]}
ErrorStats read_error_stats(std::istream& in);
ErrorStats load_error_stats(const std::string& path);
void write_error_stats(std::ostream& out, const ErrorStats& stats);
void save_error_stats(const std::string& path, const ErrorStats& stats);

}  // namespace nfbt
