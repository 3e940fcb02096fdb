// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The nfbt Authors

#pragma once

#include <optional>
#include <vector>

#include "nfbt/types.hpp"

namespace nfbt {

/// Affine map to zero-mean, unit-variance coordinates for (theta, r).
struct Standardizer {
  double theta_mean = 0.0;
  double theta_std = 1.0;
  double range_mean = 0.0;
  double range_std = 1.0;

  double theta(double t) const { return (t - theta_mean) / theta_std; }
  double range(double r) const { return (r - range_mean) / range_std; }
};

/// Angle/range pairs of a list of path slots.
struct SlotPositions {
  VecXd thetas;
  VecXd ranges;

  SlotPositions() = default;
  SlotPositions(VecXd t, VecXd r);
  int size() const { return static_cast<int>(thetas.size()); }
};

struct Assignment {
  std::vector<int> mapping;  // mapping[row] = column, 0-based
  double total_cost = 0.0;
};

/// C(l, m) = (est_theta_l - theta_m)^2 + (est_r_l - r_m)^2.
MatXd cost_matrix(const SlotPositions& est, const SlotPositions& truth,
                  const std::optional<Standardizer>& standardizer = std::nullopt);

/// Minimum-cost perfect matching of a square cost matrix. Rows are augmented
/// in index order, so ties resolve deterministically.
Assignment hungarian(const MatXd& cost);

bool is_permutation(const std::vector<int>& mapping);

double los_loss(double est_theta, double est_range, double true_theta, double true_range);

/// sum_l sqrt(C(l, perm[l])) on unsquared distances.
double reg_loss(const SlotPositions& est, const SlotPositions& truth, const std::vector<int>& perm);

/// Binary cross-entropy of slot logits against the existence bits of the
/// matched truth slots. Each term is capped at -ln(1e-12).
double cls_loss(const VecXd& logits, const VecXi& indicators, const std::vector<int>& perm);

struct LossWeights {
  double los = 1.0;
  double reg = 1.0;
  double cls = 1.0;
};

struct LossBreakdown {
  double total = 0.0;
  double los = 0.0;
  double reg = 0.0;
  double cls = 0.0;
  std::vector<int> perm;
};

/// LoS slot matched by index; NLoS slots matched by hungarian on the squared
/// cost matrix.
LossBreakdown total_loss(double est_los_theta, double est_los_range, const SlotPositions& est_nlos,
                         double true_los_theta, double true_los_range, const SlotPositions& true_nlos,
                         const VecXd& logits, const VecXi& indicators, const LossWeights& weights,
                         const std::optional<Standardizer>& standardizer = std::nullopt);

/// Pairs of (estimate index, truth index) from a min-cost matching of two
/// lists of possibly different length. Unpaired entries are misses (truth)
/// or false alarms (estimates).
struct PathMatching {
  std::vector<std::pair<int, int>> pairs;
  std::vector<int> missed;        // truth indices
  std::vector<int> false_alarms;  // estimate indices
};

PathMatching match_paths(const SlotPositions& est, const SlotPositions& truth,
                         const std::optional<Standardizer>& standardizer = std::nullopt);

}  // namespace nfbt
