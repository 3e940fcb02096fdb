// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The nfbt Authors

#include "nfbt/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nfbt {

SlotPositions::SlotPositions(VecXd t, VecXd r) : thetas(std::move(t)), ranges(std::move(r)) {
  if (thetas.size() != ranges.size()) throw ConfigError("angle/range count mismatch");
}

MatXd cost_matrix(const SlotPositions& est, const SlotPositions& truth,
                  const std::optional<Standardizer>& standardizer) {
  if (est.thetas.size() != est.ranges.size() || truth.thetas.size() != truth.ranges.size())
    throw ConfigError("angle/range count mismatch");
  if (est.size() != truth.size()) throw ConfigError("estimate and truth slot counts differ");
  const Standardizer s = standardizer.value_or(Standardizer{});
  const int n = est.size();
  MatXd C(n, n);
  for (int l = 0; l < n; ++l) {
    for (int m = 0; m < n; ++m) {
      const double dt = s.theta(est.thetas(l)) - s.theta(truth.thetas(m));
      const double dr = s.range(est.ranges(l)) - s.range(truth.ranges(m));
      C(l, m) = dt * dt + dr * dr;
    }
  }
  return C;
}

Assignment hungarian(const MatXd& cost) {
  if (cost.rows() != cost.cols()) throw ConfigError("cost matrix must be square");
  if (!cost.allFinite()) throw ConfigError("cost matrix has non-finite entries");
  const int n = static_cast<int>(cost.rows());
  Assignment out;
  if (n == 0) return out;

  // Shortest augmenting paths with row/column potentials, 1-based with a
  // virtual column 0.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  out.mapping.assign(n, -1);
  for (int j = 1; j <= n; ++j) out.mapping[p[j] - 1] = j - 1;
  // Summed in row order rather than read from the potentials.
  for (int i = 0; i < n; ++i) out.total_cost += cost(i, out.mapping[i]);
  return out;
}

bool is_permutation(const std::vector<int>& mapping) {
  std::vector<char> seen(mapping.size(), 0);
  for (int m : mapping) {
    if (m < 0 || m >= static_cast<int>(mapping.size()) || seen[m]) return false;
    seen[m] = 1;
  }
  return true;
}

double los_loss(double est_theta, double est_range, double true_theta, double true_range) {
  return std::hypot(est_theta - true_theta, est_range - true_range);
}

double reg_loss(const SlotPositions& est, const SlotPositions& truth, const std::vector<int>& perm) {
  if (est.size() != truth.size() || static_cast<int>(perm.size()) != est.size())
    throw ConfigError("slot count mismatch");
  if (!is_permutation(perm)) throw ConfigError("mapping is not a permutation");
  double total = 0.0;
  for (int l = 0; l < est.size(); ++l)
    total += std::hypot(est.thetas(l) - truth.thetas(perm[l]), est.ranges(l) - truth.ranges(perm[l]));
  return total;
}

namespace {

// -ln(sigmoid(x)) = log(1 + exp(-x)), evaluated without overflow.
double neg_log_sigmoid(double x) {
  return x >= 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

}  // namespace

double cls_loss(const VecXd& logits, const VecXi& indicators, const std::vector<int>& perm) {
  if (logits.size() != indicators.size() || static_cast<Eigen::Index>(perm.size()) != logits.size())
    throw ConfigError("slot count mismatch");
  if (!is_permutation(perm)) throw ConfigError("mapping is not a permutation");
  const double cap = -std::log(1e-12);
  double total = 0.0;
  for (Eigen::Index l = 0; l < logits.size(); ++l) {
    const int c = indicators(perm[l]);
    if (c != 0 && c != 1) throw ConfigError("existence indicators must be 0 or 1");
    // 1 - sigmoid(q) = sigmoid(-q)
    const double term = c == 1 ? neg_log_sigmoid(logits(l)) : neg_log_sigmoid(-logits(l));
    total += std::min(term, cap);
  }
  return total;
}

LossBreakdown total_loss(double est_los_theta, double est_los_range, const SlotPositions& est_nlos,
                         double true_los_theta, double true_los_range, const SlotPositions& true_nlos,
                         const VecXd& logits, const VecXi& indicators, const LossWeights& weights,
                         const std::optional<Standardizer>& standardizer) {
  if (weights.los < 0.0 || weights.reg < 0.0 || weights.cls < 0.0)
    throw ConfigError("loss weights must be non-negative");
  LossBreakdown out;
  out.perm = hungarian(cost_matrix(est_nlos, true_nlos, standardizer)).mapping;

  const Standardizer s = standardizer.value_or(Standardizer{});
  out.los = los_loss(s.theta(est_los_theta), s.range(est_los_range), s.theta(true_los_theta),
                     s.range(true_los_range));
  auto scaled = [&s](const SlotPositions& x) {
    SlotPositions y = x;
    for (int l = 0; l < y.size(); ++l) {
      y.thetas(l) = s.theta(y.thetas(l));
      y.ranges(l) = s.range(y.ranges(l));
    }
    return y;
  };
  out.reg = reg_loss(scaled(est_nlos), scaled(true_nlos), out.perm);
  out.cls = cls_loss(logits, indicators, out.perm);
  out.total = weights.los * out.los + weights.reg * out.reg + weights.cls * out.cls;
  return out;
}

PathMatching match_paths(const SlotPositions& est, const SlotPositions& truth,
                         const std::optional<Standardizer>& standardizer) {
  const int ne = est.size();
  const int nt = truth.size();
  const int n = std::max(ne, nt);
  PathMatching out;
  if (n == 0) return out;
  const Standardizer s = standardizer.value_or(Standardizer{});
  // Dummy rows/columns cost nothing, so real pairs are matched optimally.
  MatXd C = MatXd::Zero(n, n);
  for (int l = 0; l < ne; ++l) {
    for (int m = 0; m < nt; ++m) {
      const double dt = s.theta(est.thetas(l)) - s.theta(truth.thetas(m));
      const double dr = s.range(est.ranges(l)) - s.range(truth.ranges(m));
      C(l, m) = dt * dt + dr * dr;
    }
  }
  const Assignment a = hungarian(C);
  std::vector<char> truth_hit(nt, 0);
  for (int l = 0; l < n; ++l) {
    const int m = a.mapping[l];
    if (l < ne && m < nt) {
      out.pairs.emplace_back(l, m);
      truth_hit[m] = 1;
    } else if (l < ne) {
      out.false_alarms.push_back(l);
    }
  }
  for (int m = 0; m < nt; ++m)
    if (!truth_hit[m]) out.missed.push_back(m);
  return out;
}

}  // namespace nfbt
