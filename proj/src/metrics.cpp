// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The nfbt Authors

#include "nfbt/metrics.hpp"

#include <cmath>

namespace nfbt {

MatchedErrors& MatchedErrors::operator+=(const MatchedErrors& o) {
  sum_sq_theta += o.sum_sq_theta;
  sum_sq_range += o.sum_sq_range;
  pairs += o.pairs;
  misses += o.misses;
  false_alarms += o.false_alarms;
  return *this;
}

MatchedErrors matched_errors(const SlotPositions& est, const SlotPositions& truth) {
  const PathMatching m = match_paths(est, truth);
  MatchedErrors e;
  for (const auto& [i, j] : m.pairs) {
    const double dt = est.thetas(i) - truth.thetas(j);
    const double dr = est.ranges(i) - truth.ranges(j);
    e.sum_sq_theta += dt * dt;
    e.sum_sq_range += dr * dr;
    ++e.pairs;
  }
  e.misses = static_cast<int>(m.missed.size());
  e.false_alarms = static_cast<int>(m.false_alarms.size());
  return e;
}

Rmse rmse_from(const MatchedErrors& acc) {
  if (acc.pairs == 0) throw DomainError("no matched path pairs");
  Rmse r;
  r.theta = std::sqrt(acc.sum_sq_theta / acc.pairs);
  r.range = std::sqrt(acc.sum_sq_range / acc.pairs);
  r.pairs = acc.pairs;
  r.misses = acc.misses;
  r.false_alarms = acc.false_alarms;
  return r;
}

Rmse rmse_matched(const std::vector<SlotPositions>& estimates, const std::vector<SlotPositions>& truths) {
  if (estimates.empty() || estimates.size() != truths.size())
    throw ConfigError("need equally many estimate and truth lists");
  MatchedErrors acc;
  for (std::size_t t = 0; t < estimates.size(); ++t) acc += matched_errors(estimates[t], truths[t]);
  return rmse_from(acc);
}

double path_count_accuracy(const std::vector<bool>& correct) {
  if (correct.empty()) throw ConfigError("no records");
  std::size_t hits = 0;
  for (bool c : correct) hits += c ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(correct.size());
}

}  // namespace nfbt
