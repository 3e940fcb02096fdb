// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The nfbt Authors

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "nfbt/assignment.hpp"
#include "nfbt/types.hpp"

namespace nfbt {

template <typename Scalar>
struct Nmse {
  Scalar aligned = Scalar(0);    // min over a global phase
  Scalar unaligned = Scalar(0);
};

/// ||h - e^{j phi} h_est||^2 / ||h||^2 with phi the phase of <h_est, h>.
template <typename Scalar>
Nmse<Scalar> nmse(const CVecX<Scalar>& h_true, const CVecX<Scalar>& h_est) {
  if (h_true.size() != h_est.size()) throw ConfigError("channel lengths differ");
  const Scalar e = h_true.squaredNorm();
  if (!(e > Scalar(0))) throw DomainError("NMSE needs a non-zero true channel");
  const Complex<Scalar> inner = h_est.dot(h_true);  // h_est^H h_true
  const Scalar mag = std::abs(inner);
  const Complex<Scalar> rot = mag > Scalar(0) ? inner / mag : Complex<Scalar>(1, 0);
  Nmse<Scalar> out;
  out.aligned = (h_true - rot * h_est).squaredNorm() / e;
  out.unaligned = (h_true - h_est).squaredNorm() / e;
  return out;
}

template <typename Scalar>
struct Rate {
  Scalar value = Scalar(0);  // bps/Hz
  bool zero_estimate = false;
};

/// log2(1 + P_t |h^H w|^2 / sigma^2) with w = h_est / ||h_est||.
template <typename Scalar>
Rate<Scalar> achievable_rate(const CVecX<Scalar>& h_true, const CVecX<Scalar>& h_est, Scalar pilot_power,
                             Scalar noise_power) {
  if (h_true.size() != h_est.size()) throw ConfigError("channel lengths differ");
  if (!(noise_power > Scalar(0))) throw ConfigError("rate needs a positive noise power");
  Rate<Scalar> r;
  const Scalar n = h_est.norm();
  if (!(n > Scalar(0))) {
    r.zero_estimate = true;
    return r;
  }
  const Scalar gain = std::norm(h_est.dot(h_true)) / (n * n);
  r.value = std::log2(Scalar(1) + pilot_power * gain / noise_power);
  return r;
}

template <typename Scalar>
Scalar perfect_rate(const CVecX<Scalar>& h, Scalar pilot_power, Scalar noise_power) {
  return std::log2(Scalar(1) + pilot_power * h.squaredNorm() / noise_power);
}

/// Squared position errors of matched pairs in one trial; misses and false
/// alarms are tallied, not scored.
struct MatchedErrors {
  double sum_sq_theta = 0.0;
  double sum_sq_range = 0.0;
  int pairs = 0;
  int misses = 0;
  int false_alarms = 0;

  MatchedErrors& operator+=(const MatchedErrors& o);
};

/// Matches estimated to true paths (min squared distance) and accumulates
/// the per-pair errors.
MatchedErrors matched_errors(const SlotPositions& est, const SlotPositions& truth);

struct Rmse {
  double theta = 0.0;
  double range = 0.0;
  int pairs = 0;
  int misses = 0;
  int false_alarms = 0;
};

Rmse rmse_from(const MatchedErrors& acc);

/// sqrt(mean over all matched pairs of all trials of the squared error).
Rmse rmse_matched(const std::vector<SlotPositions>& estimates, const std::vector<SlotPositions>& truths);

double path_count_accuracy(const std::vector<bool>& correct);

}  // namespace nfbt
