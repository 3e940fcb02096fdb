// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The nfbt Authors

#pragma once

#include <vector>

#include "nfbt/channel.hpp"
#include "nfbt/types.hpp"

namespace nfbt {

/// Position parameters of K paths, flattened as [theta_0..theta_{K-1}, r_0..r_{K-1}].
/// Path 0 is the LoS slot.
template <typename Scalar>
class ParameterVector {
 public:
  ParameterVector() = default;
  explicit ParameterVector(int n_paths) : flat_(VecX<Scalar>::Zero(2 * n_paths)) {}
  explicit ParameterVector(VecX<Scalar> flat) : flat_(std::move(flat)) {
    if (flat_.size() % 2 != 0) throw ConfigError("parameter vector needs an even dimension");
  }
  ParameterVector(const VecX<Scalar>& thetas, const VecX<Scalar>& ranges) : flat_(2 * thetas.size()) {
    if (thetas.size() != ranges.size()) throw ConfigError("angle/range count mismatch");
    flat_ << thetas, ranges;
  }

  static ParameterVector from_realization(const ChannelRealization<Scalar>& ch) {
    ParameterVector eta(ch.path_count());
    for (int l = 0; l < ch.path_count(); ++l) {
      eta.theta(l) = ch.path(l).theta;
      eta.range(l) = ch.path(l).range;
    }
    return eta;
  }

  int n_paths() const { return static_cast<int>(flat_.size() / 2); }
  int dimension() const { return static_cast<int>(flat_.size()); }

  Scalar& theta(int l) { return flat_(l); }
  Scalar theta(int l) const { return flat_(l); }
  Scalar& range(int l) { return flat_(n_paths() + l); }
  Scalar range(int l) const { return flat_(n_paths() + l); }

  auto thetas() const { return flat_.head(n_paths()); }
  auto ranges() const { return flat_.tail(n_paths()); }

  VecX<Scalar>& flat() { return flat_; }
  const VecX<Scalar>& flat() const { return flat_; }

  bool all_finite() const { return flat_.allFinite(); }

  /// True when every (theta, r) pair lies in the physical domain |theta| <= 1, r > 0.
  bool physically_valid() const {
    for (int l = 0; l < n_paths(); ++l)
      if (!(std::abs(theta(l)) <= Scalar(1)) || !(range(l) > Scalar(0))) return false;
    return true;
  }

 private:
  VecX<Scalar> flat_;
};

using ParameterVectord = ParameterVector<double>;

}  // namespace nfbt
