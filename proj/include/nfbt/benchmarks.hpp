// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The nfbt Authors

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "nfbt/channel.hpp"
#include "nfbt/codebook.hpp"
#include "nfbt/phase_retrieval.hpp"
#include "nfbt/types.hpp"

namespace nfbt {

/// MRT beamformer w = h / ||h||.
template <typename Scalar>
CVecX<Scalar> perfect_csi_beamformer(const CVecX<Scalar>& h) {
  const Scalar n = h.norm();
  if (!(n > Scalar(0))) throw DomainError("MRT needs a non-zero channel");
  return h / n;
}

/// Range samples uniform in 1/r over [Z_Fres, Z_Rayl], nearest first.
template <typename Scalar>
std::vector<Scalar> reciprocal_range_grid(const ArrayGeometry<Scalar>& array, int size) {
  if (size < 1) throw ConfigError("range grid needs at least one point");
  const Scalar zf = fresnel_distance(array), zr = rayleigh_distance(array);
  if (!(zf > Scalar(0))) throw ConfigError("near-field region is empty for this array");
  std::vector<Scalar> grid(size);
  if (size == 1) {
    grid[0] = zf;
    return grid;
  }
  const Scalar a = Scalar(1) / zf, b = Scalar(1) / zr;
  for (int k = 0; k < size; ++k) grid[k] = Scalar(1) / (a + (b - a) * Scalar(k) / Scalar(size - 1));
  return grid;
}

/// Phase-2 pilot: unit-norm beam in, received power |h^H w sqrt(P_t) + z|^2 out.
template <typename Scalar>
using BeamMeasurement = std::function<Scalar(const CVecX<Scalar>&)>;

template <typename Scalar>
BeamMeasurement<Scalar> make_beam_measurement(const CVecX<Scalar>& h, Scalar pilot_power, Scalar noise_power,
                                              Rng& rng) {
  return [h, pilot_power, noise_power, &rng](const CVecX<Scalar>& w) {
    Complex<Scalar> y = h.dot(w) * std::sqrt(pilot_power);  // h.dot(w) = h^H w
    if (noise_power > Scalar(0)) {
      std::normal_distribution<Scalar> normal(Scalar(0), std::sqrt(noise_power / Scalar(2)));
      const Scalar re = normal(rng);
      const Scalar im = normal(rng);
      y += Complex<Scalar>(re, im);
    }
    return std::norm(y);
  };
}

template <typename Scalar>
struct LosEstimate {
  Scalar theta = Scalar(0);
  Scalar range = Scalar(0);
  Scalar gain_magnitude = Scalar(0);  // |g| with h ~ |g| b(theta, r)
  int extra_pilots = 0;

  CVecX<Scalar> channel(const ArrayGeometry<Scalar>& array) const {
    return gain_magnitude * steering_vector(array, theta, range);
  }
};

/// Angle from the strongest DFT beam, then range by sweeping near-field beams
/// b(theta, r_k) / sqrt(N) over a reciprocal-range grid.
template <typename Scalar>
LosEstimate<Scalar> los_two_phase(const VecX<Scalar>& p, const DftCodebook<Scalar>& codebook, int range_grid_size,
                                  const BeamMeasurement<Scalar>& measure, Scalar pilot_power) {
  if (p.size() != codebook.size()) throw ConfigError("power pattern length does not match the codebook");
  const ArrayGeometry<Scalar>& array = codebook.array;
  Eigen::Index best = 0;
  p.maxCoeff(&best);
  LosEstimate<Scalar> est;
  est.theta = codebook.steered_angle(static_cast<int>(best));
  const std::vector<Scalar> grid = reciprocal_range_grid(array, range_grid_size);
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(array.n_antennas));
  Scalar best_power = -Scalar(1);
  for (Scalar r : grid) {
    const Scalar q = measure(steering_vector(array, est.theta, r) * scale);
    ++est.extra_pilots;
    if (q > best_power) {
      best_power = q;
      est.range = r;
    }
  }
  // For h = g b: |h^H b|^2 / N = |g|^2 N.
  est.gain_magnitude = std::sqrt(std::max(best_power, Scalar(0)) / (pilot_power * Scalar(array.n_antennas)));
  return est;
}

template <typename Scalar>
struct FarFieldEstimate {
  CVecX<Scalar> channel;
  std::vector<int> beams;  // selected codeword indices, strongest first
};

/// Picks the n_paths strongest beams, models the channel on their far-field
/// steering vectors sqrt(N) v_k, and fits the combining gains with GS.
template <typename Scalar>
FarFieldEstimate<Scalar> far_field_estimate(const VecX<Scalar>& p, const DftCodebook<Scalar>& codebook, int n_paths,
                                            const GsParams<Scalar>& gs, Scalar pilot_power) {
  const int N = codebook.size();
  if (p.size() != N) throw ConfigError("power pattern length does not match the codebook");
  if (n_paths < 1 || n_paths > N) throw ConfigError("beam count must lie in [1, N]");
  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&p](int a, int b) { return p(a) > p(b); });
  FarFieldEstimate<Scalar> out;
  out.beams.assign(order.begin(), order.begin() + n_paths);

  CMatX<Scalar> A(N, n_paths);
  for (int k = 0; k < n_paths; ++k) A.col(k) = std::sqrt(Scalar(N)) * codebook.columns.col(out.beams[k]);
  const CMatX<Scalar> phi = codebook.columns.adjoint() * A;
  const GainEstimate<Scalar> est = gs_estimate(phi, p, gs);
  out.channel = A * est.gains / std::sqrt(pilot_power);
  return out;
}

}  // namespace nfbt
