// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The nfbt Authors

#pragma once

#include <cmath>
#include <random>

#include "nfbt/channel.hpp"
#include "nfbt/parameters.hpp"
#include "nfbt/types.hpp"

namespace nfbt {

/// Orthonormal DFT codebook. Column n (0-based here) samples the spatial angle
/// phi_n = (2(n+1) - N - 1) / N.
///
/// With the steering-vector convention exp(-j k (r^(n) - r)), a far-field path
/// at theta correlates with the codeword whose grid angle is -theta; use
/// steered_angle() to read the angle a codeword points at.
template <typename Scalar>
struct DftCodebook {
  ArrayGeometry<Scalar> array;
  CMatX<Scalar> columns;

  int size() const { return static_cast<int>(columns.cols()); }

  Scalar grid_angle(int n) const {
    const int N = array.n_antennas;
    return Scalar(2 * (n + 1) - N - 1) / Scalar(N);
  }

  Scalar steered_angle(int n) const { return -grid_angle(n); }
};

template <typename Scalar>
DftCodebook<Scalar> build_dft_codebook(const ArrayGeometry<Scalar>& array) {
  array.validate();
  const int N = array.n_antennas;
  DftCodebook<Scalar> cb{array, CMatX<Scalar>(N, N)};
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(N));
  for (int n = 0; n < N; ++n) {
    const Scalar phi = cb.grid_angle(n);
    for (int m = 0; m < N; ++m) {
      // m * phi reduced mod 2 keeps the argument small for large N.
      const Scalar arg = std::fmod(Scalar(m) * phi, Scalar(2));
      cb.columns(m, n) = scale * std::polar(Scalar(1), -Scalar(kPi) * arg);
    }
  }
  return cb;
}

/// Received power pattern of one DFT sweep, linear watts.
template <typename Scalar>
struct PowerPattern {
  VecX<Scalar> values;
  Scalar pilot_power = Scalar(0);
  Scalar noise_power = Scalar(0);

  int size() const { return static_cast<int>(values.size()); }
  Scalar total() const { return values.sum(); }
};

/// sigma^2 that realises the reference SNR P_t ||h||^2 / sigma^2 (in dB).
template <typename Scalar>
Scalar noise_power_for_snr(const CVecX<Scalar>& h, Scalar pilot_power, Scalar snr_db) {
  return pilot_power * h.squaredNorm() / std::pow(Scalar(10), snr_db / Scalar(10));
}

template <typename Scalar>
Scalar reference_snr_db(const CVecX<Scalar>& h, Scalar pilot_power, Scalar noise_power) {
  return Scalar(10) * std::log10(pilot_power * h.squaredNorm() / noise_power);
}

/// p_n = |h^H v_n s + z_n|^2 with s = sqrt(P_t) and z_n ~ CN(0, sigma^2), one
/// independent draw per codeword. No draws are made when sigma^2 = 0.
template <typename Scalar>
PowerPattern<Scalar> sweep(const CVecX<Scalar>& h, const DftCodebook<Scalar>& codebook, Scalar pilot_power,
                           Scalar noise_power, Rng& rng) {
  if (h.size() != codebook.columns.rows())
    throw ConfigError("channel length does not match the codebook");
  if (pilot_power < Scalar(0) || noise_power < Scalar(0)) throw ConfigError("powers must be non-negative");
  const CVecX<Scalar> coupling = codebook.columns.adjoint() * h;  // v_n^H h = conj(h^H v_n)
  const Scalar s = std::sqrt(pilot_power);
  PowerPattern<Scalar> p{VecX<Scalar>(coupling.size()), pilot_power, noise_power};
  std::normal_distribution<Scalar> normal(Scalar(0), std::sqrt(noise_power / Scalar(2)));
  for (Eigen::Index n = 0; n < coupling.size(); ++n) {
    Complex<Scalar> y = std::conj(coupling(n)) * s;
    if (noise_power > Scalar(0)) {
      const Scalar re = normal(rng);
      const Scalar im = normal(rng);
      y += Complex<Scalar>(re, im);
    }
    p.values(n) = std::norm(y);
  }
  return p;
}

/// B(eta) = [b(theta_0, r_0), ..., b(theta_K-1, r_K-1)].
template <typename Scalar>
CMatX<Scalar> steering_matrix(const ArrayGeometry<Scalar>& array, const ParameterVector<Scalar>& eta) {
  CMatX<Scalar> B(array.n_antennas, eta.n_paths());
  for (int l = 0; l < eta.n_paths(); ++l) B.col(l) = steering_vector(array, eta.theta(l), eta.range(l));
  return B;
}

/// Phi(eta) = V^H B(eta). With h = B(eta) c, the noiseless pattern is
/// P_t |Phi(eta) c|^2.
template <typename Scalar>
CMatX<Scalar> effective_steering_matrix(const ArrayGeometry<Scalar>& array, const DftCodebook<Scalar>& codebook,
                                        const ParameterVector<Scalar>& eta) {
  return codebook.columns.adjoint() * steering_matrix(array, eta);
}

}  // namespace nfbt
