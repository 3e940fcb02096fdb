// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The nfbt Authors

#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "nfbt/types.hpp"

namespace nfbt {

/// Uniform linear array along the y-axis. Antenna n (1-based) sits at
/// (0, delta_n * spacing) with delta_n = (2n - N - 1) / 2.
template <typename Scalar>
struct ArrayGeometry {
  int n_antennas = 1;
  Scalar wavelength = Scalar(0.01);
  Scalar spacing = Scalar(0.005);

  static ArrayGeometry half_wavelength(int n, Scalar wavelength) {
    return ArrayGeometry{n, wavelength, wavelength / Scalar(2)};
  }

  void validate() const {
    if (n_antennas < 1) throw ConfigError("array needs at least one antenna");
    if (!(wavelength > Scalar(0)) || !(spacing > Scalar(0)))
      throw ConfigError("wavelength and spacing must be positive");
  }

  Scalar aperture() const { return Scalar(n_antennas - 1) * spacing; }

  /// delta_n * d for the 1-based antenna index n.
  Scalar element_offset(int n) const {
    return (Scalar(2 * n - n_antennas - 1) / Scalar(2)) * spacing;
  }

  Scalar wavenumber() const { return Scalar(2) * Scalar(kPi) / wavelength; }
};

template <typename Scalar>
struct PathComponent {
  Scalar theta = Scalar(0);  // spatial angle, cos of the physical angle
  Scalar range = Scalar(1);  // meters
  Complex<Scalar> gain{};
};

/// Path 0 is the LoS component. Gains follow the h^H = sum g_l b^H(theta_l, r_l)
/// convention, so the channel column vector carries conj(g_l).
template <typename Scalar>
struct ChannelRealization {
  PathComponent<Scalar> los;
  std::vector<PathComponent<Scalar>> nlos;
  Scalar rician_kappa_db = Scalar(0);

  int path_count() const { return 1 + static_cast<int>(nlos.size()); }

  const PathComponent<Scalar>& path(int l) const { return l == 0 ? los : nlos[l - 1]; }
};

template <typename Scalar>
struct ScenarioConfig {
  ArrayGeometry<Scalar> array;
  Scalar theta_low = Scalar(-0.5);
  Scalar theta_high = Scalar(0.5);
  Scalar range_low = Scalar(8);
  Scalar range_high = Scalar(38);
  std::vector<int> nlos_count_choices{2, 3, 4};
  // kappa is drawn uniformly in [kappa_db, kappa_db_high] dB when the upper
  // end exceeds the lower one, otherwise held fixed at kappa_db.
  Scalar kappa_db = Scalar(0);
  Scalar kappa_db_high = Scalar(0);
  int l_max = 5;

  void validate() const {
    array.validate();
    if (!(theta_low < theta_high)) throw ConfigError("empty angle interval");
    if (theta_low < Scalar(-1) || theta_high > Scalar(1))
      throw ConfigError("angle interval must lie in [-1, 1]");
    if (!(range_low < range_high)) throw ConfigError("empty range interval");
    if (!(range_low > Scalar(0))) throw ConfigError("ranges must be positive");
    if (nlos_count_choices.empty()) throw ConfigError("no NLoS path counts to draw from");
    if (l_max < 0) throw ConfigError("l_max must be non-negative");
    for (int c : nlos_count_choices) {
      if (c < 0 || c > l_max) {
        std::ostringstream os;
        os << "NLoS path count " << c << " outside [0, l_max=" << l_max << "]";
        throw ConfigError(os.str());
      }
    }
  }
};

namespace detail {

inline void check_position(double theta, double range) {
  if (!(range > 0.0) || !std::isfinite(range)) throw DomainError("range must be positive and finite");
  if (!(std::abs(theta) <= 1.0)) throw DomainError("spatial angle must satisfy |theta| <= 1");
}

/// r^(n) - r in the cancellation-free form ((dn)^2 - 2 r theta dn) / (r^(n) + r).
template <typename Scalar>
Scalar range_excess(Scalar offset, Scalar theta, Scalar range, Scalar element_range) {
  return (offset * offset - Scalar(2) * range * theta * offset) / (element_range + range);
}

template <typename Scalar>
Scalar element_range_unchecked(Scalar offset, Scalar theta, Scalar range) {
  const Scalar sq = range * range + offset * offset - Scalar(2) * range * theta * offset;
  return std::sqrt(std::max(sq, Scalar(0)));
}

}  // namespace detail

/// Distance from antenna n (1-based) to a point source at (theta, range).
template <typename Scalar>
Scalar element_range(const ArrayGeometry<Scalar>& array, int n, Scalar theta, Scalar range) {
  detail::check_position(static_cast<double>(theta), static_cast<double>(range));
  if (n < 1 || n > array.n_antennas) throw DomainError("antenna index out of range");
  const Scalar r = detail::element_range_unchecked(array.element_offset(n), theta, range);
  if (!(r > Scalar(0))) throw DomainError("antenna coincides with the source point");
  return r;
}

/// Near-field steering vector b(theta, r): entry n is exp(-j k (r^(n) - r)).
template <typename Scalar>
CVecX<Scalar> steering_vector(const ArrayGeometry<Scalar>& array, Scalar theta, Scalar range) {
  detail::check_position(static_cast<double>(theta), static_cast<double>(range));
  const Scalar k = array.wavenumber();
  CVecX<Scalar> b(array.n_antennas);
  for (int n = 1; n <= array.n_antennas; ++n) {
    const Scalar off = array.element_offset(n);
    const Scalar rn = detail::element_range_unchecked(off, theta, range);
    if (!(rn > Scalar(0))) throw DomainError("antenna coincides with the source point");
    const Scalar phase = -k * detail::range_excess(off, theta, range, rn);
    b(n - 1) = std::polar(Scalar(1), phase);
  }
  return b;
}

/// Column-space coefficients of the channel: h = B(eta) * path_coefficients.
/// These are the conjugated path gains.
template <typename Scalar>
CVecX<Scalar> path_coefficients(const ChannelRealization<Scalar>& ch) {
  CVecX<Scalar> c(ch.path_count());
  for (int l = 0; l < ch.path_count(); ++l) c(l) = std::conj(ch.path(l).gain);
  return c;
}

/// h with h^H = sum_l g_l b^H(theta_l, r_l).
template <typename Scalar>
CVecX<Scalar> assemble_channel(const ArrayGeometry<Scalar>& array, const ChannelRealization<Scalar>& ch) {
  CVecX<Scalar> h = CVecX<Scalar>::Zero(array.n_antennas);
  for (int l = 0; l < ch.path_count(); ++l) {
    const auto& p = ch.path(l);
    h += std::conj(p.gain) * steering_vector(array, p.theta, p.range);
  }
  return h;
}

template <typename Scalar>
Scalar fresnel_distance(const ArrayGeometry<Scalar>& array) {
  const Scalar D = array.aperture();
  return Scalar(0.5) * std::sqrt(D * D * D / array.wavelength);
}

template <typename Scalar>
Scalar rayleigh_distance(const ArrayGeometry<Scalar>& array) {
  const Scalar D = array.aperture();
  return Scalar(2) * D * D / array.wavelength;
}

template <typename Scalar>
struct RicianGains {
  Complex<Scalar> los;
  std::vector<Complex<Scalar>> nlos;
};

/// Free-space LoS gain scaled by sqrt(kappa/(kappa+1)) and i.i.d. CN(0, s^2)
/// NLoS gains with s = lambda / (4 pi r0 sqrt(L (kappa + 1))).
template <typename Scalar>
RicianGains<Scalar> rician_gains(Scalar r0, Scalar kappa_db, int n_nlos, Scalar wavelength, Rng& rng) {
  if (!(r0 > Scalar(0))) throw DomainError("LoS range must be positive");
  if (n_nlos < 0) throw DomainError("negative NLoS path count");
  const Scalar kappa = std::pow(Scalar(10), kappa_db / Scalar(10));
  const Scalar free_space = wavelength / (Scalar(4) * Scalar(kPi) * r0);
  RicianGains<Scalar> out;
  out.los = std::sqrt(kappa / (kappa + Scalar(1))) * free_space *
            std::polar(Scalar(1), -Scalar(2) * Scalar(kPi) * r0 / wavelength);
  if (n_nlos == 0) return out;
  const Scalar sigma = free_space / std::sqrt(Scalar(n_nlos) * (kappa + Scalar(1)));
  std::normal_distribution<Scalar> normal(Scalar(0), sigma / std::sqrt(Scalar(2)));
  out.nlos.reserve(n_nlos);
  for (int l = 0; l < n_nlos; ++l) {
    const Scalar re = normal(rng);
    const Scalar im = normal(rng);
    out.nlos.emplace_back(re, im);
  }
  return out;
}

/// Draws one realization: path count, kappa, LoS position, NLoS positions,
/// then gains, in that order.
template <typename Scalar>
ChannelRealization<Scalar> sample_scenario(const ScenarioConfig<Scalar>& cfg, Rng& rng) {
  cfg.validate();
  std::uniform_int_distribution<std::size_t> pick(0, cfg.nlos_count_choices.size() - 1);
  const int n_nlos = cfg.nlos_count_choices[pick(rng)];
  Scalar kappa_db = cfg.kappa_db;
  if (cfg.kappa_db_high > cfg.kappa_db) {
    std::uniform_real_distribution<Scalar> kd(cfg.kappa_db, cfg.kappa_db_high);
    kappa_db = kd(rng);
  }
  std::uniform_real_distribution<Scalar> ang(cfg.theta_low, cfg.theta_high);
  std::uniform_real_distribution<Scalar> rng_range(cfg.range_low, cfg.range_high);

  ChannelRealization<Scalar> ch;
  ch.rician_kappa_db = kappa_db;
  ch.los.theta = ang(rng);
  ch.los.range = rng_range(rng);
  ch.nlos.resize(n_nlos);
  for (auto& p : ch.nlos) {
    p.theta = ang(rng);
    p.range = rng_range(rng);
  }
  auto gains = rician_gains(ch.los.range, kappa_db, n_nlos, cfg.array.wavelength, rng);
  ch.los.gain = gains.los;
  for (int l = 0; l < n_nlos; ++l) ch.nlos[l].gain = gains.nlos[l];
  return ch;
}

}  // namespace nfbt
