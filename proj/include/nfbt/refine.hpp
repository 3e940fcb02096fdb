// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The nfbt Authors

#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "nfbt/codebook.hpp"
#include "nfbt/parameters.hpp"
#include "nfbt/phase_retrieval.hpp"
#include "nfbt/stage1.hpp"
#include "nfbt/types.hpp"

namespace nfbt {

template <typename Scalar>
struct PsoParams {
  int n_particles = 50;
  int n_iterations = 100;
  Scalar inertia = Scalar(0.7);
  Scalar cognitive = Scalar(1.5);
  Scalar social = Scalar(1.5);
  Scalar penalty_weight = Scalar(100);
  Scalar velocity_clamp = Scalar(0.5);  // fraction of the interval width
  bool scalar_tau = false;              // one (tau1, tau2) pair per particle instead of per dimension
  bool early_stop = false;
  Scalar early_stop_tol = Scalar(1e-10);
  int early_stop_window = 20;

  void validate() const {
    if (n_particles < 1) throw ConfigError("PSO needs at least one particle");
    if (n_iterations < 1) throw ConfigError("PSO needs at least one iteration");
    if (!(inertia > Scalar(0) && inertia <= Scalar(1))) throw ConfigError("inertia must lie in (0, 1]");
    if (!(cognitive >= Scalar(0)) || !(social >= Scalar(0))) throw ConfigError("acceleration weights must be >= 0");
    if (!(penalty_weight > Scalar(0))) throw ConfigError("penalty weight must be positive");
    if (!(velocity_clamp > Scalar(0))) throw ConfigError("velocity clamp must be positive");
    if (early_stop_window < 1) throw ConfigError("early-stop window must be positive");
  }
};

/// ((x - ub)_+^2 + (lb - x)_+^2) / (ub - lb)^2. A zero-width interval costs
/// nothing at its point and +inf anywhere else.
template <typename Scalar>
Scalar interval_penalty(Scalar x, const Interval& iv) {
  const Scalar lb = static_cast<Scalar>(iv.lb), ub = static_cast<Scalar>(iv.ub);
  if (!(ub > lb)) return x == lb ? Scalar(0) : std::numeric_limits<Scalar>::infinity();
  const Scalar over = std::max(x - ub, Scalar(0));
  const Scalar under = std::max(lb - x, Scalar(0));
  const Scalar w = ub - lb;
  return (over * over + under * under) / (w * w);
}

template <typename Scalar>
Scalar boundary_penalty(const ParameterVector<Scalar>& eta, const SearchRegion& region) {
  if (eta.n_paths() != region.n_paths()) throw ConfigError("parameter vector and region path counts differ");
  Scalar j = Scalar(0);
  for (int l = 0; l < eta.n_paths(); ++l)
    j += interval_penalty(eta.range(l), region.range[l]) + interval_penalty(eta.theta(l), region.theta[l]);
  return j;
}

template <typename Scalar>
struct FitnessValue {
  Scalar value = Scalar(0);     // residual + zeta * penalty
  Scalar residual = Scalar(0);  // ||p - |Phi g|^2||^2
  Scalar penalty = Scalar(0);
  CVecX<Scalar> gains;          // in measurement units: |Phi gains|^2 ~ p
  bool physical = true;
};

/// Everything the fitness needs besides the candidate position.
template <typename Scalar>
struct FitnessModel {
  ArrayGeometry<Scalar> array;
  const DftCodebook<Scalar>* codebook = nullptr;
  VecX<Scalar> pattern;
  SearchRegion region;
  Scalar penalty_weight = Scalar(100);
  GsParams<Scalar> gs;

  /// Candidates outside |theta| <= 1, r > 0 have no steering matrix; their
  /// residual is that of the zero channel, ||p||^2.
  FitnessValue<Scalar> evaluate(const ParameterVector<Scalar>& eta) const {
    if (!eta.all_finite()) throw NumericalError("non-finite candidate position");
    FitnessValue<Scalar> f;
    f.penalty = boundary_penalty(eta, region);
    bool ok = eta.physically_valid();
    if (ok) {
      try {
        const CMatX<Scalar> phi = effective_steering_matrix(array, *codebook, eta);
        const GainEstimate<Scalar> est = gs_estimate(phi, pattern, gs);
        f.residual = est.residual;
        f.gains = est.gains;
      } catch (const DomainError&) {
        ok = false;
      }
    }
    if (!ok) {
      f.physical = false;
      f.residual = pattern.squaredNorm();
      f.gains = CVecX<Scalar>::Zero(eta.n_paths());
    }
    f.value = f.residual + penalty_weight * f.penalty;
    return f;
  }
};

/// h = B(eta) * gains / sqrt(P_t).
template <typename Scalar>
CVecX<Scalar> reconstruct_channel(const ArrayGeometry<Scalar>& array, const ParameterVector<Scalar>& eta,
                                  const CVecX<Scalar>& gains, Scalar pilot_power) {
  if (gains.size() != eta.n_paths()) throw ConfigError("gain count does not match the path count");
  return steering_matrix(array, eta) * gains / std::sqrt(pilot_power);
}

template <typename Scalar>
struct RefinedEstimate {
  ParameterVector<Scalar> eta;
  CVecX<Scalar> gains;
  Scalar fitness = Scalar(0);
  Scalar residual = Scalar(0);
  std::vector<Scalar> fitness_trajectory;   // gbest fitness after init and after each iteration
  std::vector<Scalar> residual_trajectory;  // residual part of the gbest fitness
  int iterations = 0;
  long evaluations = 0;
};

namespace detail {

template <typename Scalar>
RefinedEstimate<Scalar> run_swarm(const FitnessModel<Scalar>& model, const std::optional<ParameterVector<Scalar>>& seed,
                                  const PsoParams<Scalar>& params, Rng& rng) {
  params.validate();
  if (model.codebook == nullptr) throw ConfigError("fitness model has no codebook");
  const int K = model.region.n_paths();
  const int D = 2 * K;
  const int M = params.n_particles;
  if (seed && seed->n_paths() != K) throw ConfigError("coarse estimate and region path counts differ");

  VecX<Scalar> lb(D), ub(D);
  std::vector<char> frozen(D, 0);
  for (int l = 0; l < K; ++l) {
    lb(l) = static_cast<Scalar>(model.region.theta[l].lb);
    ub(l) = static_cast<Scalar>(model.region.theta[l].ub);
    lb(K + l) = static_cast<Scalar>(model.region.range[l].lb);
    ub(K + l) = static_cast<Scalar>(model.region.range[l].ub);
  }
  for (int d = 0; d < D; ++d) {
    if (lb(d) > ub(d)) throw ConfigError("search region has an inverted interval");
    frozen[d] = !(ub(d) > lb(d));
  }
  const VecX<Scalar> vmax = params.velocity_clamp * (ub - lb);

  MatX<Scalar> x(D, M), v = MatX<Scalar>::Zero(D, M);
  std::uniform_real_distribution<Scalar> unit(Scalar(0), Scalar(1));
  for (int i = 0; i < M; ++i) {
    for (int d = 0; d < D; ++d) {
      const Scalar u = unit(rng);
      x(d, i) = lb(d) + u * (ub(d) - lb(d));
    }
  }
  if (seed) x.col(0) = seed->flat();
  for (int d = 0; d < D; ++d)
    if (frozen[d]) x.row(d).setConstant(lb(d));

  RefinedEstimate<Scalar> out;
  MatX<Scalar> pbest = x;
  std::vector<FitnessValue<Scalar>> pbest_f(M);
  int g = 0;
  auto eval = [&](int i) {
    ++out.evaluations;
    FitnessValue<Scalar> f = model.evaluate(ParameterVector<Scalar>(VecX<Scalar>(x.col(i))));
    if (!std::isfinite(f.value)) throw NumericalError("non-finite fitness during PSO");
    return f;
  };
  for (int i = 0; i < M; ++i) {
    pbest_f[i] = eval(i);
    if (pbest_f[i].value < pbest_f[g].value) g = i;
  }
  out.fitness_trajectory.push_back(pbest_f[g].value);
  out.residual_trajectory.push_back(pbest_f[g].residual);

  for (int t = 1; t <= params.n_iterations; ++t) {
    for (int i = 0; i < M; ++i) {
      Scalar t1 = Scalar(0), t2 = Scalar(0);
      if (params.scalar_tau) {
        t1 = unit(rng);
        t2 = unit(rng);
      }
      for (int d = 0; d < D; ++d) {
        if (!params.scalar_tau) {
          t1 = unit(rng);
          t2 = unit(rng);
        }
        if (frozen[d]) continue;
        Scalar vel = params.inertia * v(d, i) + params.cognitive * t1 * (pbest(d, i) - x(d, i)) +
                     params.social * t2 * (pbest(d, g) - x(d, i));
        vel = std::clamp(vel, -vmax(d), vmax(d));
        v(d, i) = vel;
        x(d, i) += vel;
      }
    }
    for (int i = 0; i < M; ++i) {
      FitnessValue<Scalar> f = eval(i);
      if (f.value < pbest_f[i].value) {
        pbest_f[i] = std::move(f);
        pbest.col(i) = x.col(i);
      }
    }
    for (int i = 0; i < M; ++i)
      if (pbest_f[i].value < pbest_f[g].value) g = i;
    out.fitness_trajectory.push_back(pbest_f[g].value);
    out.residual_trajectory.push_back(pbest_f[g].residual);
    out.iterations = t;

    if (params.early_stop && t >= params.early_stop_window) {
      const Scalar old = out.fitness_trajectory[t - params.early_stop_window];
      if (old - pbest_f[g].value <= params.early_stop_tol * old) break;
    }
  }

  out.eta = ParameterVector<Scalar>(VecX<Scalar>(pbest.col(g)));
  out.gains = pbest_f[g].gains;
  out.fitness = pbest_f[g].value;
  out.residual = pbest_f[g].residual;
  return out;
}

}  // namespace detail

/// Confined-region PSO. Particle 0 starts at the coarse estimate, the others
/// uniformly in the region; zero-width dimensions stay at their point.
template <typename Scalar>
RefinedEstimate<Scalar> pso_refine(const FitnessModel<Scalar>& model, const ParameterVector<Scalar>& coarse,
                                   const PsoParams<Scalar>& params, Rng& rng) {
  return detail::run_swarm(model, std::optional<ParameterVector<Scalar>>(coarse), params, rng);
}

/// Same swarm over [-1, 1] x [Z_Fres, Z_Rayl] per path with every particle
/// drawn at random. model.region is replaced.
template <typename Scalar>
RefinedEstimate<Scalar> pso_full_space(FitnessModel<Scalar> model, int n_paths, const PsoParams<Scalar>& params,
                                       Rng& rng) {
  if (n_paths < 1) throw ConfigError("full-space search needs at least one path");
  model.region = SearchRegion::full_space(
      ArrayGeometry<double>{model.array.n_antennas, static_cast<double>(model.array.wavelength),
                            static_cast<double>(model.array.spacing)},
      n_paths);
  return detail::run_swarm<Scalar>(model, std::nullopt, params, rng);
}

}  // namespace nfbt
