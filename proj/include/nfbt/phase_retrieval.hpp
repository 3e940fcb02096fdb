// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The nfbt Authors

#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include "nfbt/types.hpp"

namespace nfbt {

/// kAuto uses the lifted estimate when the measurements determine the K x K
/// gain outer product (N >= K^2) and the spectral estimate otherwise.
enum class GsInit { kAuto, kSpectral, kLifted };

template <typename Scalar>
struct GsParams {
  Scalar tol = Scalar(1e-8);  // relative objective change that ends the loop
  int max_iter = 200;
  Scalar ridge = Scalar(0);
  bool record_objective = false;
  GsInit init = GsInit::kAuto;
  int max_backtracks = 12;

  void validate() const {
    if (!(tol > Scalar(0))) throw ConfigError("GS tolerance must be positive");
    if (max_iter < 1) throw ConfigError("GS needs at least one iteration");
    if (!(ridge >= Scalar(0))) throw ConfigError("GS ridge must be non-negative");
    if (max_backtracks < 0) throw ConfigError("backtrack count must be non-negative");
  }
};

template <typename Scalar>
struct GainEstimate {
  CVecX<Scalar> gains;
  Scalar residual = Scalar(0);  // ||p - |Phi g|^2||^2
  int iterations_used = 0;
  int backtracks = 0;
  bool converged = false;
  bool ridge_fallback = false;
  std::vector<Scalar> objective;  // filled when GsParams::record_objective
};

/// ||p - |Phi g|^2||_2^2
template <typename Scalar>
Scalar power_residual(const CMatX<Scalar>& phi, const CVecX<Scalar>& g, const VecX<Scalar>& p) {
  return (p - (phi * g).cwiseAbs2()).squaredNorm();
}

template <typename Scalar>
struct SpectralInit {
  CVecX<Scalar> gains;
  bool rank_deficient = false;
};

/// Principal eigenvector of M = (1/N) sum_n p_n a_n a_n^H, where a_n^H is row n
/// of Phi, scaled so that sum_n |a_n^H g|^2 = sum_n p_n.
template <typename Scalar>
SpectralInit<Scalar> spectral_init(const CMatX<Scalar>& phi, const VecX<Scalar>& p) {
  if (phi.rows() != p.size()) throw ConfigError("power pattern length does not match Phi");
  const Eigen::Index K = phi.cols();
  SpectralInit<Scalar> out;
  out.gains = CVecX<Scalar>::Zero(K);
  if (K == 0) return out;

  Eigen::ColPivHouseholderQR<CMatX<Scalar>> rank_probe(phi);
  out.rank_deficient = rank_probe.rank() < K;

  const Scalar total = p.sum();
  if (!(total > Scalar(0))) return out;

  const CMatX<Scalar> M = phi.adjoint() * p.asDiagonal() * phi / Scalar(phi.rows());
  Eigen::SelfAdjointEigenSolver<CMatX<Scalar>> eig(M);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition of the correlation matrix failed");
  const CVecX<Scalar> e0 = eig.eigenvectors().col(K - 1);  // eigenvalues ascend
  const Scalar energy = (phi * e0).squaredNorm();
  if (!(energy > Scalar(0))) return out;
  out.gains = std::sqrt(total / energy) * e0;
  return out;
}

/// p_n = sum_ij conj(a_ni) a_nj G_ij is linear in the Hermitian
/// G_ij = conj(g_i) g_j. Solves for G by real least squares over its K^2 free
/// components and returns the conjugated principal eigenvector scaled by
/// sqrt(lambda_max). Returns an empty vector when the lifted system is
/// underdetermined or G has no positive eigenvalue.
template <typename Scalar>
CVecX<Scalar> lifted_init(const CMatX<Scalar>& phi, const VecX<Scalar>& p) {
  if (phi.rows() != p.size()) throw ConfigError("power pattern length does not match Phi");
  const Eigen::Index N = phi.rows();
  const Eigen::Index K = phi.cols();
  const Eigen::Index U = K * K;
  if (K == 0 || N < U) return {};

  // Unknowns: G_ii (real) for each i, then Re/Im of G_ij for i < j.
  MatX<Scalar> A(N, U);
  for (Eigen::Index n = 0; n < N; ++n) {
    Eigen::Index u = 0;
    for (Eigen::Index i = 0; i < K; ++i) A(n, u++) = std::norm(phi(n, i));
    for (Eigen::Index i = 0; i < K; ++i) {
      for (Eigen::Index j = i + 1; j < K; ++j) {
        // conj(a_i) a_j G_ij + conj(a_j) a_i conj(G_ij) = 2 Re(conj(a_i) a_j G_ij)
        const Complex<Scalar> w = std::conj(phi(n, i)) * phi(n, j);
        A(n, u++) = Scalar(2) * w.real();
        A(n, u++) = Scalar(-2) * w.imag();
      }
    }
  }
  Eigen::ColPivHouseholderQR<MatX<Scalar>> qr(A);
  if (qr.rank() < U) return {};
  const VecX<Scalar> x = qr.solve(p);

  CMatX<Scalar> G(K, K);
  Eigen::Index u = 0;
  for (Eigen::Index i = 0; i < K; ++i) G(i, i) = x(u++);
  for (Eigen::Index i = 0; i < K; ++i) {
    for (Eigen::Index j = i + 1; j < K; ++j) {
      G(i, j) = Complex<Scalar>(x(u), x(u + 1));
      G(j, i) = std::conj(G(i, j));
      u += 2;
    }
  }
  Eigen::SelfAdjointEigenSolver<CMatX<Scalar>> eig(G);
  if (eig.info() != Eigen::Success) return {};
  const Scalar lmax = eig.eigenvalues()(K - 1);
  if (!(lmax > Scalar(0)) || !std::isfinite(lmax)) return {};
  return std::sqrt(lmax) * eig.eigenvectors().col(K - 1).conjugate();
}

template <typename Scalar>
CVecX<Scalar> initial_gains(const CMatX<Scalar>& phi, const VecX<Scalar>& p, GsInit policy) {
  if (policy != GsInit::kSpectral) {
    CVecX<Scalar> g = lifted_init(phi, p);
    if (g.size() == phi.cols()) return g;
  }
  return spectral_init(phi, p).gains;
}

/// sqrt(p_n) * y_n / |y_n|, with phase 1 wherever y_n = 0.
template <typename Scalar>
CVecX<Scalar> project_power(const CVecX<Scalar>& y, const VecX<Scalar>& p) {
  if (y.size() != p.size()) throw ConfigError("signal and power pattern lengths differ");
  CVecX<Scalar> out(y.size());
  for (Eigen::Index n = 0; n < y.size(); ++n) {
    const Scalar mag = std::abs(y(n));
    const Scalar amp = std::sqrt(std::max(p(n), Scalar(0)));
    out(n) = mag > Scalar(0) ? amp * (y(n) / mag) : Complex<Scalar>(amp, Scalar(0));
  }
  return out;
}

/// Solves (Phi^H Phi + ridge I) g = Phi^H y with a Cholesky factor computed
/// once, so repeated projections with the same Phi stay cheap.
template <typename Scalar>
class LeastSquaresProjector {
 public:
  /// Reciprocal condition number below which the ridge-free Gram matrix is
  /// treated as singular.
  static constexpr Scalar kSingularRcond = std::numeric_limits<Scalar>::epsilon() * Scalar(1e4);

  LeastSquaresProjector(const CMatX<Scalar>& phi, Scalar ridge) : phi_(phi) {
    if (phi.cols() > phi.rows()) throw ConfigError("Phi has more columns than measurements");
    CMatX<Scalar> gram = phi.adjoint() * phi;
    if (ridge > Scalar(0)) gram.diagonal().array() += ridge;
    llt_.compute(gram);
    if (llt_.info() != Eigen::Success || (ridge == Scalar(0) && llt_.rcond() < kSingularRcond)) {
      std::ostringstream os;
      os << "normal matrix is singular (rcond " << (llt_.info() == Eigen::Success ? llt_.rcond() : Scalar(0))
         << ", ridge " << ridge << ")";
      throw NumericalError(os.str());
    }
  }

  CVecX<Scalar> solve(const CVecX<Scalar>& y) const { return llt_.solve(phi_.adjoint() * y); }

 private:
  const CMatX<Scalar>& phi_;
  Eigen::LLT<CMatX<Scalar>> llt_;
};

/// Default ridge used after a singular ridge-free solve.
template <typename Scalar>
Scalar fallback_ridge(const CMatX<Scalar>& phi) {
  const Scalar trace = phi.cwiseAbs2().sum();
  return Scalar(1e-10) * trace / Scalar(std::max<Eigen::Index>(phi.cols(), 1));
}

/// Least-squares gains for Phi g ~ y.
template <typename Scalar>
CVecX<Scalar> solve_gains(const CMatX<Scalar>& phi, const CVecX<Scalar>& y, Scalar ridge = Scalar(0)) {
  if (phi.rows() != y.size()) throw ConfigError("Phi and y sizes differ");
  return LeastSquaresProjector<Scalar>(phi, ridge).solve(y);
}

/// Gerchberg-Saxton phase retrieval: alternate the power projection and the
/// least-squares projection until the relative drop of ||p - |Phi g|^2||^2
/// falls below params.tol, the fit is exact to ~1e-12, or max_iter is hit.
/// A step that raises the objective is halved along the GS direction; if no
/// halving helps, the current point is returned as stationary. The recorded
/// objective is therefore non-increasing.
template <typename Scalar>
GainEstimate<Scalar> gs_estimate(const CMatX<Scalar>& phi, const VecX<Scalar>& p, const GsParams<Scalar>& params,
                                 const std::optional<CVecX<Scalar>>& init = std::nullopt) {
  params.validate();
  if (phi.rows() != p.size()) throw ConfigError("power pattern length does not match Phi");
  GainEstimate<Scalar> est;
  est.gains = init ? *init : initial_gains(phi, p, params.init);
  if (est.gains.size() != phi.cols()) throw ConfigError("initial gain vector has the wrong length");

  const Scalar exact_floor = Scalar(1e-24) * p.squaredNorm();

  std::optional<LeastSquaresProjector<Scalar>> projector;
  try {
    projector.emplace(phi, params.ridge);
  } catch (const NumericalError&) {
    if (params.ridge > Scalar(0)) throw;
    projector.emplace(phi, fallback_ridge(phi));
    est.ridge_fallback = true;
  }

  Scalar obj = power_residual(phi, est.gains, p);
  if (!std::isfinite(obj)) throw NumericalError("non-finite GS objective at initialisation");
  if (params.record_objective) est.objective.push_back(obj);

  if (obj <= exact_floor) {
    est.converged = true;
    est.residual = obj;
    return est;
  }

  for (int it = 1; it <= params.max_iter; ++it) {
    const CVecX<Scalar> y_hat = project_power(CVecX<Scalar>(phi * est.gains), p);
    CVecX<Scalar> next = projector->solve(y_hat);
    Scalar next_obj = power_residual(phi, next, p);
    if (!std::isfinite(next_obj) || !next.allFinite()) {
      std::ostringstream os;
      os << "non-finite GS iterate at iteration " << it;
      throw NumericalError(os.str());
    }
    est.iterations_used = it;
    if (next_obj > obj) {
      const CVecX<Scalar> dir = next - est.gains;
      Scalar step = Scalar(1);
      bool improved = false;
      for (int b = 0; b < params.max_backtracks; ++b) {
        step /= Scalar(2);
        ++est.backtracks;
        next = est.gains + step * dir;
        next_obj = power_residual(phi, next, p);
        if (next_obj <= obj) {
          improved = true;
          break;
        }
      }
      if (!improved) {
        est.converged = true;
        break;
      }
    }
    est.gains = std::move(next);
    const Scalar drop = obj - next_obj;
    obj = next_obj;
    if (params.record_objective) est.objective.push_back(obj);
    if (obj <= exact_floor || drop <= params.tol * (obj + drop)) {
      est.converged = true;
      break;
    }
  }
  est.residual = obj;
  return est;
}

}  // namespace nfbt
