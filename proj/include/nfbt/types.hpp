// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The nfbt Authors

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace nfbt {

template <typename Scalar>
using Complex = std::complex<Scalar>;

template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using CVecX = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;

template <typename Scalar>
using CMatX = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;

using cd = std::complex<double>;
using VecXd = VecX<double>;
using MatXd = MatX<double>;
using CVecXd = CVecX<double>;
using CMatXd = CMatX<double>;
using VecXi = Eigen::VectorXi;

/// Random source used everywhere a draw is needed. All sampling routines take
/// it by reference so a trial is a pure function of its seed.
using Rng = std::mt19937_64;

/// Input outside the physical domain of an operation (negative range,
/// |theta| > 1, an antenna sitting exactly on a scatterer).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Invalid configuration: empty sampling intervals, bad hyperparameters.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Singular systems and non-finite intermediates.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the 1-based row (line) number when known.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(const std::string& what, std::int64_t row = -1)
      : std::runtime_error(row >= 0 ? "row " + std::to_string(row) + ": " + what : what),
        row_(row) {}
  std::int64_t row() const noexcept { return row_; }

 private:
  std::int64_t row_;
};

inline constexpr double kPi = 3.14159265358979323846264338327950288;

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }
inline double dbm_to_watt(double dbm) { return 1e-3 * db_to_linear(dbm); }

}  // namespace nfbt
