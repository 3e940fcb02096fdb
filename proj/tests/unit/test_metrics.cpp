// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The nfbt Authors

#include <doctest.h>

#include <cmath>

#include "nfbt/metrics.hpp"

using namespace nfbt;

namespace {

CVecXd random_channel(int n, Rng& rng) {
  std::normal_distribution<double> g;
  CVecXd h(n);
  for (int i = 0; i < n; ++i) h(i) = cd(g(rng), g(rng));
  return h;
}

SlotPositions slots(std::initializer_list<double> t, std::initializer_list<double> r) {
  SlotPositions s{VecXd(t.size()), VecXd(r.size())};
  int i = 0;
  for (double x : t) s.thetas(i++) = x;
  i = 0;
  for (double x : r) s.ranges(i++) = x;
  return s;
}

}  // namespace

TEST_CASE("nmse fixtures") {
  Rng rng(1);
  const auto h = random_channel(16, rng);
  CHECK(nmse(h, h).aligned == 0.0);
  CHECK(nmse<double>(h, std::polar(1.0, 0.7) * h).aligned < 1e-28);
  CHECK(nmse<double>(h, std::polar(1.0, 0.7) * h).unaligned > 0.1);
  CHECK(nmse<double>(h, CVecXd::Zero(16)).aligned == doctest::Approx(1.0));
  CHECK_THROWS_AS(nmse<double>(CVecXd::Zero(16), h), DomainError);
  CHECK_THROWS_AS(nmse<double>(h, CVecXd::Zero(15)), ConfigError);
}

TEST_CASE("nmse phase alignment is optimal") {
  Rng rng(2);
  std::uniform_real_distribution<double> u(0, 2 * kPi);
  for (int k = 0; k < 20; ++k) {
    const auto h = random_channel(32, rng);
    const CVecXd e = h + 0.4 * random_channel(32, rng);
    const double best = nmse(h, e).aligned;
    for (int j = 0; j < 100; ++j) {
      const CVecXd rot = std::polar(1.0, u(rng)) * e;
      CHECK(best <= nmse(h, rot).unaligned + 1e-15);
    }
  }
}

TEST_CASE("achievable rate") {
  Rng rng(3);
  const auto h = random_channel(16, rng);
  const double pt = 0.01, s2 = 1e-3;
  const double perfect = perfect_rate(h, pt, s2);
  CHECK(perfect == doctest::Approx(std::log2(1 + pt * h.squaredNorm() / s2)));
  CHECK(achievable_rate(h, h, pt, s2).value == doctest::Approx(perfect).epsilon(1e-14));
  CHECK(achievable_rate<double>(h, std::polar(2.0, 1.1) * h, pt, s2).value == doctest::Approx(perfect).epsilon(1e-14));

  CVecXd perp = random_channel(16, rng);
  perp -= h * (h.dot(perp) / h.squaredNorm());
  CHECK(achievable_rate(h, perp, pt, s2).value < 1e-12);

  const auto z = achievable_rate<double>(h, CVecXd::Zero(16), pt, s2);
  CHECK(z.zero_estimate);
  CHECK(z.value == 0.0);
  CHECK_THROWS_AS(achievable_rate(h, h, pt, 0.0), ConfigError);

  for (int k = 0; k < 100; ++k)
    CHECK(achievable_rate(h, random_channel(16, rng), pt, s2).value <= perfect + 1e-9);
}

TEST_CASE("small NMSE implies a small rate gap") {
  Rng rng(4);
  for (int k = 0; k < 50; ++k) {
    const auto h = random_channel(64, rng);
    const CVecXd e = h + 0.005 * h.norm() * random_channel(64, rng).normalized();
    REQUIRE(linear_to_db(nmse(h, e).aligned) < -40.0);
    const double s2 = 0.01 * h.squaredNorm() / 100.0;
    CHECK(perfect_rate(h, 0.01, s2) - achievable_rate(h, e, 0.01, s2).value < 1e-3);
  }
}

TEST_CASE("matched RMSE") {
  const auto t1 = slots({0.1, -0.2}, {10, 20});
  const auto t2 = slots({0.3}, {15});
  CHECK(rmse_matched({t1, t2}, {t1, t2}).theta == 0.0);
  CHECK(rmse_matched({t1, t2}, {t1, t2}).range == 0.0);

  const auto s1 = slots({0.1, -0.2}, {11, 21});
  const auto s2 = slots({0.3}, {16});
  const auto r = rmse_matched({s1, s2}, {t1, t2});
  CHECK(r.range == doctest::Approx(1.0));
  CHECK(r.theta == 0.0);
  CHECK(r.pairs == 3);

  // Order of estimates does not matter; a spurious estimate is a false alarm.
  const auto swapped = slots({-0.2, 0.1, 0.9}, {21.5, 10.0, 30.0});
  const auto m = matched_errors(swapped, t1);
  CHECK(m.pairs == 2);
  CHECK(m.false_alarms == 1);
  CHECK(m.sum_sq_range == doctest::Approx(2.25));

  Rng rng(5);
  std::normal_distribution<double> g(0, 0.01), gr(0, 0.5);
  std::vector<SlotPositions> est, tru;
  double st = 0.0, sr = 0.0;
  int n = 0;
  for (int k = 0; k < 30; ++k) {
    auto t = slots({-0.4, 0.0, 0.4}, {10, 20, 30});
    auto e = t;
    for (int i = 0; i < 3; ++i) {
      e.thetas(i) += g(rng);
      e.ranges(i) += gr(rng);
      st += std::pow(e.thetas(i) - t.thetas(i), 2);
      sr += std::pow(e.ranges(i) - t.ranges(i), 2);
      ++n;
    }
    est.push_back(e);
    tru.push_back(t);
  }
  const auto rr = rmse_matched(est, tru);
  CHECK(rr.theta == doctest::Approx(std::sqrt(st / n)).epsilon(1e-12));
  CHECK(rr.range == doctest::Approx(std::sqrt(sr / n)).epsilon(1e-12));

  const auto missed = matched_errors(SlotPositions{VecXd(0), VecXd(0)}, t1);
  CHECK(missed.misses == 2);
  CHECK_THROWS_AS(rmse_from(missed), DomainError);
}

TEST_CASE("path count accuracy") {
  CHECK(path_count_accuracy({true, true, true}) == 1.0);
  CHECK(path_count_accuracy({false, false}) == 0.0);
  CHECK(path_count_accuracy({true, true, false, true, true, false, true, true, false, true}) == doctest::Approx(0.7));
  CHECK_THROWS_AS(path_count_accuracy({}), ConfigError);
}
