// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The nfbt Authors

#include <doctest.h>

#include <cmath>
#include <sstream>

#include "nfbt/stage1.hpp"

using namespace nfbt;

namespace {

ArrayGeometry<double> big() { return ArrayGeometry<double>{256, 0.01, 0.005}; }

ChannelRealization<double> scene(Rng& rng, std::vector<int> counts = {2, 3, 4}) {
  ScenarioConfig<double> sc;
  sc.array = big();
  sc.nlos_count_choices = std::move(counts);
  return sample_scenario(sc, rng);
}

CoarseEstimate exact(const ChannelRealization<double>& t, int l_max = 5) {
  CoarseErrorModel m;
  m.error = SlotStats{0, 0, 0, 0};
  m.l_max = l_max;
  Rng rng(0);
  return synthetic_coarse_estimate(t, m, rng);
}

}  // namespace

TEST_CASE("threshold_paths") {
  auto d = threshold_paths((VecXd(3) << 10, -10, 10).finished(), 0.5);
  CHECK(d.slots == std::vector<int>{1, 3});
  CHECK(d.count == 2);

  d = threshold_paths(VecXd::Zero(4), 0.5);
  CHECK(d.count == 4);

  Rng rng(1);
  std::normal_distribution<double> g(0, 3);
  for (double th : {0.1, 0.5, 0.9}) {
    VecXd q(50);
    for (int i = 0; i < 50; ++i) q(i) = g(rng);
    int count = 0;
    for (int i = 0; i < 50; ++i) count += 1.0 / (1.0 + std::exp(-q(i))) >= th;
    CHECK(threshold_paths(q, th).count == count);
  }
  CHECK_THROWS_AS(threshold_paths(VecXd::Zero(2), 0.0), ConfigError);
  CHECK_THROWS_AS(threshold_paths(VecXd::Zero(2), 1.0), ConfigError);
  CHECK(sigmoid(-800.0) == 0.0);
  CHECK(sigmoid(800.0) == 1.0);
}

TEST_CASE("synthetic coarse estimator") {
  Rng rng(2);
  const auto t = scene(rng);
  const auto c = exact(t);
  CHECK(c.los_theta == t.los.theta);
  CHECK(c.los_range == t.los.range);
  CHECK(threshold_paths(c.logits).count == static_cast<int>(t.nlos.size()));
  for (std::size_t i = 0; i < t.nlos.size(); ++i) {
    CHECK(c.thetas(i) == t.nlos[i].theta);
    CHECK(c.ranges(i) == t.nlos[i].range);
  }
  for (int i = static_cast<int>(t.nlos.size()); i < 5; ++i) CHECK(c.logits(i) < 0.0);

  CoarseErrorModel all_missed;
  all_missed.miss_prob = 1.0;
  const auto m = synthetic_coarse_estimate(t, all_missed, rng);
  CHECK(threshold_paths(m.logits).count == 0);

  Rng a(5), b(5);
  CoarseErrorModel noisy;
  const auto x = synthetic_coarse_estimate(t, noisy, a);
  const auto y = synthetic_coarse_estimate(t, noisy, b);
  CHECK(x.thetas == y.thetas);
  CHECK(x.los_range == y.los_range);

  double s = 0.0;
  const int n = 10000;
  for (int k = 0; k < n; ++k) {
    const double e = synthetic_coarse_estimate(t, noisy, rng).los_theta - t.los.theta;
    s += e * e;
  }
  CHECK(std::sqrt(s / n) == doctest::Approx(0.02).epsilon(0.03));
}

TEST_CASE("calibrate error stats") {
  Rng rng(3);
  std::vector<CalibrationPair> pairs;
  for (int k = 0; k < 20; ++k) {
    const auto t = scene(rng);
    pairs.emplace_back(exact(t), t);
  }
  auto st = calibrate_error_stats(pairs);
  REQUIRE(st.slots.size() == 6);
  for (const auto& s : st.slots) {
    CHECK(s.mu_theta == 0.0);
    CHECK(s.sigma_theta == 0.0);
    CHECK(s.mu_range == 0.0);
    CHECK(s.sigma_range == 0.0);
  }

  for (auto& [c, t] : pairs) {
    c.los_theta += 0.1;
    for (int i = 0; i < c.l_max(); ++i) c.thetas(i) += 0.1;
  }
  st = calibrate_error_stats(pairs);
  for (int k = 0; k <= 4; ++k) {
    CHECK(st.slots[k].mu_theta == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(st.slots[k].sigma_theta < 1e-12);
  }

  std::vector<CalibrationPair> noisy;
  CoarseErrorModel m;
  for (int k = 0; k < 10000; ++k) {
    const auto t = scene(rng, {2});
    noisy.emplace_back(synthetic_coarse_estimate(t, m, rng), t);
  }
  st = calibrate_error_stats(noisy);
  CHECK(st.slots[0].sigma_theta == doctest::Approx(0.02).epsilon(0.03));
  CHECK(st.slots[1].sigma_theta == doctest::Approx(0.02).epsilon(0.03));
  CHECK(st.slots[0].sigma_range == doctest::Approx(1.0).epsilon(0.03));
  // Slot 5 never holds a path: falls back to the pooled NLoS statistics.
  CHECK(st.slots[5].sigma_theta == doctest::Approx(0.02).epsilon(0.03));

  CHECK_THROWS_AS(calibrate_error_stats({pairs.front()}), ConfigError);
}

TEST_CASE("calibration matches slots before differencing") {
  Rng rng(4);
  std::vector<CalibrationPair> pairs;
  for (int k = 0; k < 10; ++k) {
    auto t = scene(rng, {3});
    auto c = exact(t);
    // Swap the first two slots: matching must undo it.
    std::swap(c.thetas(0), c.thetas(1));
    std::swap(c.ranges(0), c.ranges(1));
    pairs.emplace_back(c, t);
  }
  const auto st = calibrate_error_stats(pairs);
  for (int k = 1; k <= 3; ++k) CHECK(st.slots[k].sigma_range == 0.0);
}

TEST_CASE("search region bounds") {
  const auto a = big();
  const double zf = fresnel_distance(a), zr = rayleigh_distance(a);
  CoarseEstimate c;
  c.los_theta = 0.99;
  c.los_range = 5.0;
  c.thetas = (VecXd(2) << 0.2, -0.3).finished();
  c.ranges = (VecXd(2) << 20.0, 30.0).finished();
  c.logits = (VecXd(2) << 10, 10).finished();
  ErrorStats st = ErrorStats::uniform(2, SlotStats{0.0, 0.05, 0.0, 0.5});
  const auto r = build_search_region(c, threshold_paths(c.logits), st, a, 3.0);
  REQUIRE(r.n_paths() == 3);
  CHECK(r.theta[0].ub == 1.0);
  CHECK(r.theta[0].lb == doctest::Approx(0.84));
  CHECK(r.range[0].lb == doctest::Approx(7.19833).epsilon(1e-5));
  CHECK(r.range[0].lb == zf);
  CHECK(r.range[1].lb == doctest::Approx(18.5));
  CHECK(r.range[1].ub == doctest::Approx(21.5));
  CHECK(r.slots == std::vector<int>{0, 1, 2});

  // mu shifts the box; zero sigma collapses it to the bias-corrected point.
  st = ErrorStats::uniform(2, SlotStats{0.01, 0.0, 2.0, 0.0});
  const auto p = build_search_region(c, threshold_paths(c.logits), st, a, 3.0);
  CHECK(p.theta[1].lb == doctest::Approx(0.19));
  CHECK(p.theta[1].degenerate);
  CHECK(p.range[2].lb == doctest::Approx(28.0));
  CHECK(p.range[2].width() == 0.0);
  // LoS range 5 - 2 = 3 m lies below Z_Fres with zero sigma: point at the clamp.
  CHECK(p.range[0].lb == zf);
  CHECK(p.range[0].ub == zf);

  c.los_range = 1000.0;
  const auto far = build_search_region(c, threshold_paths(c.logits), st, a, 3.0);
  CHECK(far.range[0].lb == zr);
  CHECK(far.range[0].degenerate);

  CHECK_THROWS_AS(build_search_region(c, threshold_paths(c.logits), st, a, 0.0), ConfigError);
}

TEST_CASE("search region invariants and monotonicity") {
  Rng rng(6);
  const auto a = big();
  const double zf = fresnel_distance(a), zr = rayleigh_distance(a);
  CoarseErrorModel m;
  m.error = SlotStats{0.01, 0.05, -1.0, 4.0};
  const ErrorStats st = ErrorStats::uniform(5, m.error);
  for (int k = 0; k < 200; ++k) {
    const auto t = scene(rng);
    const auto c = synthetic_coarse_estimate(t, m, rng);
    const auto det = threshold_paths(c.logits);
    const auto r1 = build_search_region(c, det, st, a, 1.0);
    const auto r3 = build_search_region(c, det, st, a, 3.0);
    for (int l = 0; l < r3.n_paths(); ++l) {
      CHECK(r3.theta[l].lb <= r3.theta[l].ub);
      CHECK(r3.range[l].lb <= r3.range[l].ub);
      CHECK(r3.theta[l].lb >= -1.0);
      CHECK(r3.theta[l].ub <= 1.0);
      CHECK(r3.range[l].lb >= zf);
      CHECK(r3.range[l].ub <= zr);
      CHECK(r3.theta[l].lb <= r1.theta[l].lb);
      CHECK(r3.theta[l].ub >= r1.theta[l].ub);
      CHECK(r3.range[l].lb <= r1.range[l].lb);
      CHECK(r3.range[l].ub >= r1.range[l].ub);
    }
    CHECK(r3.contains(coarse_parameters(c, r3, st)));
  }
}

TEST_CASE("coarse parameters are bias corrected") {
  CoarseEstimate c;
  c.los_theta = 0.1;
  c.los_range = 20.0;
  c.thetas = (VecXd(2) << 0.2, -0.3).finished();
  c.ranges = (VecXd(2) << 25.0, 30.0).finished();
  c.logits = (VecXd(2) << -10, 10).finished();
  const ErrorStats st = ErrorStats::uniform(2, SlotStats{0.01, 0.02, 1.0, 1.0});
  const auto r = build_search_region(c, threshold_paths(c.logits), st, big(), 3.0);
  const auto eta = coarse_parameters(c, r, st);
  REQUIRE(eta.n_paths() == 2);
  CHECK(eta.theta(0) == doctest::Approx(0.09));
  CHECK(eta.range(0) == doctest::Approx(19.0));
  CHECK(eta.theta(1) == doctest::Approx(-0.31));
  CHECK(eta.range(1) == doctest::Approx(29.0));
}

TEST_CASE("coarse estimate NDJSON") {
  std::istringstream empty("");
  CHECK(read_coarse_estimates(empty).empty());

  std::istringstream fixture(
      "# header\n"
      "{\"trial\": 0, \"los\": {\"theta\": 0.1, \"range\": 10.5}, \"paths\": [{\"theta\": -0.2, \"range\": 12.0, "
      "\"logit\": 3.5}, {\"theta\": 0.0, \"range\": 0.0, \"logit\": -9.0}]}\n"
      "\n"
      "{\"trial\": 7, \"los\": {\"theta\": -0.45, \"range\": 30.25}, \"paths\": [{\"theta\": 0.3, \"range\": 8.5, "
      "\"logit\": 1.0}, {\"theta\": 0.125, \"range\": 21.0, \"logit\": 2.0}]}\n");
  const auto v = read_coarse_estimates(fixture);
  REQUIRE(v.size() == 2);
  CHECK(v[0].trial == 0);
  CHECK(v[0].los_range == 10.5);
  CHECK(v[0].thetas(0) == -0.2);
  CHECK(v[0].logits(1) == -9.0);
  CHECK(v[1].trial == 7);
  CHECK(v[1].los_theta == -0.45);
  CHECK(v[1].ranges(1) == 21.0);

  std::ostringstream out;
  for (const auto& c : v) write_coarse_estimate(out, c);
  std::istringstream back(out.str());
  const auto w = read_coarse_estimates(back);
  REQUIRE(w.size() == 2);
  for (int k = 0; k < 2; ++k) {
    CHECK(w[k].trial == v[k].trial);
    CHECK(w[k].los_theta == v[k].los_theta);
    CHECK(w[k].los_range == v[k].los_range);
    CHECK(w[k].thetas == v[k].thetas);
    CHECK(w[k].ranges == v[k].ranges);
    CHECK(w[k].logits == v[k].logits);
  }

  Rng rng(8);
  const auto t = scene(rng);
  CoarseEstimate c = synthetic_coarse_estimate(t, CoarseErrorModel{}, rng);
  std::ostringstream o2;
  write_coarse_estimate(o2, c);
  std::istringstream i2(o2.str());
  const auto z = read_coarse_estimates(i2);
  CHECK(z[0].thetas == c.thetas);
  CHECK(z[0].los_range == c.los_range);
}

TEST_CASE("coarse estimate schema errors carry the row") {
  auto row_of = [](const std::string& text) {
    std::istringstream in(text);
    try {
      read_coarse_estimates(in);
    } catch (const SchemaError& e) {
      return e.row();
    }
    return std::int64_t(-1);
  };
  const std::string good = "{\"trial\": 0, \"los\": {\"theta\": 0.1, \"range\": 10.5}, \"paths\": []}\n";
  CHECK(row_of(good) == -1);
  CHECK(row_of(good + "{\"trial\": 1, \"paths\": []}\n") == 2);
  CHECK(row_of(good + "# c\n{not json\n") == 3);
  CHECK(row_of(good + "{\"trial\": 1, \"los\": {\"theta\": 0.1, \"range\": 10.5}, \"paths\": [{\"theta\": 0, "
                      "\"range\": 1, \"logit\": 0}]}\n") == 2);
  CHECK(row_of("{\"trial\": 0, \"los\": {\"theta\": \"x\", \"range\": 10.5}, \"paths\": []}\n") == 1);
  CHECK(row_of("{\"trial\": 0.5, \"los\": {\"theta\": 0, \"range\": 10.5}, \"paths\": []}\n") == 1);
  CHECK_THROWS(load_coarse_estimates("/nonexistent/coarse.ndjson"));
}

TEST_CASE("error stats JSON") {
  ErrorStats s{{{0.01, 0.02, -0.5, 1.25}, {0.0, 0.03, 0.0, 2.0}}};
  std::ostringstream out;
  write_error_stats(out, s);
  std::istringstream in(out.str());
  const auto r = read_error_stats(in);
  REQUIRE(r.slots.size() == 2);
  CHECK(r.slots[0].mu_range == -0.5);
  CHECK(r.slots[1].sigma_range == 2.0);
  CHECK(r.slots[0].sigma_theta == 0.02);

  std::istringstream bad("{\"slots\": [{\"mu_theta\": 0, \"sigma_theta\": -1, \"mu_range\": 0, \"sigma_range\": 0}]}");
  CHECK_THROWS_AS(read_error_stats(bad), SchemaError);
  std::istringstream missing("{\"slots\": [{\"mu_theta\": 0}]}");
  CHECK_THROWS_AS(read_error_stats(missing), SchemaError);
  std::istringstream not_json("slots");
  CHECK_THROWS_AS(read_error_stats(not_json), SchemaError);
}
