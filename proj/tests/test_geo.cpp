#include <cmath>
#include <random>

#include "aurec/geo.hpp"
#include "doctest.h"

using namespace aurec;

namespace {

// Trajectory stub: every point valid, positions given per frame.
LandmarkTrajectory make_traj(const std::vector<std::vector<Point>>& positions) {
  LandmarkTrajectory traj;
  traj.points.resize(positions.size());
  traj.reconstructed.resize(positions.size());
  for (size_t f = 0; f < positions.size(); ++f) {
    traj.reconstructed[f].resize(positions[f].size(), false);
    for (const Point& p : positions[f]) traj.points[f].push_back({p, true, 0.0});
  }
  return traj;
}

// Single point moving linearly to (4, 0) over 5 frames.
LandmarkTrajectory linear_ramp_traj() {
  std::vector<std::vector<Point>> pos;
  for (int f = 0; f < 5; ++f) pos.push_back({Point{f * 1.0, 0.0}});
  return make_traj(pos);
}

}  // namespace

TEST_CASE("intensity endpoints") {
  const LandmarkTrajectory traj = linear_ramp_traj();
  CHECK(intensity(traj, 0) == 0.0);
  CHECK(intensity(traj, 4) == 1.0);
  CHECK(intensity(traj, 2) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("intensity requires apex motion") {
  const LandmarkTrajectory traj =
      make_traj({{{3, 3}, {5, 5}}, {{3, 3}, {5, 5}}});
  CHECK_THROWS_WITH_AS(intensity(traj, 1), doctest::Contains("static sequence"), numeric_error);
}

TEST_CASE("intensity invariances") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::vector<std::vector<Point>> pos(4, std::vector<Point>(3));
  for (auto& frame : pos)
    for (auto& p : frame) p = {10.0 + u(rng), 10.0 + u(rng)};
  const LandmarkTrajectory base = make_traj(pos);

  // Global translation of every frame leaves the ratio unchanged.
  auto shifted = pos;
  for (auto& frame : shifted)
    for (auto& p : frame) {
      p.x += 17.0;
      p.y -= 4.0;
    }
  // Scaling displacements about frame 1 leaves the ratio unchanged.
  auto scaled = pos;
  for (auto& frame : scaled)
    for (size_t i = 0; i < frame.size(); ++i) {
      frame[i].x = pos[0][i].x + 2.5 * (frame[i].x - pos[0][i].x);
      frame[i].y = pos[0][i].y + 2.5 * (frame[i].y - pos[0][i].y);
    }
  const LandmarkTrajectory t_shift = make_traj(shifted);
  const LandmarkTrajectory t_scale = make_traj(scaled);
  for (int f = 0; f < 4; ++f) {
    CHECK(intensity(t_shift, f) == doctest::Approx(intensity(base, f)).epsilon(1e-9));
    CHECK(intensity(t_scale, f) == doctest::Approx(intensity(base, f)).epsilon(1e-9));
  }
}

TEST_CASE("bucket_state 3-state boundaries") {
  const StateBucketing b = make_bucketing(3);
  CHECK(bucket_state(0.0, b) == 0);
  CHECK(bucket_state(0.32999, b) == 0);
  CHECK(bucket_state(0.33, b) == 1);
  CHECK(bucket_state(0.66, b) == 1);  // inclusive upper bound
  CHECK(bucket_state(0.661, b) == 2);
  CHECK(bucket_state(1.0, b) == 2);
  CHECK(bucket_state(1.7, b) == 2);  // clamps past the apex
  CHECK_THROWS_AS(bucket_state(-0.1, b), data_error);
}

TEST_CASE("bucket_state 5-state boundaries") {
  const StateBucketing b = make_bucketing(5);
  CHECK(bucket_state(0.0, b) == 0);
  CHECK(bucket_state(0.2, b) == 1);
  CHECK(bucket_state(0.4, b) == 2);
  CHECK(bucket_state(0.6, b) == 2);  // middle cell closed on the right
  CHECK(bucket_state(0.61, b) == 3);
  CHECK(bucket_state(0.8, b) == 4);
  CHECK(bucket_state(1.0, b) == 4);
}

TEST_CASE("bucket_state is monotone") {
  for (int n : {3, 5}) {
    const StateBucketing b = make_bucketing(n);
    int prev = 0;
    for (double v = 0.0; v <= 1.2; v += 0.001) {
      const int s = bucket_state(v, b);
      CHECK(s >= prev);
      prev = s;
    }
  }
  CHECK_THROWS_AS(make_bucketing(4), data_error);
}

TEST_CASE("displacement features") {
  const LandmarkTrajectory traj = linear_ramp_traj();
  const auto features = displacement_features(traj);
  REQUIRE(features.size() == 5);
  for (double v : features[0]) CHECK(v == 0.0);
  CHECK(features[2][0] == doctest::Approx(2.0));  // frame 3 of the 4px ramp
  CHECK(features[2][1] == doctest::Approx(0.0));

  SUBCASE("point permutation commutes with slot permutation") {
    std::vector<std::vector<Point>> pos(3, std::vector<Point>(2));
    pos[1] = {{1, 2}, {3, 4}};
    pos[2] = {{2, 4}, {6, 8}};
    const auto direct = displacement_features(make_traj(pos));
    for (auto& frame : pos) std::swap(frame[0], frame[1]);
    const auto swapped = displacement_features(make_traj(pos));
    for (size_t f = 0; f < 3; ++f) {
      CHECK(direct[f][0] == swapped[f][2]);
      CHECK(direct[f][1] == swapped[f][3]);
      CHECK(direct[f][2] == swapped[f][0]);
      CHECK(direct[f][3] == swapped[f][1]);
    }
  }
}

TEST_CASE("fit_geo_space per-state bases") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<std::vector<Vec>> by_state(3);
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 30; ++i) {
      Vec v(12);
      for (double& x : v) x = u(rng) + j;  // different mean per state
      by_state[j].push_back(v);
    }
  const StateBucketing b = make_bucketing(3);
  const GeoFeatureSpace space = fit_geo_space(by_state, b, 6);
  CHECK(space.state_count() == 3);
  CHECK(space.feature_dim() == 6);

  // Projected variances match a direct eigensolve of the state covariance.
  for (int j = 0; j < 3; ++j) {
    const auto& samples = by_state[j];
    Vec mean(12, 0.0);
    for (const auto& s : samples)
      for (int c = 0; c < 12; ++c) mean[c] += s[c] / samples.size();
    Mat cov(12, 12);
    for (const auto& s : samples)
      for (int r = 0; r < 12; ++r)
        for (int c = 0; c < 12; ++c)
          cov(r, c) += (s[r] - mean[r]) * (s[c] - mean[c]) / samples.size();
    const SymEig oracle = sym_eig(cov);
    for (int k = 0; k < 6; ++k)
      CHECK(space.per_state_basis[j].eigenvalues[k] ==
            doctest::Approx(oracle.values[k]).epsilon(1e-8));
  }

  SUBCASE("identical data gives identical bases") {
    std::vector<std::vector<Vec>> same(3, by_state[0]);
    const GeoFeatureSpace s2 = fit_geo_space(same, b, 6);
    CHECK(s2.per_state_basis[0].components == s2.per_state_basis[2].components);
  }
  SUBCASE("empty state bucket rejected") {
    by_state[1].clear();
    CHECK_THROWS_WITH_AS(fit_geo_space(by_state, b, 6),
                         doctest::Contains("no training frames"), data_error);
  }
  SUBCASE("k outside [6,10] rejected") {
    CHECK_THROWS_AS(fit_geo_space(by_state, b, 5), data_error);
    CHECK_THROWS_AS(fit_geo_space(by_state, b, 11), data_error);
  }
}
