#include <cmath>
#include <random>

#include "aurec/fusion.hpp"
#include "aurec/geo.hpp"
#include "doctest.h"

using namespace aurec;

namespace {

FusionNet random_net(int inputs, int hidden, int outputs, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  FusionNet net;
  net.inputs = inputs;
  net.hidden = hidden;
  net.outputs = outputs;
  net.w1 = Mat(hidden, inputs);
  net.w2 = Mat(outputs, hidden);
  net.b1.resize(hidden);
  net.b2.resize(outputs);
  for (double& v : net.w1.a) v = u(rng);
  for (double& v : net.w2.a) v = u(rng);
  for (double& v : net.b1) v = u(rng);
  for (double& v : net.b2) v = u(rng);
  return net;
}

double loss_of(const FusionNet& net, const std::vector<Vec>& inputs,
               const std::vector<Vec>& targets) {
  double loss = 0.0;
  for (size_t s = 0; s < inputs.size(); ++s) {
    const Vec y = fusion_forward(net, inputs[s]);
    for (int o = 0; o < net.outputs; ++o)
      loss += (y[o] - targets[s][o]) * (y[o] - targets[s][o]);
  }
  return loss / (double(inputs.size()) * net.outputs);
}

LandmarkTrajectory ramp_trajectory(int t) {
  LandmarkTrajectory traj;
  traj.points.resize(t);
  traj.reconstructed.resize(t, std::vector<bool>(1, false));
  for (int f = 0; f < t; ++f) traj.points[f].push_back({{f * 10.0 / (t - 1), 0.0}, true, 0.0});
  return traj;
}

}  // namespace

TEST_CASE("build_score_vector concatenates banks in order") {
  const Vec s = build_score_vector({1.0, 2.0}, {3.0, 4.0});
  CHECK(s == Vec{1.0, 2.0, 3.0, 4.0});
  CHECK_THROWS_AS(build_score_vector({1.0}, {1.0, 2.0}), data_error);
  CHECK_THROWS_AS(build_score_vector({std::nan("")}, {1.0}), numeric_error);
}

TEST_CASE("forward: zero weights give 0.5 outputs") {
  FusionNet net;
  net.inputs = 4;
  net.hidden = 3;
  net.outputs = 2;
  net.w1 = Mat(3, 4);
  net.w2 = Mat(2, 3);
  net.b1.assign(3, 0.0);
  net.b2.assign(2, 0.0);
  const Vec y = fusion_forward(net, {1.0, -2.0, 0.5, 3.0});
  CHECK(y[0] == doctest::Approx(0.5));
  CHECK(y[1] == doctest::Approx(0.5));
}

TEST_CASE("forward: hand-checkable pass-through scalar") {
  FusionNet net;
  net.inputs = 1;
  net.hidden = 1;
  net.outputs = 1;
  net.w1 = Mat(1, 1);
  net.w1(0, 0) = 1.0;
  net.w2 = Mat(1, 1);
  net.w2(0, 0) = 1.0;
  net.b1.assign(1, 0.0);
  net.b2.assign(1, 0.0);
  const double x = 0.8;
  const double expected = 1.0 / (1.0 + std::exp(-std::tanh(x)));
  CHECK(fusion_forward(net, {x})[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("forward outputs stay strictly inside (0,1)") {
  const FusionNet net = random_net(3, 5, 4, 7);
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int rep = 0; rep < 20; ++rep) {
    Vec x(3);
    for (double& v : x) v = u(rng);
    for (double y : fusion_forward(net, x)) {
      CHECK(y > 0.0);
      CHECK(y < 1.0);
    }
  }
}

TEST_CASE("analytic gradient matches central finite differences") {
  std::mt19937 rng(11);
  std::uniform_int_distribution<int> pick_in(1, 4), pick_h(1, 5), pick_out(1, 3), pick_n(1, 6);
  std::uniform_real_distribution<double> ux(-2.0, 2.0), ut(0.0, 1.0);
  const double step = 1e-5;

  for (int config = 0; config < 20; ++config) {
    const int inputs = pick_in(rng), hidden = pick_h(rng), outputs = pick_out(rng);
    const int n = pick_n(rng);
    FusionNet net = random_net(inputs, hidden, outputs, 100 + config);
    std::vector<Vec> xs(n, Vec(inputs)), ts(n, Vec(outputs));
    for (auto& x : xs)
      for (double& v : x) v = ux(rng);
    for (auto& t : ts)
      for (double& v : t) v = ut(rng);

    const FusionGradient g = fusion_loss_gradient(net, xs, ts);
    double max_rel = 0.0;
    auto check_param = [&](double* param, double analytic) {
      const double saved = *param;
      *param = saved + step;
      const double up = loss_of(net, xs, ts);
      *param = saved - step;
      const double down = loss_of(net, xs, ts);
      *param = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double rel =
          std::fabs(analytic - numeric) / std::max({std::fabs(analytic), std::fabs(numeric), 1e-6});
      max_rel = std::max(max_rel, rel);
    };
    for (size_t i = 0; i < net.w1.a.size(); ++i) check_param(&net.w1.a[i], g.w1.a[i]);
    for (size_t i = 0; i < net.b1.size(); ++i) check_param(&net.b1[i], g.b1[i]);
    for (size_t i = 0; i < net.w2.a.size(); ++i) check_param(&net.w2.a[i], g.w2.a[i]);
    for (size_t i = 0; i < net.b2.size(); ++i) check_param(&net.b2[i], g.b2[i]);
    CHECK(max_rel < 1e-4);
  }
}

TEST_CASE("training overfits a single pair") {
  FusionConfig config;
  config.epochs = 3000;
  config.seed = 3;
  const std::vector<Vec> xs = {{0.5, -1.0, 2.0, 0.1}};
  const std::vector<Vec> ts = {{0.9, 0.1}};
  const FusionNet net = train_fusion(xs, ts, config);
  CHECK(net.final_loss < 1e-4);
  const Vec y = fusion_forward(net, xs[0]);
  CHECK(std::fabs(y[0] - 0.9) < 0.02);
  CHECK(std::fabs(y[1] - 0.1) < 0.02);
}

TEST_CASE("training beats the constant-predictor baseline on separable data") {
  std::mt19937 rng(13);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  std::vector<Vec> xs;
  std::vector<Vec> ts;
  for (int i = 0; i < 30; ++i) {
    const bool hi = i % 2 == 0;
    xs.push_back({(hi ? 2.0 : -2.0) + u(rng), u(rng)});
    ts.push_back({hi ? 1.0 : 0.0});
  }
  FusionConfig config;
  config.seed = 5;
  const FusionNet net = train_fusion(xs, ts, config);
  CHECK(net.final_loss < 0.25);  // 0.25 = MSE of always predicting 0.5
}

TEST_CASE("training standardizes inputs and masks constant slots") {
  std::vector<Vec> xs;
  std::vector<Vec> ts;
  for (int i = 0; i < 10; ++i) {
    xs.push_back({double(i), 7.0});  // slot 1 has zero variance
    ts.push_back({i < 5 ? 0.0 : 1.0});
  }
  FusionConfig config;
  config.epochs = 200;
  config.seed = 7;
  const FusionNet net = train_fusion(xs, ts, config);
  CHECK(net.slot_masked == std::vector<bool>{false, true});
  CHECK(net.standardize({4.5, 7.0})[0] == doctest::Approx(0.0));
  CHECK(net.standardize({4.5, 123.0})[1] == 0.0);
  CHECK_THROWS_AS(train_fusion({}, {}, config), data_error);
}

TEST_CASE("decide thresholding") {
  const std::vector<int> aus = {1, 2, 4};
  CHECK(decide({0.9, 0.2, 0.7}, aus) == std::set<int>{1, 4});
  CHECK(decide({0.1, 0.2, 0.3}, aus).empty());
  CHECK(decide({0.5, 0.49999, 0.1}, aus) == std::set<int>{1});  // ties fire

  SUBCASE("monotone: raising an output never removes an AU") {
    const std::set<int> before = decide({0.4, 0.6, 0.5}, aus);
    const std::set<int> after = decide({0.7, 0.6, 0.5}, aus);
    for (int au : before) CHECK(after.count(au));
  }
}

TEST_CASE("plan_truncations on a linear ramp") {
  // t=11 linear ramp: intensities 0, 0.1, ..., 1.0.
  const LandmarkTrajectory traj = ramp_trajectory(11);
  const auto copies = plan_truncations(traj, 5);
  REQUIRE(copies.size() == 5);
  const Vec expected = {0.2, 0.4, 0.6, 0.8, 1.0};
  for (size_t j = 0; j < 5; ++j)
    CHECK(copies[j].achieved_intensity == doctest::Approx(expected[j]).epsilon(1e-9));
  CHECK(copies.back().end_frame == 10);  // final copy is the whole sequence
}

TEST_CASE("plan_truncations degenerate cases") {
  const LandmarkTrajectory traj = ramp_trajectory(11);
  const auto one = plan_truncations(traj, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].end_frame == 10);
  CHECK(one[0].achieved_intensity == 1.0);

  // t < n_copies: fewer, distinct end frames. Intensities (0, 0.5, 1) pull
  // the five targets onto frames 0, 1, 1, 2, 2.
  const LandmarkTrajectory tiny = ramp_trajectory(3);
  const auto copies = plan_truncations(tiny, 5);
  REQUIRE(copies.size() == 3);
  CHECK(copies[0].end_frame == 0);
  CHECK(copies[1].end_frame == 1);
  CHECK(copies[2].end_frame == 2);
}
