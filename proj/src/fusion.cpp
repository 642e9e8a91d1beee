#include "aurec/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "aurec/geo.hpp"

namespace aurec {

Vec build_score_vector(const Vec& geo_scores, const Vec& app_scores) {
  if (geo_scores.size() != app_scores.size())
    throw data_error("score vector: AU list mismatch between banks");
  Vec s(geo_scores);
  s.insert(s.end(), app_scores.begin(), app_scores.end());
  for (double v : s)
    if (!std::isfinite(v)) throw numeric_error("score vector: non-finite score");
  return s;
}

Vec FusionNet::standardize(const Vec& raw) const {
  if (int(raw.size()) != inputs) throw data_error("fusion: input dimension mismatch");
  if (input_mean.empty()) return raw;  // training-time nets carry no stats yet
  Vec z(raw.size());
  for (size_t i = 0; i < raw.size(); ++i)
    z[i] = slot_masked[i] ? 0.0 : (raw[i] - input_mean[i]) / input_std[i];
  return z;
}

namespace {

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Vec forward_standardized(const FusionNet& net, const Vec& z, Vec* hidden_out) {
  Vec h(net.hidden);
  for (int j = 0; j < net.hidden; ++j) {
    double s = net.b1[j];
    const double* row = net.w1.row(j);
    for (int i = 0; i < net.inputs; ++i) s += row[i] * z[i];
    h[j] = std::tanh(s);
  }
  Vec y(net.outputs);
  for (int o = 0; o < net.outputs; ++o) {
    double s = net.b2[o];
    const double* row = net.w2.row(o);
    for (int j = 0; j < net.hidden; ++j) s += row[j] * h[j];
    y[o] = logistic(s);
  }
  if (hidden_out) *hidden_out = std::move(h);
  return y;
}

}  // namespace

Vec fusion_forward(const FusionNet& net, const Vec& raw_scores) {
  return forward_standardized(net, net.standardize(raw_scores), nullptr);
}

FusionGradient fusion_loss_gradient(const FusionNet& net, const std::vector<Vec>& inputs,
                                    const std::vector<Vec>& targets) {
  const int n = int(inputs.size());
  if (n == 0) throw data_error("fusion: empty training set");
  if (targets.size() != inputs.size()) throw data_error("fusion: target count mismatch");

  FusionGradient g;
  g.w1 = Mat(net.hidden, net.inputs);
  g.b1.assign(net.hidden, 0.0);
  g.w2 = Mat(net.outputs, net.hidden);
  g.b2.assign(net.outputs, 0.0);

  const double scale = 1.0 / (double(n) * net.outputs);
  for (int s = 0; s < n; ++s) {
    const Vec& z = inputs[s];
    if (int(z.size()) != net.inputs) throw data_error("fusion: input dimension mismatch");
    if (int(targets[s].size()) != net.outputs)
      throw data_error("fusion: target dimension mismatch");
    Vec h;
    const Vec y = forward_standardized(net, z, &h);

    Vec dout(net.outputs);
    for (int o = 0; o < net.outputs; ++o) {
      const double err = y[o] - targets[s][o];
      g.loss += err * err * scale;
      // d(MSE)/d(pre-activation): 2*err*sigma'(a) with sigma' = y(1-y)
      dout[o] = 2.0 * scale * err * y[o] * (1.0 - y[o]);
    }
    Vec dhid(net.hidden, 0.0);
    for (int o = 0; o < net.outputs; ++o) {
      double* gw2 = g.w2.row(o);
      const double* w2 = net.w2.row(o);
      for (int j = 0; j < net.hidden; ++j) {
        gw2[j] += dout[o] * h[j];
        dhid[j] += dout[o] * w2[j];
      }
      g.b2[o] += dout[o];
    }
    for (int j = 0; j < net.hidden; ++j) {
      const double da = dhid[j] * (1.0 - h[j] * h[j]);  // tanh'
      double* gw1 = g.w1.row(j);
      for (int i = 0; i < net.inputs; ++i) gw1[i] += da * z[i];
      g.b1[j] += da;
    }
  }
  return g;
}

FusionNet train_fusion(const std::vector<Vec>& raw_scores, const std::vector<Vec>& targets,
                       const FusionConfig& config) {
  const int n = int(raw_scores.size());
  if (n == 0) throw data_error("fusion: empty training set");
  if (targets.size() != raw_scores.size()) throw data_error("fusion: target count mismatch");
  const int inputs = int(raw_scores[0].size());
  const int outputs = int(targets[0].size());

  FusionNet net;
  net.inputs = inputs;
  net.outputs = outputs;
  net.hidden = config.hidden > 0 ? config.hidden : std::max(8, inputs);
  net.seed = config.seed;

  // Per-slot standardization statistics, frozen before training.
  net.input_mean.assign(inputs, 0.0);
  net.input_std.assign(inputs, 0.0);
  net.slot_masked.assign(inputs, false);
  for (const auto& s : raw_scores) {
    if (int(s.size()) != inputs) throw data_error("fusion: input dimension mismatch");
    for (int i = 0; i < inputs; ++i) net.input_mean[i] += s[i];
  }
  for (double& v : net.input_mean) v /= n;
  for (const auto& s : raw_scores)
    for (int i = 0; i < inputs; ++i) {
      const double diff = s[i] - net.input_mean[i];
      net.input_std[i] += diff * diff;
    }
  for (int i = 0; i < inputs; ++i) {
    net.input_std[i] = std::sqrt(net.input_std[i] / n);
    if (net.input_std[i] <= 0.0) {
      net.slot_masked[i] = true;
      net.input_std[i] = 1.0;
    }
  }

  std::vector<Vec> z(n);
  for (int s = 0; s < n; ++s) z[s] = net.standardize(raw_scores[s]);

  std::mt19937_64 rng(config.seed);
  auto init = [&](Mat& w, Vec& b, int fan_in) {
    std::uniform_real_distribution<double> u(-1.0 / std::sqrt(double(fan_in)),
                                             1.0 / std::sqrt(double(fan_in)));
    for (double& v : w.a) v = u(rng);
    for (double& v : b) v = 0.0;
  };
  net.w1 = Mat(net.hidden, inputs);
  net.b1.assign(net.hidden, 0.0);
  net.w2 = Mat(outputs, net.hidden);
  net.b2.assign(outputs, 0.0);
  init(net.w1, net.b1, inputs);
  init(net.w2, net.b2, net.hidden);

  Mat vw1(net.hidden, inputs), vw2(outputs, net.hidden);
  Vec vb1(net.hidden, 0.0), vb2(outputs, 0.0);

  FusionNet best = net;
  double best_loss = std::numeric_limits<double>::infinity();
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const FusionGradient g = fusion_loss_gradient(net, z, targets);
    if (g.loss < best_loss) {
      best_loss = g.loss;
      best.w1 = net.w1;
      best.b1 = net.b1;
      best.w2 = net.w2;
      best.b2 = net.b2;
    }
    auto step = [&](Mat& w, Mat& vel, const Mat& grad) {
      for (size_t i = 0; i < w.a.size(); ++i) {
        vel.a[i] = config.momentum * vel.a[i] - config.learning_rate * grad.a[i];
        w.a[i] += vel.a[i];
      }
    };
    auto step_vec = [&](Vec& b, Vec& vel, const Vec& grad) {
      for (size_t i = 0; i < b.size(); ++i) {
        vel[i] = config.momentum * vel[i] - config.learning_rate * grad[i];
        b[i] += vel[i];
      }
    };
    step(net.w1, vw1, g.w1);
    step_vec(net.b1, vb1, g.b1);
    step(net.w2, vw2, g.w2);
    step_vec(net.b2, vb2, g.b2);
  }
  // Final evaluation so the last epoch can still win the snapshot.
  const FusionGradient g = fusion_loss_gradient(net, z, targets);
  if (g.loss < best_loss) {
    best_loss = g.loss;
    best.w1 = net.w1;
    best.b1 = net.b1;
    best.w2 = net.w2;
    best.b2 = net.b2;
  }
  best.final_loss = best_loss;
  return best;
}

std::set<int> decide(const Vec& outputs, const std::vector<int>& au_list, double threshold) {
  if (outputs.size() != au_list.size()) throw data_error("decide: AU list size mismatch");
  std::set<int> result;
  for (size_t i = 0; i < outputs.size(); ++i)
    if (outputs[i] >= threshold) result.insert(au_list[i]);
  return result;
}

std::vector<TruncationCopy> plan_truncations(const LandmarkTrajectory& traj, int n_copies) {
  if (n_copies < 1) throw data_error("plan_truncations: need at least 1 copy");
  const int t = traj.frame_count();
  Vec profile(t);
  for (int f = 0; f < t; ++f) profile[f] = intensity(traj, f);

  std::vector<TruncationCopy> copies;
  for (int j = 1; j <= n_copies; ++j) {
    int end = t - 1;  // the final copy is the full sequence
    if (j < n_copies) {
      const double target = double(j) / n_copies;
      double best = std::numeric_limits<double>::infinity();
      for (int f = 0; f < t; ++f) {
        const double diff = std::fabs(profile[f] - target);
        if (diff < best) {  // ascending scan keeps the earlier frame on ties
          best = diff;
          end = f;
        }
      }
    }
    const bool already = std::any_of(copies.begin(), copies.end(),
                                     [&](const TruncationCopy& c) { return c.end_frame == end; });
    if (already) continue;
    copies.push_back(TruncationCopy{end, profile[end]});
  }
  return copies;
}

}  // namespace aurec
