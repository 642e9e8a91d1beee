#pragma once

#include <cstdint>
#include <set>

#include "aurec/tracker.hpp"

namespace aurec {

// 2M per-frame-normalized Viterbi log-scores: geometric bank first, then
// appearance, AU order fixed by the registered list.
Vec build_score_vector(const Vec& geo_scores, const Vec& app_scores);

struct FusionConfig {
  int hidden = 0;  // 0: max(8, 2M)
  double learning_rate = 0.05;
  double momentum = 0.9;
  int epochs = 2000;
  std::uint64_t seed = 1;
};

// One hidden layer, tanh units, logistic outputs, trained with full-batch
// gradient descent plus momentum on mean squared error. Inputs are
// standardized per slot with statistics frozen at training time; zero-variance
// slots are masked to 0.
struct FusionNet {
  int inputs = 0;
  int hidden = 0;
  int outputs = 0;
  Mat w1;  // hidden x inputs
  Vec b1;
  Mat w2;  // outputs x hidden
  Vec b2;
  Vec input_mean;
  Vec input_std;
  std::vector<bool> slot_masked;
  double final_loss = 0.0;
  std::uint64_t seed = 0;

  Vec standardize(const Vec& raw) const;
};

Vec fusion_forward(const FusionNet& net, const Vec& raw_scores);

// MSE over all (sample, output) pairs; used by training and the gradient
// checks.
struct FusionGradient {
  Mat w1;
  Vec b1;
  Mat w2;
  Vec b2;
  double loss = 0.0;
};
FusionGradient fusion_loss_gradient(const FusionNet& net, const std::vector<Vec>& inputs,
                                    const std::vector<Vec>& targets);

// Returns the best-loss epoch snapshot (a fixed step size does not make the
// loss monotone).
FusionNet train_fusion(const std::vector<Vec>& raw_scores, const std::vector<Vec>& targets,
                       const FusionConfig& config);

// AU s fires iff output_s >= threshold; ties fire.
std::set<int> decide(const Vec& outputs, const std::vector<int>& au_list,
                     double threshold = 0.5);

struct TruncationCopy {
  int end_frame = 0;           // 0-based inclusive; prefix is frames [0, end_frame]
  double achieved_intensity = 0.0;
};

// Truncation augmentation: copy j (1..n_copies) ends at the frame whose
// intensity is nearest j/n_copies (ties to the earlier frame); the final
// copy is always the whole sequence. Coinciding end frames collapse, so
// short sequences yield fewer copies.
std::vector<TruncationCopy> plan_truncations(const LandmarkTrajectory& traj, int n_copies);

}  // namespace aurec
