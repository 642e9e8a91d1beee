#pragma once

#include <cstdint>

#include "aurec/geo.hpp"

namespace aurec {

// Diagonal-covariance Gaussian mixture; at most 3 components here.
struct Gmm {
  struct Component {
    double weight = 0.0;
    Vec mean;
    Vec variance;  // per-dimension, floored
  };
  std::vector<Component> components;

  int dim() const { return components.empty() ? 0 : int(components[0].mean.size()); }
};

inline constexpr double kVarianceFloor = 1e-6;

// ML fit by EM with k-means++ initialization. Components fall back to the
// number of distinct samples when there are fewer than requested (min 1).
// Convergence: total log-likelihood gain < 1e-8 or 200 iterations.
// ll_trace, when given, receives the per-iteration training log-likelihood.
Gmm fit_gmm(const std::vector<Vec>& samples, int n_components, std::uint64_t seed,
            Vec* ll_trace = nullptr);

double gmm_log_density(const Gmm& gmm, const Vec& x);

enum class BankTag { geometric, appearance };
std::string bank_name(BankTag tag);
BankTag parse_bank(const std::string& s);

// Left-to-right HMM for one single AU. Transitions are structural, not
// estimated: nonfinal states split 1/2 between self and advance; the final
// state self-loops; the chain starts in state 1.
struct AuHmm {
  int au = 0;
  BankTag bank = BankTag::geometric;
  int n_states = 3;
  std::vector<Gmm> state_gmms;
  Mat transitions;  // row j: P(.|j)
  Vec initial;

  static Mat canonical_transitions(int n_states);
  static Vec canonical_initial(int n_states);
};

// state(f) = bucket_state(intensity(f)); one entry per frame, 0-based.
std::vector<int> assign_states(const LandmarkTrajectory& traj, const StateBucketing& bucketing);

// Builds the model from per-state pools of already-transformed feature
// vectors. GMM seeds are derived per state from `seed`.
AuHmm train_au_hmm(int au, BankTag bank, const std::vector<std::vector<Vec>>& samples_by_state,
                   int gmm_components, std::uint64_t seed);

// features[f][j] is the frame-f observation under state j's transform.
// One list per frame, n_states entries each.
using StateFeatureSequence = std::vector<std::vector<Vec>>;

// Log of the max-path joint probability: the observations enter through the
// state-specific GMM densities, the path through the structural transitions.
// Evaluated fully in the log domain.
double viterbi_log_score(const StateFeatureSequence& features, const AuHmm& model);

// Same, also recovering the argmax state path (0-based states).
double viterbi_log_score(const StateFeatureSequence& features, const AuHmm& model,
                         std::vector<int>* path);

}  // namespace aurec
