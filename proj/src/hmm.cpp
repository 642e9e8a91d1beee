#include "aurec/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace aurec {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const Vec& v) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

double component_log_density(const Gmm::Component& comp, const Vec& x) {
  const int d = int(comp.mean.size());
  double quad = 0.0, logdet = 0.0;
  for (int i = 0; i < d; ++i) {
    const double diff = x[i] - comp.mean[i];
    quad += diff * diff / comp.variance[i];
    logdet += std::log(comp.variance[i]);
  }
  return -0.5 * (quad + logdet + d * std::log(2.0 * std::numbers::pi));
}

}  // namespace

double gmm_log_density(const Gmm& gmm, const Vec& x) {
  Vec terms;
  terms.reserve(gmm.components.size());
  for (const auto& comp : gmm.components) {
    if (int(x.size()) != int(comp.mean.size()))
      throw numeric_error("gmm_log_density: dimension mismatch");
    terms.push_back(std::log(comp.weight) + component_log_density(comp, x));
  }
  return log_sum_exp(terms);
}

Gmm fit_gmm(const std::vector<Vec>& samples, int n_components, std::uint64_t seed,
            Vec* ll_trace) {
  const int n = int(samples.size());
  if (n == 0) throw data_error("fit_gmm: empty sample set");
  if (n_components < 1) throw data_error("fit_gmm: need at least 1 component");
  const int d = int(samples[0].size());
  for (const auto& s : samples)
    if (int(s.size()) != d) throw data_error("fit_gmm: inconsistent sample dimensions");

  // Fall back to the number of distinct samples when below n_components.
  std::vector<Vec> distinct(samples);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  const int m = std::max(1, std::min<int>(n_components, int(distinct.size())));

  std::mt19937_64 rng(seed);

  // k-means++ seeding of the component means.
  std::vector<Vec> centers;
  {
    std::uniform_int_distribution<int> pick(0, n - 1);
    centers.push_back(samples[pick(rng)]);
    Vec dist2(n);
    while (int(centers.size()) < m) {
      double total = 0.0;
      for (int i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& c : centers) {
          double s = 0.0;
          for (int j = 0; j < d; ++j) {
            const double diff = samples[i][j] - c[j];
            s += diff * diff;
          }
          best = std::min(best, s);
        }
        dist2[i] = best;
        total += best;
      }
      if (total <= 0.0) {
        // All remaining mass sits on existing centers; duplicate arbitrarily.
        centers.push_back(samples[0]);
        continue;
      }
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng);
      int chosen = n - 1;
      for (int i = 0; i < n; ++i) {
        r -= dist2[i];
        if (r <= 0.0) {
          chosen = i;
          break;
        }
      }
      centers.push_back(samples[chosen]);
    }
  }

  // Shared per-dimension sample variance as the starting spread.
  Vec global_mean(d, 0.0), global_var(d, 0.0);
  for (const auto& s : samples)
    for (int j = 0; j < d; ++j) global_mean[j] += s[j];
  for (double& v : global_mean) v /= n;
  for (const auto& s : samples)
    for (int j = 0; j < d; ++j) {
      const double diff = s[j] - global_mean[j];
      global_var[j] += diff * diff;
    }
  for (double& v : global_var) v = std::max(kVarianceFloor, v / n);

  Gmm gmm;
  for (int c = 0; c < m; ++c) {
    Gmm::Component comp;
    comp.weight = 1.0 / m;
    comp.mean = centers[c];
    comp.variance = global_var;
    gmm.components.push_back(std::move(comp));
  }

  Mat resp(n, m);
  double prev_ll = kNegInf;
  for (int iter = 0; iter < 200; ++iter) {
    // E-step in the log domain.
    double ll = 0.0;
    for (int i = 0; i < n; ++i) {
      Vec terms(m);
      for (int c = 0; c < m; ++c)
        terms[c] = std::log(gmm.components[c].weight) +
                   component_log_density(gmm.components[c], samples[i]);
      const double norm = log_sum_exp(terms);
      ll += norm;
      for (int c = 0; c < m; ++c) resp(i, c) = std::exp(terms[c] - norm);
    }
    if (ll_trace) ll_trace->push_back(ll);

    // M-step.
    for (int c = 0; c < m; ++c) {
      double nk = 0.0;
      for (int i = 0; i < n; ++i) nk += resp(i, c);
      auto& comp = gmm.components[c];
      comp.weight = std::max(nk / n, 1e-12);
      if (nk <= 1e-12) continue;  // collapsed component keeps its parameters
      for (int j = 0; j < d; ++j) {
        double mean = 0.0;
        for (int i = 0; i < n; ++i) mean += resp(i, c) * samples[i][j];
        mean /= nk;
        double var = 0.0;
        for (int i = 0; i < n; ++i) {
          const double diff = samples[i][j] - mean;
          var += resp(i, c) * diff * diff;
        }
        comp.mean[j] = mean;
        comp.variance[j] = std::max(kVarianceFloor, var / nk);
      }
    }
    double wsum = 0.0;
    for (const auto& comp : gmm.components) wsum += comp.weight;
    for (auto& comp : gmm.components) comp.weight /= wsum;

    if (iter > 0 && ll - prev_ll < 1e-8) break;
    prev_ll = ll;
  }
  return gmm;
}

std::string bank_name(BankTag tag) {
  return tag == BankTag::geometric ? "geometric" : "appearance";
}

BankTag parse_bank(const std::string& s) {
  if (s == "geometric") return BankTag::geometric;
  if (s == "appearance") return BankTag::appearance;
  throw data_error("unknown bank tag '" + s + "'");
}

Mat AuHmm::canonical_transitions(int n_states) {
  Mat p(n_states, n_states);
  for (int j = 0; j < n_states - 1; ++j) {
    p(j, j) = 0.5;
    p(j, j + 1) = 0.5;
  }
  p(n_states - 1, n_states - 1) = 1.0;
  return p;
}

Vec AuHmm::canonical_initial(int n_states) {
  Vec p(n_states, 0.0);
  p[0] = 1.0;
  return p;
}

std::vector<int> assign_states(const LandmarkTrajectory& traj, const StateBucketing& bucketing) {
  std::vector<int> states(traj.frame_count());
  for (int f = 0; f < traj.frame_count(); ++f)
    states[f] = bucket_state(intensity(traj, f), bucketing);
  return states;
}

AuHmm train_au_hmm(int au, BankTag bank, const std::vector<std::vector<Vec>>& samples_by_state,
                   int gmm_components, std::uint64_t seed) {
  AuHmm model;
  model.au = au;
  model.bank = bank;
  model.n_states = int(samples_by_state.size());
  if (model.n_states < 1) throw data_error("train_au_hmm: no states");
  for (int j = 0; j < model.n_states; ++j) {
    if (samples_by_state[j].empty())
      throw data_error("AU " + std::to_string(au) + " (" + bank_name(bank) + "): state " +
                       std::to_string(j + 1) + " has no training frames");
    model.state_gmms.push_back(
        fit_gmm(samples_by_state[j], gmm_components, mix_seed(seed, std::uint64_t(j))));
  }
  model.transitions = AuHmm::canonical_transitions(model.n_states);
  model.initial = AuHmm::canonical_initial(model.n_states);
  return model;
}

double viterbi_log_score(const StateFeatureSequence& features, const AuHmm& model) {
  return viterbi_log_score(features, model, nullptr);
}

double viterbi_log_score(const StateFeatureSequence& features, const AuHmm& model,
                         std::vector<int>* path) {
  const int t = int(features.size());
  if (t < 1) throw data_error("viterbi_log_score: empty sequence");
  const int n = model.n_states;
  const double log_half = std::log(0.5);

  auto emission = [&](int f, int j) {
    if (int(features[f].size()) != n)
      throw data_error("viterbi_log_score: per-state feature count mismatch");
    return gmm_log_density(model.state_gmms[j], features[f][j]);
  };

  // delta[j]: best log-prob of any path ending in state j at the current
  // frame. The chain starts in state 1 with probability one.
  Vec delta(n, kNegInf);
  Mat arg(t, n);
  delta[0] = emission(0, 0);
  for (int f = 1; f < t; ++f) {
    Vec next(n, kNegInf);
    for (int j = 0; j < n; ++j) {
      // Predecessors under the left-to-right structure: j itself and j-1.
      double best = kNegInf;
      int best_i = j;
      const double self_log = (j == n - 1) ? 0.0 : log_half;
      if (delta[j] != kNegInf) {
        best = delta[j] + self_log;
        best_i = j;
      }
      if (j > 0 && delta[j - 1] != kNegInf) {
        const double cand = delta[j - 1] + log_half;
        if (cand > best) {
          best = cand;
          best_i = j - 1;
        }
      }
      if (best != kNegInf) next[j] = best + emission(f, j);
      arg(f, j) = best_i;
    }
    delta = std::move(next);
  }

  int final_state = 0;
  double score = delta[0];
  for (int j = 1; j < n; ++j)
    if (delta[j] > score) {
      score = delta[j];
      final_state = j;
    }

  if (path) {
    path->assign(t, 0);
    (*path)[t - 1] = final_state;
    for (int f = t - 1; f > 0; --f) (*path)[f - 1] = int(arg(f, (*path)[f]));
  }
  return score;
}

}  // namespace aurec
