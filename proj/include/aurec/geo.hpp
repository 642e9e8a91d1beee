#pragma once

#include "aurec/reduction.hpp"
#include "aurec/tracker.hpp"

namespace aurec {

// Intensity cut points dividing a sequence into expression states.
// For 3 states the cells are [0,0.33), [0.33,0.66], (0.66,inf); the 5-state
// variant uses uniform boundaries (0.2,0.4,0.6,0.8) with the same pattern
// around the middle cell.
struct StateBucketing {
  int n_states = 3;
  Vec boundaries;
};

StateBucketing make_bucketing(int n_states);

// 0-based state index for intensity v; values past the last boundary clamp
// to the final state.
int bucket_state(double v, const StateBucketing& bucketing);

// Ratio of summed landmark displacements at frame f to those at the last
// frame, both relative to frame 1 (0-based frame_index).
double intensity(const LandmarkTrajectory& traj, int frame_index);

// Per-frame vector of (dx, dy) per point relative to frame 1, x before y
// within each point, point order fixed. Entry 0 is exactly zero.
std::vector<Vec> displacement_features(const LandmarkTrajectory& traj);

struct GeoFeatureSpace {
  StateBucketing bucketing;
  std::vector<PcaBasis> per_state_basis;  // one per state, equal k

  int state_count() const { return int(per_state_basis.size()); }
  int feature_dim() const { return per_state_basis.empty() ? 0 : per_state_basis[0].output_dim(); }
};

// One PCA basis per state over that state's displacement features.
GeoFeatureSpace fit_geo_space(const std::vector<std::vector<Vec>>& features_by_state,
                              const StateBucketing& bucketing, int k);

Vec geo_features(const GeoFeatureSpace& space, const Vec& displacement, int state);

}  // namespace aurec
