#include "aurec/geo.hpp"

#include <cmath>

namespace aurec {

StateBucketing make_bucketing(int n_states) {
  StateBucketing b;
  b.n_states = n_states;
  if (n_states == 3) {
    b.boundaries = {0.33, 0.66};
  } else if (n_states == 5) {
    b.boundaries = {0.2, 0.4, 0.6, 0.8};
  } else {
    throw data_error("state count must be 3 or 5");
  }
  return b;
}

int bucket_state(double v, const StateBucketing& bucketing) {
  if (v < 0.0) throw data_error("bucket_state: negative intensity");
  const int n = bucketing.n_states;
  const int middle = n / 2;  // 0-based middle cell
  for (int j = 0; j + 1 < n; ++j) {
    const double edge = bucketing.boundaries[j];
    // Middle cell keeps its upper edge (0.33 <= v <= 0.66 in the 3-state case).
    if (j == middle ? (v <= edge) : (v < edge)) return j;
  }
  return n - 1;
}

double intensity(const LandmarkTrajectory& traj, int frame_index) {
  const int t = traj.frame_count();
  if (frame_index < 0 || frame_index >= t) throw data_error("intensity: frame index out of range");
  auto sum_distances = [&](int f) {
    double s = 0.0;
    for (int i = 0; i < traj.point_count(); ++i)
      s += std::hypot(traj.points[f][i].position.x - traj.points[0][i].position.x,
                      traj.points[f][i].position.y - traj.points[0][i].position.y);
    return s;
  };
  const double apex = sum_distances(t - 1);
  if (apex <= 0.0) throw numeric_error("static sequence: no landmark motion at apex");
  if (frame_index == 0) return 0.0;
  if (frame_index == t - 1) return 1.0;
  return sum_distances(frame_index) / apex;
}

std::vector<Vec> displacement_features(const LandmarkTrajectory& traj) {
  const int t = traj.frame_count();
  const int p = traj.point_count();
  std::vector<Vec> features(t, Vec(size_t(2) * p, 0.0));
  for (int f = 1; f < t; ++f) {
    for (int i = 0; i < p; ++i) {
      features[f][2 * i] = traj.points[f][i].position.x - traj.points[0][i].position.x;
      features[f][2 * i + 1] = traj.points[f][i].position.y - traj.points[0][i].position.y;
    }
  }
  return features;
}

GeoFeatureSpace fit_geo_space(const std::vector<std::vector<Vec>>& features_by_state,
                              const StateBucketing& bucketing, int k) {
  if (int(features_by_state.size()) != bucketing.n_states)
    throw data_error("fit_geo_space: state group count mismatch");
  if (k < 6 || k > 10) throw data_error("fit_geo_space: k must be in [6,10]");
  GeoFeatureSpace space;
  space.bucketing = bucketing;
  for (int j = 0; j < bucketing.n_states; ++j) {
    if (features_by_state[j].empty())
      throw data_error("state " + std::to_string(j + 1) + " has no training frames");
    space.per_state_basis.push_back(pca_fit(features_by_state[j], k));
  }
  return space;
}

Vec geo_features(const GeoFeatureSpace& space, const Vec& displacement, int state) {
  if (state < 0 || state >= space.state_count())
    throw data_error("geo_features: state out of range");
  return pca_project(space.per_state_basis[state], displacement);
}

}  // namespace aurec
