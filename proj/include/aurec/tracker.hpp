#pragma once

#include "aurec/dataset.hpp"

namespace aurec {

struct TrackParams {
  int window_half = 5;        // 11x11 window
  int pyramid_levels = 3;
  int max_iterations = 20;
  double epsilon = 0.01;      // stop when the update is below this (pixels)
  double min_eig_factor = 1e-4;  // times window area

  double min_eigenvalue() const {
    const int side = 2 * window_half + 1;
    return min_eig_factor * side * side;
  }
};

struct TrackedPoint {
  Point position;
  bool valid = false;
  double residual = 0.0;  // mean squared window difference at convergence
};

struct Pyramid {
  std::vector<Frame> levels;  // level 0 is the input frame
};

// Level k+1 is level k blurred with [1/4,1/2,1/4] in both axes and
// decimated by 2.
Pyramid build_pyramid(const Frame& frame, int levels);

// Coarse-to-fine iterative LK for a single point between two pyramids.
// Failure (weak texture, point leaving the frame) gives valid=false.
TrackedPoint track_point(const Pyramid& prev, const Pyramid& next, Point point,
                         const TrackParams& params);

struct LandmarkTrajectory {
  // points[f][p]; frame 0 row equals the initial landmarks exactly.
  std::vector<std::vector<TrackedPoint>> points;
  // reconstructed[f][p]: point was filled in by the affine fit, not tracked.
  std::vector<std::vector<bool>> reconstructed;
  int source_rows = 0;
  int source_cols = 0;

  int frame_count() const { return int(points.size()); }
  int point_count() const { return points.empty() ? 0 : int(points[0].size()); }
};

// Frame-to-frame chained tracking of the sequence's landmarks. Points lost
// in a frame are reconstructed by the least-squares affine transform fitted
// from the points valid in both that frame and the previous one.
LandmarkTrajectory track_grid(const ImageSequence& seq, const TrackParams& params = {});

// One line per (frame, point): "f p x y valid reconstructed".
std::string serialize_trajectory(const LandmarkTrajectory& traj);

}  // namespace aurec
