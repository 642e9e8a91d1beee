#include "aurec/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace aurec {

namespace {

Frame blur_121(const Frame& in) {
  const int rows = in.rows, cols = in.cols;
  Frame tmp(rows, cols), out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int cl = std::max(0, c - 1), cr = std::min(cols - 1, c + 1);
      tmp(r, c) = 0.25 * in(r, cl) + 0.5 * in(r, c) + 0.25 * in(r, cr);
    }
  }
  for (int r = 0; r < rows; ++r) {
    const int rl = std::max(0, r - 1), rr = std::min(rows - 1, r + 1);
    for (int c = 0; c < cols; ++c)
      out(r, c) = 0.25 * tmp(rl, c) + 0.5 * tmp(r, c) + 0.25 * tmp(rr, c);
  }
  return out;
}

Frame decimate2(const Frame& in) {
  Frame out((in.rows + 1) / 2, (in.cols + 1) / 2);
  for (int r = 0; r < out.rows; ++r)
    for (int c = 0; c < out.cols; ++c) out(r, c) = in(2 * r, 2 * c);
  return out;
}

}  // namespace

Pyramid build_pyramid(const Frame& frame, int levels) {
  if (levels < 1) throw data_error("build_pyramid: levels must be >= 1");
  if (frame.rows < 1 || frame.cols < 1) throw data_error("build_pyramid: empty frame");
  Pyramid pyr;
  pyr.levels.push_back(frame);
  for (int k = 1; k < levels; ++k) {
    const Frame& prev = pyr.levels.back();
    if ((prev.rows + 1) / 2 < 2 || (prev.cols + 1) / 2 < 2)
      throw data_error("build_pyramid: frame too small for " + std::to_string(levels) + " levels");
    pyr.levels.push_back(decimate2(blur_121(prev)));
  }
  return pyr;
}

TrackedPoint track_point(const Pyramid& prev, const Pyramid& next, Point point,
                         const TrackParams& params) {
  TrackedPoint result;
  result.position = point;
  if (prev.levels.size() != next.levels.size() || prev.levels.empty())
    throw data_error("track_point: mismatched pyramids");
  const int levels = int(prev.levels.size());
  const int h = params.window_half;

  double gx = 0.0, gy = 0.0;  // flow estimate carried across levels
  bool texture_ok = true;

  for (int level = levels - 1; level >= 0; --level) {
    const Frame& a = prev.levels[level];
    const Frame& b = next.levels[level];
    const double scale = double(1 << level);
    const double px = point.x / scale;
    const double py = point.y / scale;

    // Spatial gradients of the previous image over the window (central
    // differences on the level image, clamp-to-edge sampling).
    const int side = 2 * h + 1;
    std::vector<double> ix(size_t(side) * side), iy(size_t(side) * side),
        iv(size_t(side) * side);
    double gxx = 0.0, gxy = 0.0, gyy = 0.0;
    for (int wr = -h; wr <= h; ++wr) {
      for (int wc = -h; wc <= h; ++wc) {
        const double sx = px + wc;
        const double sy = py + wr;
        const double dx = 0.5 * (bilinear_sample(a, sx + 1, sy) - bilinear_sample(a, sx - 1, sy));
        const double dy = 0.5 * (bilinear_sample(a, sx, sy + 1) - bilinear_sample(a, sx, sy - 1));
        const size_t idx = size_t(wr + h) * side + (wc + h);
        ix[idx] = dx;
        iy[idx] = dy;
        iv[idx] = bilinear_sample(a, sx, sy);
        gxx += dx * dx;
        gxy += dx * dy;
        gyy += dy * dy;
      }
    }
    const double trace = gxx + gyy;
    const double det_term = std::sqrt(std::max(0.0, (gxx - gyy) * (gxx - gyy) + 4.0 * gxy * gxy));
    const double min_eig = 0.5 * (trace - det_term);
    if (min_eig < params.min_eigenvalue()) {
      texture_ok = false;
      break;
    }
    const double det = gxx * gyy - gxy * gxy;

    for (int iter = 0; iter < params.max_iterations; ++iter) {
      double bx = 0.0, by = 0.0;
      double ssd = 0.0;
      for (int wr = -h; wr <= h; ++wr) {
        for (int wc = -h; wc <= h; ++wc) {
          const size_t idx = size_t(wr + h) * side + (wc + h);
          const double diff =
              iv[idx] - bilinear_sample(b, px + gx + wc, py + gy + wr);
          bx += diff * ix[idx];
          by += diff * iy[idx];
          ssd += diff * diff;
        }
      }
      result.residual = ssd / (double(side) * side);
      const double ux = (gyy * bx - gxy * by) / det;
      const double uy = (gxx * by - gxy * bx) / det;
      gx += ux;
      gy += uy;
      if (std::hypot(ux, uy) < params.epsilon) break;
    }
    if (level > 0) {
      gx *= 2.0;
      gy *= 2.0;
    }
  }

  result.position = Point{point.x + gx, point.y + gy};
  const Frame& full = next.levels[0];
  const bool inside = result.position.x >= 0.0 && result.position.x <= full.cols - 1 &&
                      result.position.y >= 0.0 && result.position.y <= full.rows - 1;
  result.valid = texture_ok && inside;
  return result;
}

namespace {

// Least-squares affine transform mapping src -> dst; needs >= 3
// non-collinear points. Returns false when the normal equations are singular.
bool fit_affine(const std::vector<Point>& src, const std::vector<Point>& dst,
                double coef[6]) {
  const int n = int(src.size());
  if (n < 3) return false;
  // Normal equations for [a b c; d e f] acting on (x, y, 1).
  double m[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
  double rx[3] = {0, 0, 0}, ry[3] = {0, 0, 0};
  for (int i = 0; i < n; ++i) {
    const double v[3] = {src[i].x, src[i].y, 1.0};
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) m[r][c] += v[r] * v[c];
      rx[r] += v[r] * dst[i].x;
      ry[r] += v[r] * dst[i].y;
    }
  }
  // Gaussian elimination with partial pivoting on the 3x3 system.
  double aug[3][5];
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) aug[r][c] = m[r][c];
    aug[r][3] = rx[r];
    aug[r][4] = ry[r];
  }
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::fabs(aug[r][col]) > std::fabs(aug[pivot][col])) pivot = r;
    if (std::fabs(aug[pivot][col]) < 1e-12) return false;
    if (pivot != col)
      for (int c = 0; c < 5; ++c) std::swap(aug[pivot][c], aug[col][c]);
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const double f = aug[r][col] / aug[col][col];
      for (int c = col; c < 5; ++c) aug[r][c] -= f * aug[col][c];
    }
  }
  for (int r = 0; r < 3; ++r) {
    coef[r] = aug[r][3] / aug[r][r];
    coef[3 + r] = aug[r][4] / aug[r][r];
  }
  return true;
}

}  // namespace

LandmarkTrajectory track_grid(const ImageSequence& seq, const TrackParams& params) {
  const int t = seq.frame_count();
  const int p = int(seq.initial_landmarks.size());
  if (t < 2) throw data_error("track_grid: sequence too short");
  if (p < 3) throw data_error("track_grid: need at least 3 landmarks");

  LandmarkTrajectory traj;
  traj.source_rows = seq.frames[0].rows;
  traj.source_cols = seq.frames[0].cols;
  traj.points.resize(t, std::vector<TrackedPoint>(p));
  traj.reconstructed.resize(t, std::vector<bool>(p, false));
  for (int i = 0; i < p; ++i) {
    traj.points[0][i].position = seq.initial_landmarks[i];
    traj.points[0][i].valid = true;
  }

  Pyramid prev = build_pyramid(seq.frames[0], params.pyramid_levels);
  for (int f = 1; f < t; ++f) {
    Pyramid next = build_pyramid(seq.frames[f], params.pyramid_levels);
    std::vector<Point> fit_src, fit_dst;
    for (int i = 0; i < p; ++i) {
      const TrackedPoint& prev_pt = traj.points[f - 1][i];
      TrackedPoint tracked = track_point(prev, next, prev_pt.position, params);
      traj.points[f][i] = tracked;
      if (tracked.valid) {
        fit_src.push_back(prev_pt.position);
        fit_dst.push_back(tracked.position);
      }
    }
    if (int(fit_src.size()) < 3)
      throw numeric_error("tracking lost at frame " + std::to_string(f + 1) +
                          " (fewer than 3 valid points)");
    double coef[6];
    const bool have_affine = fit_affine(fit_src, fit_dst, coef);
    for (int i = 0; i < p; ++i) {
      if (traj.points[f][i].valid) continue;
      if (!have_affine)
        throw numeric_error("tracking lost at frame " + std::to_string(f + 1) +
                            " (degenerate affine fit)");
      const Point s = traj.points[f - 1][i].position;
      traj.points[f][i].position =
          Point{coef[0] * s.x + coef[1] * s.y + coef[2], coef[3] * s.x + coef[4] * s.y + coef[5]};
      traj.points[f][i].valid = true;
      traj.points[f][i].residual = std::numeric_limits<double>::infinity();
      traj.reconstructed[f][i] = true;
    }
    prev = std::move(next);
  }
  return traj;
}

std::string serialize_trajectory(const LandmarkTrajectory& traj) {
  std::string out;
  for (int f = 0; f < traj.frame_count(); ++f) {
    for (int i = 0; i < traj.point_count(); ++i) {
      const TrackedPoint& pt = traj.points[f][i];
      out += std::to_string(f + 1) + " " + std::to_string(i + 1) + " " +
             format_double(pt.position.x) + " " + format_double(pt.position.y) + " " +
             (pt.valid ? "1" : "0") + " " + (traj.reconstructed[f][i] ? "1" : "0") + "\n";
    }
  }
  return out;
}

}  // namespace aurec
