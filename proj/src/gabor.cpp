#include "aurec/gabor.hpp"

#include <cmath>
#include <numbers>

namespace aurec {

GaborKernel make_gabor_kernel(int scale, int orientation, const GaborParams& params) {
  if (params.scales < 1 || params.orientations < 1)
    throw data_error("gabor bank: scales and orientations must be positive");
  GaborKernel k;
  k.scale = scale;
  k.orientation = orientation;
  k.wavelength = params.wavelength_base * std::pow(params.wavelength_ratio, scale);
  k.sigma = params.sigma_factor * k.wavelength;
  k.theta = orientation * std::numbers::pi / params.orientations;
  k.half = std::max(1, int(std::ceil(3.0 * k.sigma)));

  const int side = k.side();
  const double fx = std::cos(k.theta) * 2.0 * std::numbers::pi / k.wavelength;
  const double fy = std::sin(k.theta) * 2.0 * std::numbers::pi / k.wavelength;
  const double inv2s2 = 1.0 / (2.0 * k.sigma * k.sigma);

  // Isotropic envelope (aspect 1): both the Gaussian and the plane-wave
  // carrier factor along the axes.
  k.col_real.resize(side);
  k.col_imag.resize(side);
  k.row_real.resize(side);
  k.row_imag.resize(side);
  for (int i = -k.half; i <= k.half; ++i) {
    const double env = std::exp(-double(i) * i * inv2s2);
    k.col_real[i + k.half] = env * std::cos(fy * i);
    k.col_imag[i + k.half] = env * std::sin(fy * i);
    k.row_real[i + k.half] = env * std::cos(fx * i);
    k.row_imag[i + k.half] = env * std::sin(fx * i);
  }

  k.real.resize(size_t(side) * side);
  k.imag.resize(size_t(side) * side);
  double sum_re = 0.0, sum_im = 0.0;
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      // (cr + i ci) * (rr + i ri)
      const double re = k.col_real[r] * k.row_real[c] - k.col_imag[r] * k.row_imag[c];
      const double im = k.col_real[r] * k.row_imag[c] + k.col_imag[r] * k.row_real[c];
      k.real[size_t(r) * side + c] = re;
      k.imag[size_t(r) * side + c] = im;
      sum_re += re;
      sum_im += im;
    }
  }
  k.dc_real = sum_re / (double(side) * side);
  k.dc_imag = sum_im / (double(side) * side);
  for (size_t i = 0; i < k.real.size(); ++i) {
    k.real[i] -= k.dc_real;
    k.imag[i] -= k.dc_imag;
  }
  return k;
}

std::vector<GaborKernel> make_gabor_bank(const GaborParams& params) {
  if (params.scales < 1 || params.orientations < 1)
    throw data_error("gabor bank: scales and orientations must be positive");
  std::vector<GaborKernel> bank;
  bank.reserve(size_t(params.scales) * params.orientations);
  for (int s = 0; s < params.scales; ++s)
    for (int o = 0; o < params.orientations; ++o)
      bank.push_back(make_gabor_kernel(s, o, params));
  return bank;
}

namespace {

// Mirror index without repeating the edge sample (reflect-101).
inline int mirror(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

}  // namespace

Mat gabor_response(const Frame& frame, const GaborKernel& kernel) {
  const int rows = frame.rows, cols = frame.cols;
  const int h = kernel.half;
  const int side = kernel.side();
  if (rows < side || cols < side)
    throw data_error("gabor_response: frame smaller than kernel support");

  // Reflect-pad once, then run the separable complex passes. The DC
  // correction term is a constant kernel, i.e. a box sum, also separable:
  //   response = conv(f, col ⊗ row) - dc * boxsum(f).
  const int prows = rows + 2 * h, pcols = cols + 2 * h;
  Mat padded(prows, pcols);
  for (int r = 0; r < prows; ++r) {
    const int sr = mirror(r - h, rows);
    for (int c = 0; c < pcols; ++c) padded(r, c) = frame(sr, mirror(c - h, cols));
  }

  // Horizontal pass: complex row filter + running box sum over x.
  Mat hr(prows, cols), hi(prows, cols), hbox(prows, cols);
  for (int r = 0; r < prows; ++r) {
    const double* src = padded.row(r);
    double* dr = hr.row(r);
    double* di = hi.row(r);
    double* db = hbox.row(r);
    for (int c = 0; c < cols; ++c) {
      double sr = 0.0, si = 0.0, sb = 0.0;
      const double* win = src + c;
      for (int k = 0; k < side; ++k) {
        const double v = win[k];
        sr += v * kernel.row_real[k];
        si += v * kernel.row_imag[k];
        sb += v;
      }
      dr[c] = sr;
      di[c] = si;
      db[c] = sb;
    }
  }

  // Vertical pass: (col_re + i col_im) * (hr + i hi), minus the DC term.
  Mat out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    double* dst = out.row(r);
    std::vector<double> acc_re(cols, 0.0), acc_im(cols, 0.0), acc_box(cols, 0.0);
    for (int k = 0; k < side; ++k) {
      const double cr = kernel.col_real[k];
      const double ci = kernel.col_imag[k];
      const double* sr = hr.row(r + k);
      const double* si = hi.row(r + k);
      const double* sb = hbox.row(r + k);
      for (int c = 0; c < cols; ++c) {
        acc_re[c] += cr * sr[c] - ci * si[c];
        acc_im[c] += cr * si[c] + ci * sr[c];
        acc_box[c] += sb[c];
      }
    }
    for (int c = 0; c < cols; ++c) {
      const double re = acc_re[c] - kernel.dc_real * acc_box[c];
      const double im = acc_im[c] - kernel.dc_imag * acc_box[c];
      dst[c] = std::hypot(re, im);
    }
  }
  return out;
}

Mat downsample_box(const Mat& map, int factor) {
  if (factor < 1) throw data_error("downsample_box: factor must be >= 1");
  if (factor == 1) return map;
  Mat out((map.rows + factor - 1) / factor, (map.cols + factor - 1) / factor);
  for (int r = 0; r < out.rows; ++r) {
    const int r0 = r * factor, r1 = std::min(map.rows, r0 + factor);
    for (int c = 0; c < out.cols; ++c) {
      const int c0 = c * factor, c1 = std::min(map.cols, c0 + factor);
      double s = 0.0;
      for (int rr = r0; rr < r1; ++rr)
        for (int cc = c0; cc < c1; ++cc) s += map(rr, cc);
      out(r, c) = s / (double(r1 - r0) * (c1 - c0));
    }
  }
  return out;
}

ResponseStack response_stack(const Frame& frame, const std::vector<GaborKernel>& bank,
                             int downsample) {
  ResponseStack stack;
  stack.reserve(bank.size());
  for (const auto& kernel : bank)
    stack.push_back(downsample_box(gabor_response(frame, kernel), downsample));
  return stack;
}

namespace {

Vec concat_with_bases(const std::vector<TwoDPcaBasis>& bases, const ResponseStack& stack) {
  if (stack.size() != bases.size())
    throw data_error("appearance features: channel count mismatch");
  Vec out;
  for (size_t ch = 0; ch < stack.size(); ++ch) {
    const Mat reduced = twod_pca_project(bases[ch], stack[ch]);
    out.insert(out.end(), reduced.a.begin(), reduced.a.end());
  }
  return out;
}

}  // namespace

AppearanceFeatureSpace fit_appearance_space(
    const std::vector<std::vector<ResponseStack>>& stacks_by_state,
    const StateBucketing& bucketing, int k2d, int kfinal) {
  std::vector<std::vector<const ResponseStack*>> ptrs(stacks_by_state.size());
  for (size_t j = 0; j < stacks_by_state.size(); ++j)
    for (const auto& stack : stacks_by_state[j]) ptrs[j].push_back(&stack);
  return fit_appearance_space(ptrs, bucketing, k2d, kfinal, 1);
}

AppearanceFeatureSpace fit_appearance_space(
    const std::vector<std::vector<const ResponseStack*>>& stacks_by_state,
    const StateBucketing& bucketing, int k2d, int kfinal, int jobs) {
  if (int(stacks_by_state.size()) != bucketing.n_states)
    throw data_error("fit_appearance_space: state group count mismatch");
  if (kfinal < 40 || kfinal > 60)
    throw data_error("fit_appearance_space: kfinal must be in [40,60]");

  AppearanceFeatureSpace space;
  space.bucketing = bucketing;
  space.channel_bases.resize(bucketing.n_states);
  space.final_basis.resize(bucketing.n_states);
  for (int j = 0; j < bucketing.n_states; ++j)
    if (stacks_by_state[j].empty())
      throw data_error("state " + std::to_string(j + 1) + " has no training frames");

  parallel_for(bucketing.n_states, jobs, [&](int j) {
    const auto& stacks = stacks_by_state[j];
    const int channels = int(stacks[0]->size());
    for (int ch = 0; ch < channels; ++ch) {
      std::vector<const Mat*> maps;
      maps.reserve(stacks.size());
      for (const ResponseStack* stack : stacks) maps.push_back(&(*stack)[ch]);
      space.channel_bases[j].push_back(twod_pca_fit(maps, k2d));
    }
    std::vector<Vec> concatenated;
    concatenated.reserve(stacks.size());
    for (const ResponseStack* stack : stacks)
      concatenated.push_back(concat_with_bases(space.channel_bases[j], *stack));
    space.final_basis[j] = pca_fit(concatenated, kfinal);
  });
  return space;
}

Vec concat_reduced(const AppearanceFeatureSpace& space, const ResponseStack& stack, int state) {
  if (state < 0 || state >= space.state_count())
    throw data_error("appearance features: state out of range");
  return concat_with_bases(space.channel_bases[state], stack);
}

Vec appearance_features(const AppearanceFeatureSpace& space, const ResponseStack& stack,
                        int state) {
  return pca_project(space.final_basis[state], concat_reduced(space, stack, state));
}

}  // namespace aurec
