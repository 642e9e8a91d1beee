#pragma once

#include "aurec/geo.hpp"
#include "aurec/reduction.hpp"

namespace aurec {

struct GaborParams {
  int scales = 4;
  int orientations = 4;
  double wavelength_base = 4.0;     // pixels, scale 0
  double wavelength_ratio = 1.4142135623730951;  // per scale step
  double sigma_factor = 0.56;       // sigma = factor * wavelength
  double aspect = 1.0;
};

// One complex Gabor tap grid, DC-corrected so a constant image gives zero
// response. With aspect 1 the taps factor into per-axis profiles, which the
// response computation exploits.
struct GaborKernel {
  int scale = 0;
  int orientation = 0;
  double wavelength = 0.0;
  double sigma = 0.0;
  double theta = 0.0;
  int half = 0;  // support is (2*half+1)^2, truncated at 3 sigma

  Vec real;  // row-major taps, after DC correction
  Vec imag;

  // Separable factors of the uncorrected kernel: taps = (col x row outer product) - dc.
  Vec col_real, col_imag;  // along y
  Vec row_real, row_imag;  // along x
  double dc_real = 0.0, dc_imag = 0.0;

  int side() const { return 2 * half + 1; }
};

GaborKernel make_gabor_kernel(int scale, int orientation, const GaborParams& params);

// Kernels enumerated scale-major: (s0,o0), (s0,o1), ...
std::vector<GaborKernel> make_gabor_bank(const GaborParams& params);

// Pointwise magnitude of the complex filter response, same size as the
// frame, reflect padding.
Mat gabor_response(const Frame& frame, const GaborKernel& kernel);

// Box-mean downsampling by `factor` per axis (edge boxes average over the
// pixels actually present). factor 1 is a copy.
Mat downsample_box(const Mat& map, int factor);

// The per-frame raw appearance observation: one downsampled magnitude map
// per bank channel.
using ResponseStack = std::vector<Mat>;

ResponseStack response_stack(const Frame& frame, const std::vector<GaborKernel>& bank,
                             int downsample);

struct AppearanceFeatureSpace {
  StateBucketing bucketing;
  // channel_bases[state][channel]
  std::vector<std::vector<TwoDPcaBasis>> channel_bases;
  std::vector<PcaBasis> final_basis;  // per state, over the concatenated vectorization

  int state_count() const { return int(final_basis.size()); }
  int channel_count() const { return channel_bases.empty() ? 0 : int(channel_bases[0].size()); }
  int feature_dim() const { return final_basis.empty() ? 0 : final_basis[0].output_dim(); }
};

// Per (state, channel): 2DPCA with k2d columns on that state's response
// maps; per state: final PCA of dimension kfinal on the channel-major
// concatenation of the row-major vectorized reduced matrices.
AppearanceFeatureSpace fit_appearance_space(
    const std::vector<std::vector<ResponseStack>>& stacks_by_state,
    const StateBucketing& bucketing, int k2d, int kfinal);
// Pointer variant; training pools stay in place. jobs > 1 fits the states
// concurrently (the per-state results are independent).
AppearanceFeatureSpace fit_appearance_space(
    const std::vector<std::vector<const ResponseStack*>>& stacks_by_state,
    const StateBucketing& bucketing, int k2d, int kfinal, int jobs);

// Concatenation used both at fit and at projection time.
Vec concat_reduced(const AppearanceFeatureSpace& space, const ResponseStack& stack, int state);

Vec appearance_features(const AppearanceFeatureSpace& space, const ResponseStack& stack,
                        int state);

}  // namespace aurec
