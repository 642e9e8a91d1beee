#pragma once

#include <cstdint>
#include <filesystem>

#include "aurec/dataset.hpp"

namespace aurec {

// One synthetic action unit: a Gaussian-falloff displacement field plus a
// local contrast bump that ramps with the expression.
struct SynthAu {
  int id = 0;
  Point center;
  Point direction;        // apex displacement at the field center, pixels
  double falloff = 14.0;  // Gaussian radius of the field, pixels
  double contrast = 0.0;  // appearance modulation amplitude at the center
};

struct SynthClass {
  std::vector<int> au_ids;  // single AU or an additive combination
  std::optional<std::string> expression;
};

struct SynthSpec {
  std::vector<SynthAu> aus;
  std::vector<SynthClass> classes;
  Region region = Region::upper;
  int t = 6;
  int base_rows = 72;
  int base_cols = 96;
  int grid_rows = 3;     // landmark grid placed inside the margins
  int grid_cols = 4;
  int grid_margin = 16;
  double noise_sigma = 0.0;
  std::uint64_t texture_seed = 7;
  // Per-sequence variation around the shared structure: a small white-noise
  // blend into the base texture, a random illumination gain/tilt, and a
  // scalar jitter on the displacement field. Eq.-style intensity ratios are
  // unaffected by the field jitter (the apex normalizes it away).
  double texture_variation = 0.02;
  double illumination = 0.08;
  double field_jitter = 0.1;

  const SynthAu& au_by_id(int id) const;
};

// Six upper-face AUs with distinct fields plus six additive pairs, one
// expression label per class.
SynthSpec builtin_synth_spec();

// Flat key/value spec file; see the repository README for the grammar.
SynthSpec parse_synth_spec(const std::string& text);
SynthSpec load_synth_spec(const std::filesystem::path& path);

// Landmark grid positions for a spec (row-major).
std::vector<Point> synth_landmarks(const SynthSpec& spec);

// Writes n_per_class sequences per class under out_dir (PGM frames, one
// landmark file and one manifest). Landmarks move by ramp(f) times the sum
// of the class's fields; the texture is warped to match exactly (inverse
// bilinear warp with a fixed-point solve of the forward map).
// Returns the manifest path.
std::filesystem::path synth_generate(const SynthSpec& spec, const std::filesystem::path& out_dir,
                                     int n_per_class, std::uint64_t seed, bool force = false);

// Exposed for tests: the displacement of `p` at full intensity under a class.
Point synth_field_at(const SynthSpec& spec, const SynthClass& cls, const Point& p);

}  // namespace aurec
