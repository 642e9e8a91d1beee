#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>

#include "aurec/common.hpp"

namespace aurec {

// Grayscale frame, luminance in [0,1], stored row-major (rows x cols).
using Frame = Mat;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

enum class Region { upper, lower };

std::string region_name(Region r);
Region parse_region(const std::string& s);

// Fixed crop sizes per face region (rows x cols).
struct CropSize {
  int rows;
  int cols;
};
CropSize crop_size(Region r);

inline constexpr const char* kExpressionNames[] = {"surprise", "gloomy", "fear",
                                                   "happy",    "angry",  "disgust"};
bool is_known_expression(const std::string& s);

struct GroundTruth {
  std::set<int> aus;            // single-AU ids present at apex
  double apex_intensity = 1.0;  // in (0,1]
  std::optional<std::string> expression;
};

struct ManifestRecord {
  std::string sequence_dir;
  std::string landmark_file;
  Region region = Region::upper;
  GroundTruth truth;
};

struct Manifest {
  std::vector<ManifestRecord> records;
};

struct ImageSequence {
  std::vector<Frame> frames;          // t >= 2, first frame neutral
  std::vector<Point> initial_landmarks;
  Region region = Region::upper;

  int frame_count() const { return int(frames.size()); }
};

// Optional per-region landmark index selection ("all points" when absent).
struct PointSubsets {
  std::optional<std::vector<int>> upper;
  std::optional<std::vector<int>> lower;

  const std::optional<std::vector<int>>& for_region(Region r) const {
    return r == Region::upper ? upper : lower;
  }
};

// Manifest grammar: one tab-separated record per line,
//   <seq_dir> <landmark_file> <region> <au_list> <apex_intensity> <expression|->
// '#' starts a comment line; blank lines are skipped.
Manifest parse_manifest(const std::string& text);
std::string serialize_manifest(const Manifest& manifest);
Manifest load_manifest(const std::filesystem::path& path);

Frame read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Frame& frame);

std::vector<Point> read_landmarks(const std::filesystem::path& path);
void write_landmarks(const std::filesystem::path& path, const std::vector<Point>& points);

// Loads the PGM frames (lexicographic filename order) and the selected
// landmark subset for the record's region.
ImageSequence load_sequence(const ManifestRecord& record,
                            const PointSubsets& subsets = {});

// Resamples the landmark bounding box (expanded by `margin` of its size on
// each side, clamped to the frame) to the region's fixed crop size.
Frame crop_region(const Frame& frame, const std::vector<Point>& landmarks,
                  Region region, double margin = 0.2);

double bilinear_sample(const Frame& frame, double x, double y);

}  // namespace aurec
