#pragma once

#include <functional>
#include <map>

#include "aurec/fusion.hpp"
#include "aurec/gabor.hpp"
#include "aurec/hmm.hpp"
#include "aurec/rules.hpp"
#include "aurec/synth.hpp"

namespace aurec {

struct PipelineConfig {
  std::uint64_t seed = 1;
  int jobs = 1;

  TrackParams track;
  double crop_margin = 0.2;

  int geo_k = 8;  // per-AU geometric dimension, [6,10]

  GaborParams gabor;
  int downsample = 4;  // response-map box downsampling per axis
  int k2d = 8;
  int kfinal = 48;  // [40,60]

  int gmm_components = 3;
  int default_states = 3;
  std::map<int, int> states_per_au;  // overrides, 3 or 5

  FusionConfig fusion;
  double threshold = 0.5;
  int truncation_copies = 5;

  RuleConfig rules;
  PointSubsets subsets;

  int states_for(int au) const;
};

// Flat key/value config text: "key = value" lines, '#' comments. Unknown
// keys are rejected.
void apply_config_text(PipelineConfig& config, const std::string& text);
void apply_config_file(PipelineConfig& config, const std::filesystem::path& path);

struct ModelBundle {
  int version = 1;
  PipelineConfig config;
  Region region = Region::upper;
  std::vector<int> au_list;
  std::map<int, GeoFeatureSpace> geo_spaces;         // keyed by state count
  std::map<int, AppearanceFeatureSpace> app_spaces;  // keyed by state count
  std::vector<AuHmm> geo_models;                     // AU order
  std::vector<AuHmm> app_models;
  FusionNet fusion;
  std::optional<RuleList> rule_list;

  int au_slot(int au) const;
};

void save_bundle(const std::filesystem::path& path, const ModelBundle& bundle);
ModelBundle load_bundle(const std::filesystem::path& path);

using StageLog = std::function<void(const std::string& stage, double seconds)>;

ModelBundle train_bundle(const Manifest& manifest, const PipelineConfig& config,
                         const StageLog& log = {});

struct Prediction {
  std::set<int> aus;
  Vec outputs;      // per-AU activations, AU order
  Vec raw_scores;   // 2M per-frame-normalized Viterbi log-scores
  Vec std_scores;   // after the bundle's input standardization
  std::optional<std::string> expression;
};

Prediction predict_sequence(const ModelBundle& bundle, const ImageSequence& seq);
Prediction predict_files(const ModelBundle& bundle, const std::string& seq_dir,
                         const std::string& landmark_file);

struct ClassTally {
  std::string tag;  // e.g. "1+2"
  int sequences = 0;
  int exact = 0;            // "True" column
  int missing_or_extra = 0;  // wrong but sharing at least one AU
  int false_detections = 0;  // wrong and disjoint from the truth
};

struct EvalReport {
  std::vector<ClassTally> tallies;
  AuRecognitionMetrics au_metrics;
  std::vector<std::pair<std::set<int>, std::set<int>>> pairs;  // (true, predicted)
  std::optional<EvalMetrics> expression_metrics;
};

EvalReport evaluate_bundle(const ModelBundle& bundle, const Manifest& manifest, int jobs);

// Rows for rule induction. Predicted intensities come from the fusion
// outputs; ground-truth rows use apex_intensity for present AUs.
std::vector<RuleRow> rule_rows_from_manifest(const ModelBundle& bundle, const Manifest& manifest,
                                             bool use_predictions, int jobs);

std::string au_set_tag(const std::set<int>& aus);

}  // namespace aurec
