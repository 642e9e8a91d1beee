#include "aurec/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace aurec {

int PipelineConfig::states_for(int au) const {
  auto it = states_per_au.find(au);
  return it == states_per_au.end() ? default_states : it->second;
}

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::istringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(std::stoi(tok));
  }
  return out;
}

}  // namespace

void apply_config_text(PipelineConfig& config, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw data_error("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    try {
      if (key == "seed") config.seed = std::stoull(value);
      else if (key == "jobs") config.jobs = std::stoi(value);
      else if (key == "track.window_half") config.track.window_half = std::stoi(value);
      else if (key == "track.levels") config.track.pyramid_levels = std::stoi(value);
      else if (key == "track.max_iterations") config.track.max_iterations = std::stoi(value);
      else if (key == "track.epsilon") config.track.epsilon = parse_double(value);
      else if (key == "track.min_eig_factor") config.track.min_eig_factor = parse_double(value);
      else if (key == "crop.margin") config.crop_margin = parse_double(value);
      else if (key == "geo.k") config.geo_k = std::stoi(value);
      else if (key == "gabor.scales") config.gabor.scales = std::stoi(value);
      else if (key == "gabor.orientations") config.gabor.orientations = std::stoi(value);
      else if (key == "gabor.wavelength_base") config.gabor.wavelength_base = parse_double(value);
      else if (key == "gabor.wavelength_ratio") config.gabor.wavelength_ratio = parse_double(value);
      else if (key == "gabor.sigma_factor") config.gabor.sigma_factor = parse_double(value);
      else if (key == "app.downsample") config.downsample = std::stoi(value);
      else if (key == "app.k2d") config.k2d = std::stoi(value);
      else if (key == "app.kfinal") config.kfinal = std::stoi(value);
      else if (key == "gmm.components") config.gmm_components = std::stoi(value);
      else if (key == "hmm.states.default") config.default_states = std::stoi(value);
      else if (key.rfind("hmm.states.au", 0) == 0) {
        const int au = std::stoi(key.substr(std::string("hmm.states.au").size()));
        const int n = std::stoi(value);
        if (n != 3 && n != 5) throw data_error("state count must be 3 or 5");
        config.states_per_au[au] = n;
      } else if (key == "fusion.hidden") config.fusion.hidden = std::stoi(value);
      else if (key == "fusion.learning_rate") config.fusion.learning_rate = parse_double(value);
      else if (key == "fusion.momentum") config.fusion.momentum = parse_double(value);
      else if (key == "fusion.epochs") config.fusion.epochs = std::stoi(value);
      else if (key == "fusion.threshold") config.threshold = parse_double(value);
      else if (key == "augment.copies") config.truncation_copies = std::stoi(value);
      else if (key == "rules.max_conditions") config.rules.max_conditions = std::stoi(value);
      else if (key == "points.upper") config.subsets.upper = parse_int_list(value);
      else if (key == "points.lower") config.subsets.lower = parse_int_list(value);
      else throw data_error("unknown config key '" + key + "'");
    } catch (const data_error&) {
      throw;
    } catch (const std::exception& e) {
      throw data_error("config line " + std::to_string(line_no) + ": bad value for '" + key +
                       "' (" + e.what() + ")");
    }
  }
  if (config.default_states != 3 && config.default_states != 5)
    throw data_error("hmm.states.default must be 3 or 5");
}

void apply_config_file(PipelineConfig& config, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open config '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  apply_config_text(config, buf.str());
}

int ModelBundle::au_slot(int au) const {
  for (size_t i = 0; i < au_list.size(); ++i)
    if (au_list[i] == au) return int(i);
  throw data_error("AU " + std::to_string(au) + " not in bundle");
}

std::string au_set_tag(const std::set<int>& aus) {
  if (aus.empty()) return "none";
  std::string tag;
  for (int au : aus) {
    if (!tag.empty()) tag += "+";
    tag += std::to_string(au);
  }
  return tag;
}

namespace {

// Everything derived from one sequence that the pipeline consumes.
struct SequenceData {
  const ManifestRecord* record = nullptr;
  int t = 0;
  LandmarkTrajectory traj;
  std::vector<Vec> displacements;
  Vec intensity_profile;
  std::vector<ResponseStack> stacks;              // dropped after transforms
  std::map<int, std::vector<int>> states;         // n_states -> per-frame state
  std::map<int, StateFeatureSequence> geo_sf;     // n_states -> [frame][state]
  std::map<int, StateFeatureSequence> app_sf;
};

SequenceData extract_sequence(const ManifestRecord& record, const PipelineConfig& config,
                              const std::vector<GaborKernel>& bank) {
  SequenceData data;
  data.record = &record;
  const ImageSequence seq = load_sequence(record, config.subsets);
  data.t = seq.frame_count();
  data.traj = track_grid(seq, config.track);
  data.displacements = displacement_features(data.traj);
  data.intensity_profile.resize(data.t);
  for (int f = 0; f < data.t; ++f) data.intensity_profile[f] = intensity(data.traj, f);

  data.stacks.reserve(data.t);
  for (const Frame& frame : seq.frames) {
    const Frame crop = crop_region(frame, seq.initial_landmarks, seq.region, config.crop_margin);
    data.stacks.push_back(response_stack(crop, bank, config.downsample));
  }
  return data;
}

void transform_sequence(SequenceData& data, int n,
                        const GeoFeatureSpace& geo_space,
                        const AppearanceFeatureSpace& app_space) {
  StateFeatureSequence geo(data.t), app(data.t);
  for (int f = 0; f < data.t; ++f) {
    geo[f].resize(n);
    app[f].resize(n);
    for (int j = 0; j < n; ++j) {
      geo[f][j] = geo_features(geo_space, data.displacements[f], j);
      app[f][j] = appearance_features(app_space, data.stacks[f], j);
    }
  }
  data.geo_sf[n] = std::move(geo);
  data.app_sf[n] = std::move(app);
}

StateFeatureSequence prefix_of(const StateFeatureSequence& full, int t) {
  return StateFeatureSequence(full.begin(), full.begin() + t);
}

// The 2M raw (per-frame-normalized) Viterbi scores of one prefix.
Vec raw_scores_for(const SequenceData& data, const ModelBundle& bundle, int t_end) {
  const int m = int(bundle.au_list.size());
  Vec geo_scores(m), app_scores(m);
  for (int i = 0; i < m; ++i) {
    const int n = bundle.geo_models[i].n_states;
    const auto geo_prefix = prefix_of(data.geo_sf.at(n), t_end);
    const auto app_prefix = prefix_of(data.app_sf.at(n), t_end);
    geo_scores[i] = viterbi_log_score(geo_prefix, bundle.geo_models[i]) / t_end;
    app_scores[i] = viterbi_log_score(app_prefix, bundle.app_models[i]) / t_end;
  }
  return build_score_vector(geo_scores, app_scores);
}

class StageTimer {
 public:
  StageTimer(const StageLog& log) : log_(log) {}
  template <typename Fn>
  auto run(const std::string& name, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      finish(name, start);
    } else {
      auto result = fn();
      finish(name, start);
      return result;
    }
  }

 private:
  void finish(const std::string& name,
              std::chrono::steady_clock::time_point start) const {
    if (!log_) return;
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log_(name, seconds);
  }
  const StageLog& log_;
};

}  // namespace

ModelBundle train_bundle(const Manifest& manifest, const PipelineConfig& config,
                         const StageLog& log) {
  if (manifest.records.empty()) throw data_error("train: empty manifest");
  const Region region = manifest.records[0].region;
  for (const auto& rec : manifest.records)
    if (rec.region != region)
      throw data_error("train: manifest mixes upper and lower regions (one bundle per region)");

  ModelBundle bundle;
  bundle.config = config;
  bundle.region = region;

  // Registered AUs: explicit config list or the union over the manifest.
  std::set<int> seen;
  for (const auto& rec : manifest.records) seen.insert(rec.truth.aus.begin(), rec.truth.aus.end());
  if (seen.empty()) throw data_error("train: no AUs in manifest ground truth");
  bundle.au_list.assign(seen.begin(), seen.end());
  for (int au : bundle.au_list) {
    bool found = false;
    for (const auto& rec : manifest.records)
      if (rec.truth.aus.count(au)) found = true;
    if (!found) throw data_error("train: AU " + std::to_string(au) + " has no positive examples");
  }

  const std::vector<GaborKernel> bank = make_gabor_bank(config.gabor);
  StageTimer timer(log);

  const int n_seq = int(manifest.records.size());
  std::vector<SequenceData> data(n_seq);
  timer.run("track+features", [&] {
    parallel_for(n_seq, config.jobs, [&](int i) {
      try {
        data[i] = extract_sequence(manifest.records[i], config, bank);
      } catch (const std::exception& e) {
        throw data_error("sequence '" + manifest.records[i].sequence_dir + "': " + e.what());
      }
    });
  });

  // Distinct state counts in use.
  std::set<int> state_counts;
  for (int au : bundle.au_list) state_counts.insert(config.states_for(au));
  for (int n : state_counts) {
    const StateBucketing bucketing = make_bucketing(n);
    for (auto& d : data) {
      std::vector<int> assignment(d.t);
      for (int f = 0; f < d.t; ++f) assignment[f] = bucket_state(d.intensity_profile[f], bucketing);
      d.states[n] = std::move(assignment);
    }
  }

  timer.run("feature-spaces", [&] {
    for (int n : state_counts) {
      const StateBucketing bucketing = make_bucketing(n);
      std::vector<std::vector<Vec>> geo_pool(n);
      std::vector<std::vector<const ResponseStack*>> app_pool(n);
      for (const auto& d : data)
        for (int f = 0; f < d.t; ++f) {
          const int j = d.states.at(n)[f];
          geo_pool[j].push_back(d.displacements[f]);
          app_pool[j].push_back(&d.stacks[f]);
        }
      bundle.geo_spaces.emplace(n, fit_geo_space(geo_pool, bucketing, config.geo_k));
      bundle.app_spaces.emplace(n, fit_appearance_space(app_pool, bucketing, config.k2d,
                                                        config.kfinal, config.jobs));
    }
  });

  timer.run("transforms", [&] {
    parallel_for(n_seq, config.jobs, [&](int i) {
      for (int n : state_counts)
        transform_sequence(data[i], n, bundle.geo_spaces.at(n), bundle.app_spaces.at(n));
      std::vector<ResponseStack>().swap(data[i].stacks);  // free the maps
    });
  });

  const int m = int(bundle.au_list.size());
  timer.run("hmm-training", [&] {
    bundle.geo_models.resize(m);
    bundle.app_models.resize(m);
    parallel_for(2 * m, config.jobs, [&](int idx) {
      const int i = idx / 2;
      const BankTag tag = (idx % 2 == 0) ? BankTag::geometric : BankTag::appearance;
      const int au = bundle.au_list[i];
      const int n = config.states_for(au);
      std::vector<std::vector<Vec>> pool(n);
      for (const auto& d : data) {
        if (!d.record->truth.aus.count(au)) continue;
        for (int f = 0; f < d.t; ++f) {
          const int j = d.states.at(n)[f];
          const auto& sf = (tag == BankTag::geometric) ? d.geo_sf.at(n) : d.app_sf.at(n);
          pool[j].push_back(sf[f][j]);
        }
      }
      const std::uint64_t seed =
          mix_seed(config.seed, std::uint64_t(au) * 2 + (tag == BankTag::appearance ? 1 : 0));
      AuHmm model = train_au_hmm(au, tag, pool, config.gmm_components, seed);
      (tag == BankTag::geometric ? bundle.geo_models : bundle.app_models)[i] = std::move(model);
    });
  });

  timer.run("score-vectors+fusion", [&] {
    std::vector<std::vector<TruncationCopy>> plans(n_seq);
    parallel_for(n_seq, config.jobs, [&](int i) {
      plans[i] = plan_truncations(data[i].traj, config.truncation_copies);
    });
    std::vector<std::vector<Vec>> raw_per_seq(n_seq), tgt_per_seq(n_seq);
    parallel_for(n_seq, config.jobs, [&](int i) {
      for (const TruncationCopy& copy : plans[i]) {
        raw_per_seq[i].push_back(raw_scores_for(data[i], bundle, copy.end_frame + 1));
        Vec target(m, 0.0);
        for (int s = 0; s < m; ++s)
          if (data[i].record->truth.aus.count(bundle.au_list[s]))
            target[s] = copy.achieved_intensity * data[i].record->truth.apex_intensity;
        tgt_per_seq[i].push_back(std::move(target));
      }
    });
    std::vector<Vec> raw, targets;
    for (int i = 0; i < n_seq; ++i) {
      raw.insert(raw.end(), raw_per_seq[i].begin(), raw_per_seq[i].end());
      targets.insert(targets.end(), tgt_per_seq[i].begin(), tgt_per_seq[i].end());
    }
    FusionConfig fusion_config = config.fusion;
    fusion_config.seed = mix_seed(config.seed, 0xf0510);
    bundle.fusion = train_fusion(raw, targets, fusion_config);
  });

  return bundle;
}

Prediction predict_sequence(const ModelBundle& bundle, const ImageSequence& seq) {
  if (seq.region != bundle.region)
    throw data_error("predict: sequence region does not match the bundle");
  const PipelineConfig& config = bundle.config;
  const std::vector<GaborKernel> bank = make_gabor_bank(config.gabor);

  SequenceData data;
  data.t = seq.frame_count();
  data.traj = track_grid(seq, config.track);
  data.displacements = displacement_features(data.traj);
  // Surfaces the static-sequence error early, like training does.
  data.intensity_profile.resize(data.t);
  for (int f = 0; f < data.t; ++f) data.intensity_profile[f] = intensity(data.traj, f);

  data.stacks.reserve(data.t);
  for (const Frame& frame : seq.frames) {
    const Frame crop = crop_region(frame, seq.initial_landmarks, seq.region, config.crop_margin);
    data.stacks.push_back(response_stack(crop, bank, config.downsample));
  }
  for (const auto& [n, geo_space] : bundle.geo_spaces)
    transform_sequence(data, n, geo_space, bundle.app_spaces.at(n));

  Prediction pred;
  pred.raw_scores = raw_scores_for(data, bundle, data.t);
  pred.std_scores = bundle.fusion.standardize(pred.raw_scores);
  pred.outputs = fusion_forward(bundle.fusion, pred.raw_scores);
  pred.aus = decide(pred.outputs, bundle.au_list, config.threshold);
  if (bundle.rule_list) pred.expression = classify_expression(pred.outputs, *bundle.rule_list);
  return pred;
}

Prediction predict_files(const ModelBundle& bundle, const std::string& seq_dir,
                         const std::string& landmark_file) {
  ManifestRecord rec;
  rec.sequence_dir = seq_dir;
  rec.landmark_file = landmark_file;
  rec.region = bundle.region;
  return predict_sequence(bundle, load_sequence(rec, bundle.config.subsets));
}

EvalReport evaluate_bundle(const ModelBundle& bundle, const Manifest& manifest, int jobs) {
  if (manifest.records.empty()) throw data_error("eval: empty manifest");
  const int n = int(manifest.records.size());
  std::vector<Prediction> preds(n);
  parallel_for(n, jobs, [&](int i) {
    const auto& rec = manifest.records[i];
    try {
      preds[i] = predict_sequence(bundle, load_sequence(rec, bundle.config.subsets));
    } catch (const std::exception& e) {
      throw data_error("sequence '" + rec.sequence_dir + "': " + e.what());
    }
  });

  EvalReport report;
  std::map<std::string, ClassTally> tally_map;
  std::vector<std::pair<std::string, std::string>> expr_pairs;
  for (int i = 0; i < n; ++i) {
    const auto& truth = manifest.records[i].truth;
    report.pairs.emplace_back(truth.aus, preds[i].aus);
    ClassTally& tally = tally_map[au_set_tag(truth.aus)];
    tally.tag = au_set_tag(truth.aus);
    ++tally.sequences;
    if (preds[i].aus == truth.aus) {
      ++tally.exact;
    } else {
      bool shares = false;
      for (int au : preds[i].aus)
        if (truth.aus.count(au)) shares = true;
      if (shares)
        ++tally.missing_or_extra;
      else
        ++tally.false_detections;
    }
    if (truth.expression && preds[i].expression)
      expr_pairs.emplace_back(*truth.expression, *preds[i].expression);
  }
  for (auto& [tag, tally] : tally_map) report.tallies.push_back(tally);
  report.au_metrics = au_recognition_metrics(report.pairs);
  if (!expr_pairs.empty()) {
    std::vector<std::string> classes(std::begin(kExpressionNames), std::end(kExpressionNames));
    report.expression_metrics = confusion_and_metrics(expr_pairs, classes);
  }
  return report;
}

std::vector<RuleRow> rule_rows_from_manifest(const ModelBundle& bundle, const Manifest& manifest,
                                             bool use_predictions, int jobs) {
  std::vector<RuleRow> rows(manifest.records.size());
  parallel_for(int(manifest.records.size()), jobs, [&](int i) {
    const auto& rec = manifest.records[i];
    if (!rec.truth.expression)
      throw data_error("rules: sequence '" + rec.sequence_dir + "' has no expression label");
    RuleRow row;
    row.label = *rec.truth.expression;
    if (use_predictions) {
      const Prediction pred =
          predict_sequence(bundle, load_sequence(rec, bundle.config.subsets));
      row.intensities = pred.outputs;
    } else {
      row.intensities.assign(bundle.au_list.size(), 0.0);
      for (size_t s = 0; s < bundle.au_list.size(); ++s)
        if (rec.truth.aus.count(bundle.au_list[s]))
          row.intensities[s] = rec.truth.apex_intensity;
    }
    rows[i] = std::move(row);
  });
  return rows;
}

}  // namespace aurec
