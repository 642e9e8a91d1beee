// Command-line harness for the AU recognition pipeline: synthetic data
// generation, training, prediction, evaluation and model inspection.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "aurec/pipeline.hpp"

namespace {

using namespace aurec;

struct GlobalOptions {
  std::uint64_t seed = 1;
  std::string config_file;
  int jobs = 1;
  std::string format = "text";

  bool machine() const { return format == "machine"; }

  PipelineConfig make_config() const {
    PipelineConfig config;
    config.seed = seed;
    config.jobs = jobs;
    if (!config_file.empty()) apply_config_file(config, config_file);
    return config;
  }
};

void print_expression_metrics(const EvalMetrics& metrics, bool machine);

void print_eval_report(const EvalReport& report, bool machine) {
  if (machine) {
    for (const auto& t : report.tallies)
      std::printf("class %s sequences %d true %d missing_or_extra %d false %d\n", t.tag.c_str(),
                  t.sequences, t.exact, t.missing_or_extra, t.false_detections);
    std::printf("R %s\n", format_double(report.au_metrics.recognition_rate).c_str());
    std::printf("F %s\n", format_double(report.au_metrics.false_alarm).c_str());
  } else {
    std::printf("%-14s %10s %6s %18s %6s\n", "AUs", "Sequences", "True", "Missing or extra",
                "False");
    int seqs = 0, exact = 0, moe = 0, fd = 0;
    for (const auto& t : report.tallies) {
      std::printf("%-14s %10d %6d %18d %6d\n", t.tag.c_str(), t.sequences, t.exact,
                  t.missing_or_extra, t.false_detections);
      seqs += t.sequences;
      exact += t.exact;
      moe += t.missing_or_extra;
      fd += t.false_detections;
    }
    std::printf("%-14s %10d %6d %18d %6d\n", "Total", seqs, exact, moe, fd);
    std::printf("R %.1f%%\n", 100.0 * report.au_metrics.recognition_rate);
    std::printf("F %.1f%%\n", 100.0 * report.au_metrics.false_alarm);
  }
  if (report.expression_metrics) print_expression_metrics(*report.expression_metrics, machine);
}

ConfusionMatrix read_confusion_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open confusion file '" + path + "'");
  std::string header;
  while (std::getline(in, header)) {
    if (!header.empty() && header[0] != '#') break;
  }
  ConfusionMatrix matrix;
  {
    std::istringstream hs(header);
    std::string name;
    while (hs >> name) matrix.classes.push_back(name);
  }
  const int c = int(matrix.classes.size());
  if (c == 0) throw data_error("confusion file: missing class header");
  matrix.counts = Mat(c, c);
  for (int r = 0; r < c; ++r)
    for (int col = 0; col < c; ++col)
      if (!(in >> matrix.counts(r, col)))
        throw data_error("confusion file: expected " + std::to_string(c * c) + " counts");
  return matrix;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Facial action unit recognition pipeline"};
  app.require_subcommand(1);

  GlobalOptions global;
  app.add_option("--seed", global.seed, "Global RNG seed");
  app.add_option("--config", global.config_file, "Flat key/value config file");
  app.add_option("--jobs", global.jobs, "Worker threads for per-sequence and per-AU stages");
  app.add_option("--format", global.format, "Output format")
      ->check(CLI::IsMember({"text", "machine"}));

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  std::string synth_out, synth_spec_file;
  int synth_n = 10, synth_t = 0;
  double synth_noise = -1.0;
  bool synth_force = false;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--spec", synth_spec_file, "Synth spec file (default: built-in 6 AU spec)");
  synth->add_option("--n-per-class", synth_n, "Sequences per class");
  synth->add_option("--t", synth_t, "Frames per sequence (override)");
  synth->add_option("--noise", synth_noise, "Pixel noise sigma (override)");
  synth->add_flag("--force", synth_force, "Write into a non-empty directory");

  // train
  auto* train = app.add_subcommand("train", "Train a model bundle from a manifest");
  std::string train_manifest, train_out;
  train->add_option("--manifest", train_manifest, "Training manifest")->required();
  train->add_option("--out", train_out, "Bundle output path")->required();

  // predict
  auto* predict = app.add_subcommand("predict", "Predict AUs for one sequence");
  std::string pred_bundle, pred_seq, pred_landmarks;
  bool pred_scores = false;
  predict->add_option("--bundle", pred_bundle, "Model bundle")->required();
  predict->add_option("--seq", pred_seq, "Sequence directory (PGM frames)")->required();
  predict->add_option("--landmarks", pred_landmarks, "Landmark file")->required();
  predict->add_flag("--scores", pred_scores, "Also print the 2M score vector");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a bundle against a manifest");
  std::string eval_bundle, eval_manifest, eval_confusion;
  eval->add_option("--bundle", eval_bundle, "Model bundle");
  eval->add_option("--manifest", eval_manifest, "Test manifest with ground truth");
  eval->add_option("--confusion", eval_confusion,
                   "Compute expression metrics from an existing confusion matrix file");

  // rules-train
  auto* rules = app.add_subcommand("rules-train", "Induce expression rules into a bundle");
  std::string rules_bundle, rules_manifest, rules_out, rules_source = "predicted";
  rules->add_option("--bundle", rules_bundle, "Model bundle")->required();
  rules->add_option("--manifest", rules_manifest, "Manifest with expression labels")->required();
  rules->add_option("--out", rules_out, "Output bundle path")->required();
  rules->add_option("--source", rules_source, "AU intensity source")
      ->check(CLI::IsMember({"predicted", "truth"}));

  // inspect
  auto* inspect = app.add_subcommand("inspect", "Print a bundle summary");
  std::string inspect_bundle;
  inspect->add_option("--bundle", inspect_bundle, "Model bundle")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth) {
      SynthSpec spec =
          synth_spec_file.empty() ? builtin_synth_spec() : load_synth_spec(synth_spec_file);
      if (synth_t > 0) spec.t = synth_t;
      if (synth_noise >= 0.0) spec.noise_sigma = synth_noise;
      const auto manifest =
          synth_generate(spec, synth_out, synth_n, global.seed, synth_force);
      std::printf("manifest %s\n", manifest.string().c_str());
    } else if (*train) {
      const PipelineConfig config = global.make_config();
      const Manifest manifest = load_manifest(train_manifest);
      const ModelBundle bundle = train_bundle(manifest, config, [](const std::string& stage,
                                                                   double seconds) {
        std::fprintf(stderr, "stage %-22s %.2fs\n", stage.c_str(), seconds);
      });
      save_bundle(train_out, bundle);
      std::printf("bundle %s (AUs:", train_out.c_str());
      for (int au : bundle.au_list) std::printf(" %d", au);
      std::printf(", fusion loss %s)\n", format_double(bundle.fusion.final_loss).c_str());
    } else if (*predict) {
      const ModelBundle bundle = load_bundle(pred_bundle);
      const Prediction pred = predict_files(bundle, pred_seq, pred_landmarks);
      if (global.machine()) {
        std::printf("aus %s\n", au_set_tag(pred.aus).c_str());
        for (size_t i = 0; i < bundle.au_list.size(); ++i)
          std::printf("output au%d %s\n", bundle.au_list[i], format_double(pred.outputs[i]).c_str());
        if (pred_scores)
          for (size_t i = 0; i < pred.raw_scores.size(); ++i)
            std::printf("score %zu %s\n", i, format_double(pred.raw_scores[i]).c_str());
        if (pred.expression) std::printf("expression %s\n", pred.expression->c_str());
      } else {
        std::printf("AUs: %s\n", au_set_tag(pred.aus).c_str());
        for (size_t i = 0; i < bundle.au_list.size(); ++i)
          std::printf("  AU%-3d %.4f%s\n", bundle.au_list[i], pred.outputs[i],
                      pred.outputs[i] >= bundle.config.threshold ? "  *" : "");
        if (pred_scores) {
          std::printf("Scores (geometric then appearance, per-frame log):\n");
          for (size_t i = 0; i < pred.raw_scores.size(); ++i)
            std::printf("  slot %-3zu %.6f\n", i, pred.raw_scores[i]);
        }
        if (pred.expression) std::printf("Expression: %s\n", pred.expression->c_str());
      }
    } else if (*eval) {
      if (!eval_confusion.empty()) {
        const ConfusionMatrix matrix = read_confusion_file(eval_confusion);
        print_expression_metrics(metrics_from_matrix(matrix), global.machine());
      } else {
        if (eval_bundle.empty() || eval_manifest.empty())
          throw CLI::ValidationError("eval", "need --bundle and --manifest (or --confusion)");
        const ModelBundle bundle = load_bundle(eval_bundle);
        const Manifest manifest = load_manifest(eval_manifest);
        print_eval_report(evaluate_bundle(bundle, manifest, global.jobs), global.machine());
      }
    } else if (*rules) {
      ModelBundle bundle = load_bundle(rules_bundle);
      const Manifest manifest = load_manifest(rules_manifest);
      std::vector<RuleRow> rows =
          rule_rows_from_manifest(bundle, manifest, rules_source == "predicted", global.jobs);
      RuleConfig rc = bundle.config.rules;
      rc.seed = mix_seed(global.seed, 0x101e5);
      bundle.rule_list = induce_rules(rows, rc);
      save_bundle(rules_out, bundle);
      std::vector<std::string> names;
      for (int au : bundle.au_list) names.push_back("AU" + std::to_string(au));
      std::printf("%s", serialize_rule_list(*bundle.rule_list, names).c_str());
    } else if (*inspect) {
      const ModelBundle bundle = load_bundle(inspect_bundle);
      std::printf("version %d\n", bundle.version);
      std::printf("region %s\n", region_name(bundle.region).c_str());
      std::printf("aus %s\n",
                  au_set_tag(std::set<int>(bundle.au_list.begin(), bundle.au_list.end())).c_str());
      std::printf("seed %llu\n", (unsigned long long)bundle.config.seed);
      for (const auto& m : bundle.geo_models)
        std::printf("model geometric au%d states %d dim %d\n", m.au, m.n_states,
                    m.state_gmms[0].dim());
      for (const auto& m : bundle.app_models)
        std::printf("model appearance au%d states %d dim %d\n", m.au, m.n_states,
                    m.state_gmms[0].dim());
      std::printf("fusion %d-%d-%d loss %s\n", bundle.fusion.inputs, bundle.fusion.hidden,
                  bundle.fusion.outputs, format_double(bundle.fusion.final_loss).c_str());
      std::printf("rules %s\n", bundle.rule_list ? "yes" : "no");
    }
  } catch (const CLI::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const numeric_error& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 4;
  } catch (const data_error& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}

namespace {

void print_expression_metrics(const EvalMetrics& metrics, bool machine) {
  const int c = int(metrics.matrix.classes.size());
  auto opt = [](const std::optional<double>& v) {
    return v ? format_double(*v) : std::string("undefined");
  };
  if (machine) {
    std::printf("accuracy %s\n", format_double(metrics.accuracy).c_str());
    for (int i = 0; i < c; ++i) {
      std::printf("class %s tpr %s fpr %s precision %s\n", metrics.matrix.classes[i].c_str(),
                  opt(metrics.per_class[i].tpr).c_str(), opt(metrics.per_class[i].fpr).c_str(),
                  opt(metrics.per_class[i].precision).c_str());
    }
    for (int i = 0; i < c; ++i) {
      std::printf("confusion %s", metrics.matrix.classes[i].c_str());
      for (int j = 0; j < c; ++j) std::printf(" %.0f", metrics.matrix.counts(i, j));
      std::printf("\n");
    }
  } else {
    std::printf("Confusion matrix (rows true, columns predicted):\n%-10s", "");
    for (int j = 0; j < c; ++j) std::printf(" %9s", metrics.matrix.classes[j].c_str());
    std::printf("\n");
    for (int i = 0; i < c; ++i) {
      std::printf("%-10s", metrics.matrix.classes[i].c_str());
      for (int j = 0; j < c; ++j) std::printf(" %9.0f", metrics.matrix.counts(i, j));
      std::printf("\n");
    }
    std::printf("Accuracy: %.2f%%\n", 100.0 * metrics.accuracy);
    std::printf("%-10s %8s %8s %10s\n", "Class", "TPR", "FPR", "Precision");
    auto fmt = [](const std::optional<double>& v) {
      char buf[16];
      if (v)
        std::snprintf(buf, sizeof buf, "%.3f", *v);
      else
        std::snprintf(buf, sizeof buf, "undef");
      return std::string(buf);
    };
    for (int i = 0; i < c; ++i)
      std::printf("%-10s %8s %8s %10s\n", metrics.matrix.classes[i].c_str(),
                  fmt(metrics.per_class[i].tpr).c_str(), fmt(metrics.per_class[i].fpr).c_str(),
                  fmt(metrics.per_class[i].precision).c_str());
  }
}

}  // namespace
