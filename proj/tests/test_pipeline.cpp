#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "aurec/pipeline.hpp"
#include "doctest.h"

using namespace aurec;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("aurec_pipe_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Two easily separable synthetic AUs, small frames, cheap appearance bank.
SynthSpec tiny_spec() {
  SynthSpec spec;
  spec.region = Region::upper;
  spec.t = 6;
  spec.base_rows = 64;
  spec.base_cols = 80;
  spec.grid_rows = 3;
  spec.grid_cols = 3;
  spec.grid_margin = 14;
  spec.noise_sigma = 0.0;
  spec.aus = {
      {1, {24.0, 24.0}, {0.0, -6.0}, 12.0, 0.1},
      {2, {56.0, 40.0}, {6.0, 0.0}, 12.0, 0.1},
  };
  spec.classes = {
      {{1}, std::string("surprise")},
      {{2}, std::string("happy")},
  };
  return spec;
}

PipelineConfig tiny_config() {
  PipelineConfig config;
  config.seed = 9;
  config.jobs = 2;
  config.geo_k = 6;
  config.gabor.scales = 2;
  config.gabor.orientations = 2;
  config.downsample = 4;
  config.k2d = 4;
  config.kfinal = 40;
  config.fusion.epochs = 400;
  return config;
}

// Trained once and shared across the pipeline test cases.
struct E2eFixture {
  fs::path dir;
  fs::path train_manifest;
  fs::path test_manifest;
  PipelineConfig config;
  ModelBundle bundle;
};

const E2eFixture& e2e() {
  static const E2eFixture fixture = [] {
    E2eFixture f;
    f.dir = temp_dir("e2e");
    // 11 sequences per class gives 44 frames per 3-state bucket, enough for
    // the kfinal=40 appearance basis.
    f.train_manifest = synth_generate(tiny_spec(), f.dir / "train", 11, 21);
    f.test_manifest = synth_generate(tiny_spec(), f.dir / "test", 3, 22);
    f.config = tiny_config();
    f.bundle = train_bundle(load_manifest(f.train_manifest), f.config);
    return f;
  }();
  return fixture;
}

}  // namespace

TEST_CASE("config parsing applies overrides and rejects unknown keys") {
  PipelineConfig config;
  apply_config_text(config,
                    "# comment\n"
                    "seed = 42\n"
                    "geo.k = 7\n"
                    "hmm.states.au4 = 5\n"
                    "fusion.learning_rate = 0.1\n"
                    "points.upper = 0, 2, 5\n");
  CHECK(config.seed == 42);
  CHECK(config.geo_k == 7);
  CHECK(config.states_for(4) == 5);
  CHECK(config.states_for(1) == 3);
  CHECK(config.fusion.learning_rate == 0.1);
  REQUIRE(config.subsets.upper.has_value());
  CHECK(*config.subsets.upper == std::vector<int>{0, 2, 5});

  CHECK_THROWS_AS(apply_config_text(config, "bogus.key = 1\n"), data_error);
  CHECK_THROWS_AS(apply_config_text(config, "hmm.states.au4 = 4\n"), data_error);
  CHECK_THROWS_AS(apply_config_text(config, "geo.k 7\n"), data_error);
}

TEST_CASE("synth_generate writes a loadable dataset") {
  const fs::path dir = temp_dir("synth");
  SynthSpec spec = tiny_spec();
  const fs::path manifest_path = synth_generate(spec, dir / "data", 2, 11);
  const Manifest manifest = load_manifest(manifest_path);
  REQUIRE(manifest.records.size() == 4);  // 2 classes x 2

  const ImageSequence seq = load_sequence(manifest.records[0]);
  CHECK(seq.frame_count() == 6);
  CHECK(seq.initial_landmarks.size() == 9);

  CHECK_THROWS_WITH_AS(synth_generate(spec, dir / "data", 1, 11), doctest::Contains("force"),
                       data_error);
  CHECK_NOTHROW(synth_generate(spec, dir / "data", 1, 11, true));

  const fs::path empty = synth_generate(spec, dir / "empty", 0, 11);
  CHECK(load_manifest(empty).records.empty());
  CHECK(slurp(empty).rfind("#", 0) == 0);
}

TEST_CASE("synth tracked intensity follows the ramp (pure translation, no noise)") {
  const fs::path dir = temp_dir("ramp");
  SynthSpec spec = tiny_spec();
  // A near-constant field over the grid: huge falloff approximates translation.
  spec.aus = {{1, {32.0, 32.0}, {5.0, 2.0}, 1000.0, 0.0}};
  spec.classes = {{{1}, std::nullopt}};
  const fs::path manifest_path = synth_generate(spec, dir / "data", 1, 3);
  const Manifest manifest = load_manifest(manifest_path);
  const ImageSequence seq = load_sequence(manifest.records[0]);
  const LandmarkTrajectory traj = track_grid(seq);
  for (int f = 0; f < 6; ++f) {
    const double ramp = f / 5.0;
    CHECK(std::fabs(intensity(traj, f) - ramp) < 0.05);
  }
}

TEST_CASE("synth additive combinations sum the fields") {
  SynthSpec spec = tiny_spec();
  SynthClass combo;
  combo.au_ids = {1, 2};
  const Point p{30.0, 30.0};
  const Point a = synth_field_at(spec, spec.classes[0], p);
  const Point b = synth_field_at(spec, spec.classes[1], p);
  const Point sum = synth_field_at(spec, combo, p);
  CHECK(sum.x == doctest::Approx(a.x + b.x).epsilon(1e-12));
  CHECK(sum.y == doctest::Approx(a.y + b.y).epsilon(1e-12));
}

TEST_CASE("synth spec parser round trip and errors") {
  const std::string text =
      "t 7\n"
      "noise 0.02\n"
      "region lower\n"
      "base 60 70\n"
      "grid 3 3 12\n"
      "au 9 30 30 0 -5 11 0.1\n"
      "au 10 40 40 4 0 11 0.1\n"
      "class 9 surprise\n"
      "class 9+10 -\n";
  const SynthSpec spec = parse_synth_spec(text);
  CHECK(spec.t == 7);
  CHECK(spec.noise_sigma == 0.02);
  CHECK(spec.region == Region::lower);
  CHECK(spec.aus.size() == 2);
  REQUIRE(spec.classes.size() == 2);
  CHECK(spec.classes[1].au_ids == std::vector<int>{9, 10});
  CHECK_THROWS_AS(parse_synth_spec("t 5\n"), data_error);
  CHECK_THROWS_AS(parse_synth_spec("au 1 0 0 1 1 10 0\nclass 2 -\n"), data_error);
}

TEST_CASE("end-to-end training learns the synthetic classes") {
  const auto& f = e2e();
  CHECK(f.bundle.au_list == std::vector<int>{1, 2});
  CHECK(f.bundle.geo_models.size() == 2);
  CHECK(f.bundle.app_models.size() == 2);
  CHECK(f.bundle.fusion.inputs == 4);

  const Manifest train_m = load_manifest(f.train_manifest);
  const Prediction pred =
      predict_sequence(f.bundle, load_sequence(train_m.records[0], f.config.subsets));
  CHECK(pred.aus == train_m.records[0].truth.aus);

  const EvalReport report = evaluate_bundle(f.bundle, load_manifest(f.test_manifest), 2);
  CHECK(report.au_metrics.recognition_rate >= 0.8);
  int total = 0;
  for (const auto& t : report.tallies) total += t.sequences;
  CHECK(total == 6);
}

TEST_CASE("bundle round trip is bit-exact") {
  const auto& f = e2e();
  const fs::path p1 = f.dir / "a.bundle", p2 = f.dir / "b.bundle";
  save_bundle(p1, f.bundle);
  const ModelBundle loaded = load_bundle(p1);
  save_bundle(p2, loaded);
  CHECK(slurp(p1) == slurp(p2));
  CHECK(loaded.au_list == f.bundle.au_list);
  CHECK(loaded.fusion.w1 == f.bundle.fusion.w1);
  CHECK(loaded.fusion.input_mean == f.bundle.fusion.input_mean);
  CHECK(loaded.geo_models[0].state_gmms[0].components[0].mean ==
        f.bundle.geo_models[0].state_gmms[0].components[0].mean);
  CHECK(loaded.config.kfinal == f.bundle.config.kfinal);
}

TEST_CASE("training determinism across job counts") {
  const auto& f = e2e();
  PipelineConfig serial = f.config;
  serial.jobs = 1;
  const ModelBundle again = train_bundle(load_manifest(f.train_manifest), serial);
  const fs::path p1 = f.dir / "j2.bundle", p2 = f.dir / "j1.bundle";
  save_bundle(p1, f.bundle);
  save_bundle(p2, again);
  // The config snapshot records the job count; neutralize it before the
  // byte comparison.
  std::string s1 = slurp(p1), s2 = slurp(p2);
  const auto fix = [](std::string& s) {
    const size_t pos = s.find("\"jobs\":");
    s.erase(pos, s.find(',', pos) - pos);
  };
  fix(s1);
  fix(s2);
  CHECK(s1 == s2);
}

TEST_CASE("corrupt and versioned bundle files are rejected") {
  const auto& f = e2e();
  const fs::path p = f.dir / "c.bundle";
  save_bundle(p, f.bundle);
  std::string text = slurp(p);
  {
    std::ofstream out(f.dir / "trunc.bundle", std::ios::binary);
    out << text.substr(0, text.size() / 2);
  }
  CHECK_THROWS_WITH_AS(load_bundle(f.dir / "trunc.bundle"), doctest::Contains("corrupt"),
                       data_error);
  {
    std::ofstream out(f.dir / "future.bundle", std::ios::binary);
    out << "aurec-bundle 99\n{}";
  }
  CHECK_THROWS_WITH_AS(load_bundle(f.dir / "future.bundle"), doctest::Contains("version"),
                       data_error);
  {
    std::ofstream out(f.dir / "junk.bundle", std::ios::binary);
    out << "not a bundle";
  }
  CHECK_THROWS_AS(load_bundle(f.dir / "junk.bundle"), data_error);
}

TEST_CASE("rule rows and expression metrics") {
  const auto& f = e2e();
  const Manifest m = load_manifest(f.train_manifest);
  const auto rows = rule_rows_from_manifest(f.bundle, m, true, 2);
  REQUIRE(rows.size() == m.records.size());
  RuleConfig rc;
  const RuleList rl = induce_rules(rows, rc);
  int correct = 0;
  for (const auto& row : rows)
    if (classify_expression(row.intensities, rl) == row.label) ++correct;
  CHECK(correct == int(rows.size()));  // separable synthetic classes

  ModelBundle with_rules = f.bundle;
  with_rules.rule_list = rl;
  const EvalReport r2 = evaluate_bundle(with_rules, load_manifest(f.test_manifest), 2);
  REQUIRE(r2.expression_metrics.has_value());
  CHECK(r2.expression_metrics->accuracy >= 0.8);

  // Ground-truth rows: present AUs carry the apex intensity.
  const auto truth_rows = rule_rows_from_manifest(f.bundle, m, false, 2);
  CHECK(truth_rows[0].intensities[f.bundle.au_slot(1)] ==
        (m.records[0].truth.aus.count(1) ? 1.0 : 0.0));
}

TEST_CASE("train validations") {
  const fs::path dir = temp_dir("val");
  const fs::path manifest_path = synth_generate(tiny_spec(), dir / "data", 2, 31);

  CHECK_THROWS_AS(train_bundle(Manifest{}, tiny_config()), data_error);

  Manifest mixed = load_manifest(manifest_path);
  mixed.records[1].region = Region::lower;
  CHECK_THROWS_WITH_AS(train_bundle(mixed, tiny_config()), doctest::Contains("region"),
                       data_error);

  Manifest broken = load_manifest(manifest_path);
  broken.records[0].sequence_dir = "/nonexistent/path";
  CHECK_THROWS_WITH_AS(train_bundle(broken, tiny_config()),
                       doctest::Contains("/nonexistent/path"), data_error);
}

TEST_CASE("predict surfaces the static-sequence error") {
  const auto& f = e2e();
  const Manifest manifest = load_manifest(f.train_manifest);
  const fs::path still = f.dir / "still";
  fs::create_directories(still);
  const ImageSequence src = load_sequence(manifest.records[0]);
  write_pgm(still / "a.pgm", src.frames[0]);
  write_pgm(still / "b.pgm", src.frames[0]);
  CHECK_THROWS_WITH_AS(predict_files(f.bundle, still.string(), manifest.records[0].landmark_file),
                       doctest::Contains("static sequence"), numeric_error);
}

TEST_CASE("predict is deterministic") {
  const auto& f = e2e();
  const Manifest manifest = load_manifest(f.test_manifest);
  const ImageSequence seq = load_sequence(manifest.records[0], f.config.subsets);
  const Prediction a = predict_sequence(f.bundle, seq);
  const Prediction b = predict_sequence(f.bundle, seq);
  CHECK(a.outputs == b.outputs);
  CHECK(a.raw_scores == b.raw_scores);
  CHECK(a.aus == b.aus);
}
