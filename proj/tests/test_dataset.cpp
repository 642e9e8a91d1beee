#include <filesystem>
#include <fstream>

#include "aurec/dataset.hpp"
#include "doctest.h"

using namespace aurec;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("aurec_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("manifest: empty document") {
  CHECK(parse_manifest("").records.empty());
  CHECK(parse_manifest("# only a comment\n\n").records.empty());
}

TEST_CASE("manifest: one valid line round-trips") {
  const std::string line = "seqs/a\tlm/a.txt\tupper\t1,2\t1\tsurprise\n";
  const Manifest m = parse_manifest(line);
  REQUIRE(m.records.size() == 1);
  const auto& rec = m.records[0];
  CHECK(rec.sequence_dir == "seqs/a");
  CHECK(rec.landmark_file == "lm/a.txt");
  CHECK(rec.region == Region::upper);
  CHECK(rec.truth.aus == std::set<int>{1, 2});
  CHECK(rec.truth.apex_intensity == 1.0);
  CHECK(rec.truth.expression == "surprise");

  const Manifest again = parse_manifest(serialize_manifest(m));
  REQUIRE(again.records.size() == 1);
  CHECK(again.records[0].sequence_dir == rec.sequence_dir);
  CHECK(again.records[0].truth.aus == rec.truth.aus);
  CHECK(again.records[0].truth.apex_intensity == rec.truth.apex_intensity);
  CHECK(again.records[0].truth.expression == rec.truth.expression);
}

TEST_CASE("manifest: errors carry line numbers") {
  CHECK_THROWS_WITH_AS(parse_manifest("a\tb\tmiddle\t1\t1\t-\n"),
                       doctest::Contains("unknown region"), data_error);
  CHECK_THROWS_WITH_AS(parse_manifest("a\tb\tupper\t1\t1\t-\na\tc\tupper\t2\t1\t-\n"),
                       doctest::Contains("duplicate sequence path"), data_error);
  CHECK_THROWS_WITH_AS(parse_manifest("a\tb\tupper\t1\t1\n"), doctest::Contains("line 1"),
                       data_error);
  CHECK_THROWS_AS(parse_manifest("a\tb\tupper\t1\t1.5\t-\n"), data_error);
  CHECK_THROWS_AS(parse_manifest("a\tb\tupper\t1\t1\tjoyful\n"), data_error);
}

TEST_CASE("pgm round trip") {
  const fs::path dir = temp_dir("pgm");
  Frame frame(4, 6);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 6; ++c) frame(r, c) = (r * 6 + c) / 255.0;
  write_pgm(dir / "f.pgm", frame);
  const Frame back = read_pgm(dir / "f.pgm");
  REQUIRE(back.rows == 4);
  REQUIRE(back.cols == 6);
  for (size_t i = 0; i < frame.a.size(); ++i) CHECK(back.a[i] == doctest::Approx(frame.a[i]));
}

TEST_CASE("load_sequence orders frames and validates") {
  const fs::path dir = temp_dir("seq");
  fs::create_directories(dir / "s");
  Frame frame(10, 10, 0.5);
  write_pgm(dir / "s" / "b.pgm", frame);
  write_pgm(dir / "s" / "a.pgm", frame);
  write_landmarks(dir / "lm.txt", {{2, 2}, {5, 5}, {8, 8}});

  ManifestRecord rec;
  rec.sequence_dir = (dir / "s").string();
  rec.landmark_file = (dir / "lm.txt").string();
  rec.region = Region::upper;

  const ImageSequence seq = load_sequence(rec);
  CHECK(seq.frame_count() == 2);
  CHECK(seq.initial_landmarks.size() == 3);

  SUBCASE("single frame rejected") {
    fs::remove(dir / "s" / "b.pgm");
    CHECK_THROWS_WITH_AS(load_sequence(rec), doctest::Contains("too short"), data_error);
  }
  SUBCASE("dimension mismatch rejected") {
    write_pgm(dir / "s" / "c.pgm", Frame(11, 10, 0.5));
    CHECK_THROWS_WITH_AS(load_sequence(rec), doctest::Contains("dimension mismatch"), data_error);
  }
  SUBCASE("landmark subset selection") {
    PointSubsets subsets;
    subsets.upper = std::vector<int>{0, 2};
    const ImageSequence sel = load_sequence(rec, subsets);
    CHECK(sel.initial_landmarks.size() == 2);
    CHECK(sel.initial_landmarks[1].x == 8.0);
    subsets.upper = std::vector<int>{0, 7};
    CHECK_THROWS_WITH_AS(load_sequence(rec, subsets), doctest::Contains("landmark count"),
                         data_error);
  }
}

TEST_CASE("crop_region size depends only on the region tag") {
  Frame big(200, 220, 0.25);
  Frame small(60, 70, 0.25);
  const std::vector<Point> points = {{10, 10}, {40, 12}, {12, 38}, {45, 42}};
  for (const Frame* frame : {&big, &small}) {
    const Frame upper = crop_region(*frame, points, Region::upper);
    CHECK(upper.rows == 52);
    CHECK(upper.cols == 157);
    const Frame lower = crop_region(*frame, points, Region::lower);
    CHECK(lower.rows == 57);
    CHECK(lower.cols == 102);
  }
}

TEST_CASE("crop of a constant frame is that constant") {
  Frame frame(80, 90, 0.37);
  const Frame crop = crop_region(frame, {{10, 10}, {60, 15}, {20, 55}}, Region::lower);
  for (double v : crop.a) CHECK(v == doctest::Approx(0.37).epsilon(1e-12));
}

TEST_CASE("crop with degenerate landmarks fails") {
  Frame frame(50, 50, 0.5);
  CHECK_THROWS_WITH_AS(crop_region(frame, {{10, 10}, {10, 10}}, Region::upper),
                       doctest::Contains("degenerate"), data_error);
  // Collinear on a vertical line: zero width.
  CHECK_THROWS_AS(crop_region(frame, {{10, 10}, {10, 30}, {10, 40}}, Region::upper), data_error);
}
