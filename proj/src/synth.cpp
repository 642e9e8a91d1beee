#include "aurec/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace fs = std::filesystem;

namespace aurec {

const SynthAu& SynthSpec::au_by_id(int id) const {
  for (const auto& au : aus)
    if (au.id == id) return au;
  throw data_error("synth spec: combination references undefined AU " + std::to_string(id));
}

SynthSpec builtin_synth_spec() {
  SynthSpec spec;
  spec.region = Region::upper;
  // Fields sit on distinct grid cells and pull in distinct directions so
  // singles and additive pairs stay separable.
  spec.aus = {
      {1, {26.0, 26.0}, {0.0, -7.0}, 14.0, 0.12},   // inner raise, left
      {2, {70.0, 26.0}, {0.0, -7.0}, 14.0, 0.12},   // outer raise, right
      {4, {48.0, 26.0}, {-5.0, 5.0}, 13.0, 0.10},   // pull down and in
      {5, {26.0, 46.0}, {6.0, 0.0}, 13.0, 0.10},    // slide right, lower left
      {6, {70.0, 46.0}, {0.0, 6.0}, 13.0, 0.12},    // push down, lower right
      {7, {48.0, 52.0}, {-6.0, -4.0}, 14.0, 0.10},  // diagonal, bottom middle
  };
  spec.classes = {
      {{1}, std::string("surprise")}, {{2}, std::string("gloomy")},
      {{4}, std::string("angry")},    {{5}, std::string("fear")},
      {{6}, std::string("happy")},    {{7}, std::string("disgust")},
      {{1, 2}, std::string("surprise")}, {{1, 4}, std::string("angry")},
      {{2, 5}, std::string("fear")},     {{4, 6}, std::string("happy")},
      {{5, 7}, std::string("disgust")},  {{6, 7}, std::string("gloomy")},
  };
  return spec;
}

std::vector<Point> synth_landmarks(const SynthSpec& spec) {
  std::vector<Point> points;
  const double x0 = spec.grid_margin, x1 = spec.base_cols - 1 - spec.grid_margin;
  const double y0 = spec.grid_margin, y1 = spec.base_rows - 1 - spec.grid_margin;
  for (int r = 0; r < spec.grid_rows; ++r)
    for (int c = 0; c < spec.grid_cols; ++c)
      points.push_back(Point{x0 + (x1 - x0) * c / (spec.grid_cols - 1),
                             y0 + (y1 - y0) * r / (spec.grid_rows - 1)});
  return points;
}

Point synth_field_at(const SynthSpec& spec, const SynthClass& cls, const Point& p) {
  Point d{0.0, 0.0};
  for (int id : cls.au_ids) {
    const SynthAu& au = spec.au_by_id(id);
    const double dx = p.x - au.center.x, dy = p.y - au.center.y;
    const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * au.falloff * au.falloff));
    d.x += w * au.direction.x;
    d.y += w * au.direction.y;
  }
  return d;
}

namespace {

double contrast_bump(const SynthSpec& spec, const SynthClass& cls, double x, double y) {
  double m = 0.0;
  for (int id : cls.au_ids) {
    const SynthAu& au = spec.au_by_id(id);
    const double dx = x - au.center.x, dy = y - au.center.y;
    m += au.contrast * std::exp(-(dx * dx + dy * dy) / (2.0 * au.falloff * au.falloff));
  }
  return m;
}

// Smooth random texture: white noise mildly blurred, rescaled into
// [0.15, 0.85]. Plenty of local gradient for the tracker. The shared
// component keeps held-out sequences inside the appearance distribution.
Frame make_texture(int rows, int cols, std::uint64_t shared_seed, std::uint64_t indiv_seed,
                   double variation) {
  std::mt19937_64 shared_rng(shared_seed), indiv_rng(indiv_seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Frame img(rows, cols);
  for (double& v : img.a) v = (1.0 - variation) * u(shared_rng) + variation * u(indiv_rng);
  for (int pass = 0; pass < 2; ++pass) {
    Frame tmp(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        const int cl = std::max(0, c - 1), cr = std::min(cols - 1, c + 1);
        tmp(r, c) = 0.25 * img(r, cl) + 0.5 * img(r, c) + 0.25 * img(r, cr);
      }
    for (int r = 0; r < rows; ++r) {
      const int rl = std::max(0, r - 1), rr = std::min(rows - 1, r + 1);
      for (int c = 0; c < cols; ++c)
        img(r, c) = 0.25 * tmp(rl, c) + 0.5 * tmp(r, c) + 0.25 * tmp(rr, c);
    }
  }
  double lo = img.a[0], hi = img.a[0];
  for (double v : img.a) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (double& v : img.a) v = 0.15 + 0.7 * (v - lo) / (hi - lo);
  return img;
}

// Class displacement field sampled on the pixel grid; the per-frame warp
// solves against the bilinearly interpolated grid so landmark motion and
// texture motion agree exactly.
struct FieldGrid {
  int rows = 0, cols = 0;
  std::vector<Point> d;

  Point at(double x, double y) const {
    x = std::clamp(x, 0.0, double(cols - 1));
    y = std::clamp(y, 0.0, double(rows - 1));
    const int x0 = std::min(int(x), cols - 2), y0 = std::min(int(y), rows - 2);
    const double fx = x - x0, fy = y - y0;
    auto lerp = [&](auto get) {
      const double top = get(y0, x0) * (1 - fx) + get(y0, x0 + 1) * fx;
      const double bot = get(y0 + 1, x0) * (1 - fx) + get(y0 + 1, x0 + 1) * fx;
      return top * (1 - fy) + bot * fy;
    };
    return Point{lerp([&](int r, int c) { return d[size_t(r) * cols + c].x; }),
                 lerp([&](int r, int c) { return d[size_t(r) * cols + c].y; })};
  }
};

FieldGrid make_field_grid(const SynthSpec& spec, const SynthClass& cls) {
  FieldGrid grid;
  grid.rows = spec.base_rows;
  grid.cols = spec.base_cols;
  grid.d.resize(size_t(grid.rows) * grid.cols);
  for (int r = 0; r < grid.rows; ++r)
    for (int c = 0; c < grid.cols; ++c)
      grid.d[size_t(r) * grid.cols + c] =
          synth_field_at(spec, cls, Point{double(c), double(r)});
  return grid;
}

// Source coordinates for one frame: for every destination pixel p find p0
// with p0 + s*D(p0) = p, so the texture at p0 lands exactly at p0 + s*D(p0)
// and the landmarks move by exactly s times the field.
std::vector<Point> make_warp_map(const FieldGrid& field, double s) {
  std::vector<Point> src(field.d.size());
  for (int r = 0; r < field.rows; ++r) {
    for (int c = 0; c < field.cols; ++c) {
      Point p0{double(c), double(r)};
      for (int iter = 0; iter < 8; ++iter) {
        const Point d = field.at(p0.x, p0.y);
        p0 = Point{c - s * d.x, r - s * d.y};
      }
      src[size_t(r) * field.cols + c] = p0;
    }
  }
  return src;
}

std::string class_tag(const SynthClass& cls) {
  std::string tag = "au";
  for (size_t i = 0; i < cls.au_ids.size(); ++i) {
    if (i) tag += "+";
    tag += std::to_string(cls.au_ids[i]);
  }
  return tag;
}

}  // namespace

SynthSpec parse_synth_spec(const std::string& text) {
  SynthSpec spec;
  spec.aus.clear();
  spec.classes.clear();
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key) || key[0] == '#') continue;
    auto fail = [&](const std::string& why) {
      throw data_error("synth spec line " + std::to_string(line_no) + ": " + why);
    };
    if (key == "t") {
      if (!(ls >> spec.t) || spec.t < 2) fail("bad t");
    } else if (key == "noise") {
      if (!(ls >> spec.noise_sigma) || spec.noise_sigma < 0) fail("bad noise");
    } else if (key == "region") {
      std::string r;
      ls >> r;
      spec.region = parse_region(r);
    } else if (key == "base") {
      if (!(ls >> spec.base_rows >> spec.base_cols)) fail("bad base dims");
    } else if (key == "grid") {
      if (!(ls >> spec.grid_rows >> spec.grid_cols >> spec.grid_margin)) fail("bad grid");
    } else if (key == "texture_seed") {
      if (!(ls >> spec.texture_seed)) fail("bad texture_seed");
    } else if (key == "texture_variation") {
      if (!(ls >> spec.texture_variation) || spec.texture_variation < 0 ||
          spec.texture_variation > 1)
        fail("bad texture_variation");
    } else if (key == "illumination") {
      if (!(ls >> spec.illumination) || spec.illumination < 0) fail("bad illumination");
    } else if (key == "field_jitter") {
      if (!(ls >> spec.field_jitter) || spec.field_jitter < 0) fail("bad field_jitter");
    } else if (key == "au") {
      SynthAu au;
      if (!(ls >> au.id >> au.center.x >> au.center.y >> au.direction.x >> au.direction.y >>
            au.falloff >> au.contrast))
        fail("bad au line (want: au <id> <cx> <cy> <dx> <dy> <falloff> <contrast>)");
      spec.aus.push_back(au);
    } else if (key == "class") {
      SynthClass cls;
      std::string ids, expr;
      if (!(ls >> ids >> expr)) fail("bad class line (want: class <id[+id...]> <expression|->)");
      std::istringstream is(ids);
      std::string tok;
      while (std::getline(is, tok, '+')) cls.au_ids.push_back(std::stoi(tok));
      if (expr != "-") {
        if (!is_known_expression(expr)) fail("unknown expression '" + expr + "'");
        cls.expression = expr;
      }
      spec.classes.push_back(std::move(cls));
    } else {
      fail("unknown key '" + key + "'");
    }
  }
  if (spec.aus.empty() || spec.classes.empty()) throw data_error("synth spec: no AUs or classes");
  for (const auto& cls : spec.classes)
    for (int id : cls.au_ids) spec.au_by_id(id);
  return spec;
}

SynthSpec load_synth_spec(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open synth spec '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_synth_spec(buf.str());
}

fs::path synth_generate(const SynthSpec& spec, const fs::path& out_dir, int n_per_class,
                        std::uint64_t seed, bool force) {
  if (n_per_class < 0) throw data_error("synth_generate: negative n_per_class");
  if (fs::exists(out_dir) && !fs::is_empty(out_dir) && !force)
    throw data_error("output directory '" + out_dir.string() + "' exists; use force to overwrite");
  fs::create_directories(out_dir);

  const std::vector<Point> landmarks = synth_landmarks(spec);
  Manifest manifest;

  Vec ramps(spec.t);
  for (int f = 0; f < spec.t; ++f) ramps[f] = double(f) / (spec.t - 1);

  for (size_t ci = 0; ci < spec.classes.size(); ++ci) {
    const SynthClass& cls = spec.classes[ci];
    const FieldGrid field = make_field_grid(spec, cls);

    for (int s = 0; s < n_per_class; ++s) {
      const std::string name = class_tag(cls) + "_" + std::to_string(s);
      const fs::path seq_dir = out_dir / name;
      fs::create_directories(seq_dir);
      const std::uint64_t seq_seed = mix_seed(seed, ci * 100003 + s);
      const Frame base = make_texture(spec.base_rows, spec.base_cols, spec.texture_seed,
                                      mix_seed(spec.texture_seed, seq_seed),
                                      spec.texture_variation);
      std::mt19937_64 seq_rng(mix_seed(seq_seed, 0xa11ce));
      std::uniform_real_distribution<double> unit(-1.0, 1.0);
      const double fscale = 1.0 + spec.field_jitter * unit(seq_rng);
      const double gain = 1.0 + spec.illumination * unit(seq_rng);
      const double tilt_x = spec.illumination * unit(seq_rng);
      const double tilt_y = spec.illumination * unit(seq_rng);
      std::normal_distribution<double> gauss(0.0, spec.noise_sigma);

      for (int f = 0; f < spec.t; ++f) {
        Frame frame(spec.base_rows, spec.base_cols);
        const std::vector<Point> map = make_warp_map(field, ramps[f] * fscale);
        for (int r = 0; r < spec.base_rows; ++r) {
          for (int c = 0; c < spec.base_cols; ++c) {
            const Point& p0 = map[size_t(r) * spec.base_cols + c];
            double v = bilinear_sample(base, p0.x, p0.y);
            v *= gain + tilt_x * (double(c) / spec.base_cols - 0.5) +
                 tilt_y * (double(r) / spec.base_rows - 0.5);
            v *= 1.0 + ramps[f] * contrast_bump(spec, cls, c, r);
            if (spec.noise_sigma > 0.0) v += gauss(seq_rng);
            frame(r, c) = std::clamp(v, 0.0, 1.0);
          }
        }
        char fname[32];
        std::snprintf(fname, sizeof fname, "frame_%03d.pgm", f);
        write_pgm(seq_dir / fname, frame);
      }
      const fs::path lm_path = out_dir / (name + ".landmarks");
      write_landmarks(lm_path, landmarks);

      ManifestRecord rec;
      rec.sequence_dir = seq_dir.string();
      rec.landmark_file = lm_path.string();
      rec.region = spec.region;
      rec.truth.aus.insert(cls.au_ids.begin(), cls.au_ids.end());
      rec.truth.apex_intensity = 1.0;
      rec.truth.expression = cls.expression;
      manifest.records.push_back(std::move(rec));
    }
  }

  const fs::path manifest_path = out_dir / "manifest.tsv";
  std::ofstream out(manifest_path);
  if (!out) throw data_error("cannot write manifest '" + manifest_path.string() + "'");
  out << "# seq_dir\tlandmarks\tregion\taus\tapex_intensity\texpression\n";
  out << serialize_manifest(manifest);
  return manifest_path;
}

}  // namespace aurec
