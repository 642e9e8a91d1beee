#include "aurec/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace aurec {

std::string region_name(Region r) { return r == Region::upper ? "upper" : "lower"; }

Region parse_region(const std::string& s) {
  if (s == "upper") return Region::upper;
  if (s == "lower") return Region::lower;
  throw data_error("unknown region '" + s + "' (expected upper or lower)");
}

CropSize crop_size(Region r) {
  // 52x157 for the upper face strip, 57x102 for the lower.
  return r == Region::upper ? CropSize{52, 157} : CropSize{57, 102};
}

bool is_known_expression(const std::string& s) {
  for (const char* name : kExpressionNames)
    if (s == name) return true;
  return false;
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

Manifest parse_manifest(const std::string& text) {
  Manifest manifest;
  std::set<std::string> seen_paths;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 6)
      throw data_error("manifest line " + std::to_string(line_no) + ": expected 6 tab-separated fields, got " +
                       std::to_string(fields.size()));
    ManifestRecord rec;
    rec.sequence_dir = trim(fields[0]);
    rec.landmark_file = trim(fields[1]);
    if (rec.sequence_dir.empty() || rec.landmark_file.empty())
      throw data_error("manifest line " + std::to_string(line_no) + ": empty path");
    if (!seen_paths.insert(rec.sequence_dir).second)
      throw data_error("manifest line " + std::to_string(line_no) + ": duplicate sequence path '" +
                       rec.sequence_dir + "'");
    try {
      rec.region = parse_region(trim(fields[2]));
      const std::string au_list = trim(fields[3]);
      if (!au_list.empty()) {
        for (const auto& tok : split(au_list, ',')) {
          const std::string t = trim(tok);
          if (t.empty()) throw data_error("empty AU id");
          size_t pos = 0;
          const int au = std::stoi(t, &pos);
          if (pos != t.size() || au < 0) throw data_error("bad AU id '" + t + "'");
          rec.truth.aus.insert(au);
        }
      }
      rec.truth.apex_intensity = parse_double(trim(fields[4]));
      if (!(rec.truth.apex_intensity > 0.0 && rec.truth.apex_intensity <= 1.0))
        throw data_error("apex intensity must be in (0,1]");
      const std::string expr = trim(fields[5]);
      if (expr != "-") {
        if (!is_known_expression(expr)) throw data_error("unknown expression '" + expr + "'");
        rec.truth.expression = expr;
      }
      if (rec.truth.expression && rec.truth.aus.empty())
        throw data_error("expression sequence with empty AU set");
    } catch (const data_error& e) {
      throw data_error("manifest line " + std::to_string(line_no) + ": " + e.what());
    } catch (const std::exception& e) {
      throw data_error("manifest line " + std::to_string(line_no) + ": malformed field (" + e.what() + ")");
    }
    manifest.records.push_back(std::move(rec));
  }
  return manifest;
}

std::string serialize_manifest(const Manifest& manifest) {
  std::string out;
  for (const auto& rec : manifest.records) {
    out += rec.sequence_dir;
    out += '\t';
    out += rec.landmark_file;
    out += '\t';
    out += region_name(rec.region);
    out += '\t';
    bool first = true;
    for (int au : rec.truth.aus) {
      if (!first) out += ',';
      out += std::to_string(au);
      first = false;
    }
    out += '\t';
    out += format_double(rec.truth.apex_intensity);
    out += '\t';
    out += rec.truth.expression ? *rec.truth.expression : "-";
    out += '\n';
  }
  return out;
}

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open manifest '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str());
}

Frame read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open image '" + path.string() + "'");
  std::string magic;
  in >> magic;
  if (magic != "P5") throw data_error("'" + path.string() + "': not a binary PGM (P5)");

  auto next_token = [&]() -> long {
    // PGM headers allow '#' comments between tokens.
    for (;;) {
      int c = in.peek();
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
      } else if (std::isspace(c)) {
        in.get();
      } else {
        break;
      }
    }
    long v = -1;
    in >> v;
    return v;
  };

  const long cols = next_token();
  const long rows = next_token();
  const long maxval = next_token();
  if (!in || cols < 1 || rows < 1) throw data_error("'" + path.string() + "': bad PGM header");
  if (maxval != 255) throw data_error("'" + path.string() + "': PGM maxval must be 255");
  in.get();  // single whitespace after maxval

  std::vector<unsigned char> raw(size_t(rows) * cols);
  in.read(reinterpret_cast<char*>(raw.data()), raw.size());
  if (size_t(in.gcount()) != raw.size())
    throw data_error("'" + path.string() + "': truncated PGM payload");

  Frame frame{int(rows), int(cols)};
  for (size_t i = 0; i < raw.size(); ++i) frame.a[i] = raw[i] / 255.0;
  return frame;
}

void write_pgm(const fs::path& path, const Frame& frame) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write image '" + path.string() + "'");
  out << "P5\n" << frame.cols << " " << frame.rows << "\n255\n";
  std::vector<unsigned char> raw(frame.a.size());
  for (size_t i = 0; i < raw.size(); ++i) {
    const double v = std::clamp(frame.a[i], 0.0, 1.0);
    raw[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), raw.size());
  if (!out) throw data_error("failed writing image '" + path.string() + "'");
}

std::vector<Point> read_landmarks(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open landmark file '" + path.string() + "'");
  std::vector<Point> points;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    std::istringstream ls(stripped);
    Point p;
    if (!(ls >> p.x >> p.y))
      throw data_error("landmark file '" + path.string() + "' line " + std::to_string(line_no) +
                       ": expected 'x y'");
    points.push_back(p);
  }
  if (points.empty()) throw data_error("landmark file '" + path.string() + "' is empty");
  return points;
}

void write_landmarks(const fs::path& path, const std::vector<Point>& points) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write landmark file '" + path.string() + "'");
  for (const auto& p : points) out << format_double(p.x) << " " << format_double(p.y) << "\n";
}

ImageSequence load_sequence(const ManifestRecord& record, const PointSubsets& subsets) {
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(record.sequence_dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm")
      files.push_back(entry.path());
  }
  if (ec) throw data_error("cannot read sequence directory '" + record.sequence_dir + "'");
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  if (files.size() < 2)
    throw data_error("sequence too short in '" + record.sequence_dir + "' (need at least 2 frames)");

  ImageSequence seq;
  seq.region = record.region;
  seq.frames.reserve(files.size());
  for (const auto& f : files) {
    Frame frame = read_pgm(f);
    if (!seq.frames.empty() && !frame.same_shape(seq.frames.front()))
      throw data_error("frame dimension mismatch in '" + record.sequence_dir + "' at '" +
                       f.filename().string() + "'");
    seq.frames.push_back(std::move(frame));
  }

  const std::vector<Point> all = read_landmarks(record.landmark_file);
  const auto& subset = subsets.for_region(record.region);
  if (subset) {
    for (int idx : *subset) {
      if (idx < 0 || idx >= int(all.size()))
        throw data_error("landmark count mismatch: '" + record.landmark_file + "' has " +
                         std::to_string(all.size()) + " points, subset needs index " +
                         std::to_string(idx));
      seq.initial_landmarks.push_back(all[idx]);
    }
  } else {
    seq.initial_landmarks = all;
  }
  return seq;
}

double bilinear_sample(const Frame& frame, double x, double y) {
  // Clamp-to-edge sampling; callers keep coordinates in-frame.
  x = std::clamp(x, 0.0, double(frame.cols - 1));
  y = std::clamp(y, 0.0, double(frame.rows - 1));
  const int x0 = std::min(int(x), frame.cols - 2 >= 0 ? frame.cols - 2 : 0);
  const int y0 = std::min(int(y), frame.rows - 2 >= 0 ? frame.rows - 2 : 0);
  const int x1 = std::min(x0 + 1, frame.cols - 1);
  const int y1 = std::min(y0 + 1, frame.rows - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = frame(y0, x0) * (1.0 - fx) + frame(y0, x1) * fx;
  const double bot = frame(y1, x0) * (1.0 - fx) + frame(y1, x1) * fx;
  return top * (1.0 - fy) + bot * fy;
}

Frame crop_region(const Frame& frame, const std::vector<Point>& landmarks, Region region,
                  double margin) {
  if (landmarks.empty()) throw data_error("crop_region: no landmarks");
  double min_x = landmarks[0].x, max_x = landmarks[0].x;
  double min_y = landmarks[0].y, max_y = landmarks[0].y;
  for (const auto& p : landmarks) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const double w = max_x - min_x;
  const double h = max_y - min_y;
  if (w <= 0.0 || h <= 0.0) throw data_error("crop_region: degenerate region");

  min_x = std::max(0.0, min_x - margin * w);
  max_x = std::min(double(frame.cols - 1), max_x + margin * w);
  min_y = std::max(0.0, min_y - margin * h);
  max_y = std::min(double(frame.rows - 1), max_y + margin * h);

  const CropSize size = crop_size(region);
  Frame out(size.rows, size.cols);
  for (int r = 0; r < size.rows; ++r) {
    const double sy = min_y + (max_y - min_y) * r / (size.rows - 1);
    for (int c = 0; c < size.cols; ++c) {
      const double sx = min_x + (max_x - min_x) * c / (size.cols - 1);
      out(r, c) = bilinear_sample(frame, sx, sy);
    }
  }
  return out;
}

}  // namespace aurec
