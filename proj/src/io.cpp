#include "pentrack/io.hpp"

#include "pentrack/errors.hpp"

#include "json_fields.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace pentrack {

namespace {

using nlohmann::json;
using detail::Fields;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) {
      break;
    }
    start = comma + 1;
  }
  return out;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) {
      ++i;
    }
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) {
      ++j;
    }
    if (j > i) {
      out.push_back(line.substr(i, j - i));
    }
    i = j;
  }
  return out;
}

bool looks_numeric(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size();
}

// Calls `row(fields, line_number)` for each non-empty CSV line. The first
// non-empty line is skipped as a header when the field at `probe` is not a
// number.
template <typename Row>
void for_each_csv_row(std::istream& in, const std::string& source, std::size_t probe, Row row) {
  std::string line;
  std::size_t number = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++number;
    const std::string_view body = trim(line);
    if (body.empty()) {
      continue;
    }
    const auto fields = split_csv(body);
    if (first) {
      first = false;
      if (probe < fields.size() && !looks_numeric(fields[probe])) {
        continue;
      }
    }
    row(fields, number);
  }
  if (in.bad()) {
    throw ParseError(source, number, "read error");
  }
}

void expect_fields(std::span<const std::string_view> fields, std::size_t n,
                   const std::string& source, std::size_t line) {
  if (fields.size() != n) {
    throw ParseError(source, line,
                     "expected " + std::to_string(n) + " fields, got " + std::to_string(fields.size()));
  }
}

BoundingBox parse_box(std::span<const std::string_view> f, const std::string& source,
                      std::size_t line) {
  const double x = parse_decimal(f[0], source, line);
  const double y = parse_decimal(f[1], source, line);
  const double w = parse_decimal(f[2], source, line);
  const double h = parse_decimal(f[3], source, line);
  if (!(w > 0.0) || !(h > 0.0)) {
    throw ParseError(source, line, "box width and height must be positive");
  }
  return BoundingBox::from_xywh(x, y, w, h);
}

void put_box(std::ostream& out, const BoundingBox& b) {
  out << format_decimal(b.x_min) << ',' << format_decimal(b.y_min) << ','
      << format_decimal(b.width()) << ',' << format_decimal(b.height());
}

std::string check_camera(std::string_view field, const std::string& source, std::size_t line) {
  if (field != kCeiling && field != kAngled) {
    throw ParseError(source, line, "unknown camera '" + std::string(field) + "'");
  }
  return std::string(field);
}

std::string shortest(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) {
    throw Error("cannot format number");
  }
  return std::string(buf.data(), ptr);
}

// Non-comment whitespace tokens, one vector per line.
std::vector<std::pair<std::size_t, std::vector<std::string_view>>> token_lines(
    const std::vector<std::string>& lines) {
  std::vector<std::pair<std::size_t, std::vector<std::string_view>>> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string_view body = trim(lines[i]);
    if (body.empty() || body.front() == '#') {
      continue;
    }
    out.emplace_back(i + 1, split_ws(body));
  }
  return out;
}

std::vector<std::string> all_lines(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    lines.push_back(line);
  }
  return lines;
}

void parse_camera(const Fields& parent, const std::string& key, CameraView& view) {
  if (!parent.has(key)) {
    return;
  }
  const Fields f(parent.at(key), parent.name(key));
  f.only({"focal_px", "cx", "cy", "position", "rotation", "image_width", "image_height",
          "roi_y_min", "roi_y_max"});
  double focal = view.model.k(0, 0);
  double cx = view.model.k(0, 2);
  double cy = view.model.k(1, 2);
  Eigen::Vector3d position = -view.model.r.transpose() * view.model.t;
  Eigen::Matrix3d r = view.model.r;
  f.number("focal_px", focal);
  f.number("cx", cx);
  f.number("cy", cy);
  if (f.has("position")) {
    const json& p = f.at("position");
    if (!p.is_array() || p.size() != 3 ||
        !std::all_of(p.begin(), p.end(), [](const json& e) { return e.is_number(); })) {
      throw ConfigInvalid(f.name("position"), "expected 3 numbers");
    }
    position = {p[0].get<double>(), p[1].get<double>(), p[2].get<double>()};
  }
  if (f.has("rotation")) {
    const json& m = f.at("rotation");
    bool ok = m.is_array() && m.size() == 3;
    for (std::size_t i = 0; ok && i < 3; ++i) {
      ok = m[i].is_array() && m[i].size() == 3 &&
           std::all_of(m[i].begin(), m[i].end(), [](const json& e) { return e.is_number(); });
    }
    if (!ok) {
      throw ConfigInvalid(f.name("rotation"), "expected 3 rows of 3 numbers");
    }
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        r(i, j) = m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].get<double>();
      }
    }
  }
  f.integer("image_width", view.image_width);
  f.integer("image_height", view.image_height);
  f.number("roi_y_min", view.roi_y_min);
  f.number("roi_y_max", view.roi_y_max);
  view.model = CameraModel::from_pose(focal, cx, cy, position, r);
}

}  // namespace

std::string format_decimal(double v) {
  if (!std::isfinite(v)) {
    throw Error("cannot write non-finite value");
  }
  std::array<char, 400> buf{};
  const auto [ptr, ec] =
      std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed, 6);
  if (ec != std::errc()) {
    throw Error("cannot format number");
  }
  std::string s(buf.data(), ptr);
  if (s.find('.') != std::string::npos) {
    while (s.back() == '0') {
      s.pop_back();
    }
    if (s.back() == '.') {
      s.pop_back();
    }
  }
  if (s == "-0") {
    s = "0";
  }
  return s;
}

double parse_decimal(std::string_view field, const std::string& source, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw ParseError(source, line, "not a number: '" + std::string(field) + "'");
  }
  if (!std::isfinite(v)) {
    throw ParseError(source, line, "non-finite number");
  }
  return v;
}

long parse_integer(std::string_view field, const std::string& source, std::size_t line) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw ParseError(source, line, "not an integer: '" + std::string(field) + "'");
  }
  return v;
}

std::vector<Detection> read_detections(std::istream& in, const std::string& source) {
  std::vector<Detection> out;
  for_each_csv_row(in, source, 0, [&](const auto& f, std::size_t line) {
    expect_fields(f, 6, source, line);
    Detection d;
    d.frame = parse_integer(f[0], source, line);
    d.box = parse_box(std::span(f).subspan(1, 4), source, line);
    d.confidence = parse_decimal(f[5], source, line);
    if (!out.empty() && d.frame < out.back().frame) {
      throw ParseError(source, line, "frames not sorted");
    }
    out.push_back(std::move(d));
  });
  return out;
}

void write_detections(std::ostream& out, std::span<const Detection> detections) {
  for (const auto& d : detections) {
    out << d.frame << ',';
    put_box(out, d.box);
    out << ',' << format_decimal(d.confidence) << '\n';
  }
}

void read_appearance(std::istream& in, const std::string& source,
                     std::vector<Detection>& detections) {
  // (frame, index within frame) -> position in `detections`
  std::map<std::pair<long, long>, std::size_t> slot;
  for (std::size_t i = 0, k = 0; i < detections.size(); ++i) {
    k = (i > 0 && detections[i - 1].frame == detections[i].frame) ? k + 1 : 0;
    slot[{detections[i].frame, static_cast<long>(k)}] = i;
  }
  Eigen::Index dim = -1;
  for_each_csv_row(in, source, 0, [&](const auto& f, std::size_t line) {
    if (f.size() < 3) {
      throw ParseError(source, line, "appearance row needs at least one component");
    }
    const long frame = parse_integer(f[0], source, line);
    const long index = parse_integer(f[1], source, line);
    const auto it = slot.find({frame, index});
    if (it == slot.end()) {
      throw ParseError(source, line, "no such detection");
    }
    Eigen::VectorXd v(static_cast<Eigen::Index>(f.size() - 2));
    for (std::size_t k = 2; k < f.size(); ++k) {
      v(static_cast<Eigen::Index>(k - 2)) = parse_decimal(f[k], source, line);
    }
    if (dim >= 0 && v.size() != dim) {
      throw ParseError(source, line, "appearance dimension changes");
    }
    dim = v.size();
    const double norm = v.norm();
    if (!(norm > 0.0)) {
      throw ParseError(source, line, "zero appearance vector");
    }
    detections[it->second].appearance = v / norm;
  });
}

void write_appearance(std::ostream& out, std::span<const Detection> detections) {
  long k = 0;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    k = (i > 0 && detections[i - 1].frame == detections[i].frame) ? k + 1 : 0;
    const auto& v = detections[i].appearance;
    if (v.size() == 0) {
      continue;
    }
    out << detections[i].frame << ',' << k;
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      out << ',' << format_decimal(v(j));
    }
    out << '\n';
  }
}

std::vector<LocalTrackRecord> read_local_tracks(std::istream& in, const std::string& source) {
  std::vector<LocalTrackRecord> out;
  for_each_csv_row(in, source, 0, [&](const auto& f, std::size_t line) {
    expect_fields(f, 6, source, line);
    LocalTrackRecord r;
    r.frame = parse_integer(f[0], source, line);
    r.local_id = parse_integer(f[1], source, line);
    r.box = parse_box(std::span(f).subspan(2, 4), source, line);
    if (!out.empty() && r.frame < out.back().frame) {
      throw ParseError(source, line, "frames not sorted");
    }
    out.push_back(r);
  });
  return out;
}

void write_local_tracks(std::ostream& out, std::span<const LocalTrackRecord> tracks) {
  for (const auto& r : tracks) {
    out << r.frame << ',' << r.local_id << ',';
    put_box(out, r.box);
    out << '\n';
  }
}

std::vector<GlobalTrackRecord> read_global_tracks(std::istream& in, const std::string& source) {
  std::vector<GlobalTrackRecord> out;
  for_each_csv_row(in, source, 1, [&](const auto& f, std::size_t line) {
    expect_fields(f, 7, source, line);
    GlobalTrackRecord r;
    r.camera = check_camera(f[0], source, line);
    r.frame = parse_integer(f[1], source, line);
    r.global_id = parse_integer(f[2], source, line);
    r.box = parse_box(std::span(f).subspan(3, 4), source, line);
    out.push_back(std::move(r));
  });
  return out;
}

void write_global_tracks(std::ostream& out, std::span<const GlobalTrackRecord> tracks) {
  for (const auto& r : tracks) {
    out << r.camera << ',' << r.frame << ',' << r.global_id << ',';
    put_box(out, r.box);
    out << '\n';
  }
}

std::vector<AnnotatedBox> read_ground_truth(std::istream& in, const std::string& source) {
  return to_annotated(read_global_tracks(in, source));
}

void write_ground_truth(std::ostream& out, std::span<const AnnotatedBox> boxes) {
  for (const auto& b : boxes) {
    out << b.camera << ',' << b.frame << ',' << b.identity << ',';
    put_box(out, b.box);
    out << '\n';
  }
}

std::vector<MatchRecord> read_matches(std::istream& in, const std::string& source) {
  std::vector<MatchRecord> out;
  for_each_csv_row(in, source, 0, [&](const auto& f, std::size_t line) {
    expect_fields(f, 12, source, line);
    MatchRecord m;
    m.ceiling_frame = parse_integer(f[0], source, line);
    m.ceiling_id = parse_integer(f[1], source, line);
    m.angled_frame = parse_integer(f[2], source, line);
    m.angled_id = parse_integer(f[3], source, line);
    m.ceiling_box = parse_box(std::span(f).subspan(4, 4), source, line);
    m.angled_box = parse_box(std::span(f).subspan(8, 4), source, line);
    out.push_back(m);
  });
  return out;
}

void write_matches(std::ostream& out, std::span<const MatchRecord> matches) {
  for (const auto& m : matches) {
    out << m.ceiling_frame << ',' << m.ceiling_id << ',' << m.angled_frame << ',' << m.angled_id
        << ',';
    put_box(out, m.ceiling_box);
    out << ',';
    put_box(out, m.angled_box);
    out << '\n';
  }
}

Homography read_homography(std::istream& in, const std::string& source) {
  const auto lines = all_lines(in);
  std::array<double, 9> values{};
  std::size_t n = 0;
  std::size_t last_line = 0;
  for (const auto& [line, tokens] : token_lines(lines)) {
    for (const auto& t : tokens) {
      if (n == values.size()) {
        throw ParseError(source, line, "more than 9 numbers");
      }
      values[n++] = parse_decimal(t, source, line);
    }
    last_line = line;
  }
  if (n != values.size()) {
    throw ParseError(source, last_line, "expected 9 numbers, got " + std::to_string(n));
  }
  try {
    return Homography::from_row_major(values);
  } catch (const SingularHomography& e) {
    throw ParseError(source, last_line, e.what());
  }
}

void write_homography(std::ostream& out, const Homography& h, const std::string& comment) {
  if (!comment.empty()) {
    out << "# " << comment << '\n';
  }
  for (int r = 0; r < 3; ++r) {
    out << shortest(h(r, 0)) << ' ' << shortest(h(r, 1)) << ' ' << shortest(h(r, 2)) << '\n';
  }
}

std::vector<Correspondence> read_correspondences(std::istream& in, const std::string& source) {
  const auto lines = all_lines(in);
  std::vector<Correspondence> out;
  for (const auto& [line, tokens] : token_lines(lines)) {
    if (tokens.size() != 4) {
      throw ParseError(source, line, "expected 4 numbers");
    }
    out.push_back({{parse_decimal(tokens[0], source, line), parse_decimal(tokens[1], source, line)},
                   {parse_decimal(tokens[2], source, line), parse_decimal(tokens[3], source, line)}});
  }
  return out;
}

void write_correspondences(std::ostream& out, std::span<const Correspondence> pairs) {
  for (const auto& c : pairs) {
    out << shortest(c.src.x) << ' ' << shortest(c.src.y) << ' ' << shortest(c.dst.x) << ' '
        << shortest(c.dst.y) << '\n';
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << contents;
  out.close();
  if (!out) {
    throw Error("cannot write " + path.string());
  }
}

PenConfig parse_pen_config(const std::string& json_text, const std::string& field_prefix) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigInvalid(field_prefix.empty() ? "<root>" : field_prefix, e.what());
  }
  const Fields f(doc, field_prefix);
  f.only({"floor_width", "floor_depth", "n_agents", "footprint_length", "footprint_width",
          "min_separation", "max_speed", "heading_sigma", "fps", "duration",
          "angled_frame_offset", "correspondence_grid", "seed", "noise", "ceiling", "angled"});

  PenConfig cfg = PenConfig::defaults();
  f.number("floor_width", cfg.floor_width);
  f.number("floor_depth", cfg.floor_depth);
  if (cfg.floor_width > 0.0 && cfg.floor_depth > 0.0) {
    place_default_cameras(cfg);
  }
  f.integer("n_agents", cfg.n_agents);
  f.number("footprint_length", cfg.footprint_length);
  f.number("footprint_width", cfg.footprint_width);
  f.number("min_separation", cfg.min_separation);
  f.number("max_speed", cfg.max_speed);
  f.number("heading_sigma", cfg.heading_sigma);
  f.number("fps", cfg.fps);
  f.integer("duration", cfg.duration);
  f.integer("angled_frame_offset", cfg.angled_frame_offset);
  f.integer("correspondence_grid", cfg.correspondence_grid);
  f.integer("seed", cfg.seed);
  if (f.has("noise")) {
    const Fields n(f.at("noise"), f.name("noise"));
    n.only({"dropout_prob", "jitter_sigma", "false_positive_rate", "merge_prob", "split_prob"});
    n.number("dropout_prob", cfg.noise.dropout_prob);
    n.number("jitter_sigma", cfg.noise.jitter_sigma);
    n.number("false_positive_rate", cfg.noise.false_positive_rate);
    n.number("merge_prob", cfg.noise.merge_prob);
    n.number("split_prob", cfg.noise.split_prob);
  }
  parse_camera(f, "ceiling", cfg.ceiling);
  parse_camera(f, "angled", cfg.angled);

  try {
    cfg.validate();
  } catch (const ConfigInvalid& e) {
    if (field_prefix.empty()) {
      throw;
    }
    const std::string what = e.what();
    const auto colon = what.find("': ");
    throw ConfigInvalid(field_prefix + "." + e.field(),
                        colon == std::string::npos ? what : what.substr(colon + 3));
  }
  return cfg;
}

std::vector<std::string> write_bundle(const SceneBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::vector<std::pair<std::string, std::string>> members = {
      {"ceiling_detections", "ceiling_detections.csv"},
      {"angled_detections", "angled_detections.csv"},
      {"ground_truth", "ground_truth.csv"},
      {"h_ceiling_to_angled", "h_ceiling_to_angled.txt"},
      {"correspondences", "correspondences.txt"},
  };
  std::ostringstream text[5];
  write_detections(text[0], bundle.ceiling_detections);
  write_detections(text[1], bundle.angled_detections);
  write_ground_truth(text[2], bundle.ground_truth);
  write_homography(text[3], bundle.ceiling_to_angled, "ceiling -> angled, ground plane");
  write_correspondences(text[4], bundle.correspondences);

  std::ostringstream manifest;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < members.size(); ++i) {
    write_text_file(dir / members[i].second, text[i].str());
    manifest << members[i].first << ' ' << members[i].second << '\n';
    names.push_back(members[i].second);
  }
  write_text_file(dir / kBundleManifest, manifest.str());
  names.push_back(kBundleManifest);
  return names;
}

}  // namespace pentrack
