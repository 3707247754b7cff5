#pragma once

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "haptic/error.hpp"
#include "haptic/geometry.hpp"

namespace haptic {

struct Bounds {
  Point3 min;
  Point3 max;

  bool contains(const Point3& p) const {
    return p.x >= min.x && p.y >= min.y && p.z >= min.z && p.x <= max.x && p.y <= max.y &&
           p.z <= max.z;
  }
  Point3 center() const { return (min + max) * 0.5; }
  Vec3 extent() const { return max - min; }
};

/// Immutable, non-empty set of finite points.
class PointCloud {
 public:
  explicit PointCloud(std::vector<Point3> points) : points_(std::move(points)) {
    if (points_.empty()) throw EmptyCloudError();
    bounds_ = {points_.front(), points_.front()};
    for (const auto& p : points_) {
      if (!is_finite(p)) throw GeometryError("point cloud contains a non-finite coordinate");
      bounds_.min = {std::min(bounds_.min.x, p.x), std::min(bounds_.min.y, p.y),
                     std::min(bounds_.min.z, p.z)};
      bounds_.max = {std::max(bounds_.max.x, p.x), std::max(bounds_.max.y, p.y),
                     std::max(bounds_.max.z, p.z)};
    }
  }

  std::span<const Point3> points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  const Bounds& bounds() const { return bounds_; }

 private:
  std::vector<Point3> points_;
  Bounds bounds_{};
};

inline PointCloud apply_transform(const PointCloud& cloud, const AffineTransform& t) {
  if (!t.is_finite()) throw GeometryError("transform is not finite");
  std::vector<Point3> out;
  out.reserve(cloud.size());
  for (const auto& p : cloud.points()) out.push_back(t.apply(p));
  return PointCloud(std::move(out));
}

enum class CloudFormat { XyzAscii, PlyAscii };

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

/// Parses a finite double or throws ParseError tagged with `line`.
inline double parse_coordinate(std::string_view tok, std::size_t line) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    throw ParseError("invalid number '" + std::string(tok) + "'", line);
  if (!std::isfinite(v)) throw ParseError("non-finite coordinate '" + std::string(tok) + "'", line);
  return v;
}

inline std::vector<Point3> read_xyz(std::istream& in) {
  std::vector<Point3> points;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto tok = split_ws(line);
    if (tok.size() < 3) throw ParseError("expected 'x y z'", line_no);
    points.push_back({parse_coordinate(tok[0], line_no), parse_coordinate(tok[1], line_no),
                      parse_coordinate(tok[2], line_no)});
  }
  return points;
}

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<std::string> properties;
  bool has_list = false;
};

inline std::vector<Point3> read_ply(std::istream& in) {
  std::string raw;
  std::size_t line_no = 0;

  auto next_line = [&](std::string_view what) -> std::string_view {
    if (!std::getline(in, raw)) throw ParseError("unexpected end of file in " + std::string(what), line_no + 1);
    ++line_no;
    return trim(raw);
  };

  if (next_line("header") != "ply") throw ParseError("missing 'ply' magic", line_no);

  std::vector<PlyElement> elements;
  bool saw_format = false;
  for (;;) {
    const auto line = next_line("header");
    if (line == "end_header") break;
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "format") {
      if (tok.size() < 2 || tok[1] != "ascii")
        throw ParseError("only ASCII PLY is supported", line_no);
      saw_format = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) throw ParseError("malformed element declaration", line_no);
      PlyElement e;
      e.name = std::string(tok[1]);
      std::size_t count = 0;
      const auto [p, ec] = std::from_chars(tok[2].data(), tok[2].data() + tok[2].size(), count);
      if (ec != std::errc{} || p != tok[2].data() + tok[2].size())
        throw ParseError("invalid element count", line_no);
      e.count = count;
      elements.push_back(std::move(e));
    } else if (tok[0] == "property") {
      if (elements.empty()) throw ParseError("property before any element", line_no);
      if (tok.size() >= 2 && tok[1] == "list") {
        elements.back().has_list = true;
        elements.back().properties.emplace_back(tok.back());
      } else if (tok.size() == 3) {
        elements.back().properties.emplace_back(tok[2]);
      } else {
        throw ParseError("malformed property declaration", line_no);
      }
    } else {
      throw ParseError("unknown header keyword '" + std::string(tok[0]) + "'", line_no);
    }
  }
  if (!saw_format) throw ParseError("missing format line", line_no);

  std::vector<Point3> points;
  for (const auto& e : elements) {
    if (e.name != "vertex") {
      for (std::size_t i = 0; i < e.count; ++i) next_line(e.name + " data");
      continue;
    }
    const auto find = [&](std::string_view n) -> std::size_t {
      const auto it = std::find(e.properties.begin(), e.properties.end(), n);
      if (it == e.properties.end())
        throw ParseError("vertex element lacks property '" + std::string(n) + "'", line_no);
      return static_cast<std::size_t>(it - e.properties.begin());
    };
    if (e.has_list) throw ParseError("list properties on vertex element are not supported", line_no);
    const std::size_t ix = find("x"), iy = find("y"), iz = find("z");
    points.reserve(points.size() + e.count);
    for (std::size_t i = 0; i < e.count; ++i) {
      const auto tok = split_ws(next_line("vertex data"));
      if (tok.size() != e.properties.size())
        throw ParseError("expected " + std::to_string(e.properties.size()) + " vertex fields", line_no);
      points.push_back({parse_coordinate(tok[ix], line_no), parse_coordinate(tok[iy], line_no),
                        parse_coordinate(tok[iz], line_no)});
    }
  }
  return points;
}

}  // namespace detail

/// Reads vertex positions; other attributes are ignored.
inline PointCloud load_cloud(std::istream& in, CloudFormat format) {
  auto points = format == CloudFormat::XyzAscii ? detail::read_xyz(in) : detail::read_ply(in);
  if (points.empty()) throw EmptyCloudError();
  return PointCloud(std::move(points));
}

/// `.ply` selects PLY, anything else is treated as XYZ text.
inline CloudFormat format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".ply" ? CloudFormat::PlyAscii : CloudFormat::XyzAscii;
}

inline PointCloud load_cloud_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open cloud file '" + path.string() + "'", 0);
  return load_cloud(in, format_from_path(path));
}

}  // namespace haptic
