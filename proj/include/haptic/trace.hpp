#pragma once

#include <charconv>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>  // nlohmann/json, vendored

#include "haptic/error.hpp"
#include "haptic/geometry.hpp"
#include "haptic/proxy.hpp"

namespace haptic {

/// Per-tick state published to traces and the live bridge.
struct Snapshot {
  std::int64_t tick = 0;
  Point3 hip{};
  Point3 proxy_center{};
  double proxy_radius = 0.0;
  Contact contact = Contact::Free;
  Vec3 force{};
  double depth_mag = 0.0;
  double friction_scale = 1.0;
  double sigma_hat = 0.0;

  friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

enum class TraceFormat { Csv, Jsonl };

inline constexpr const char* kTraceColumns[] = {
    "tick",    "hip_x",   "hip_y",   "hip_z", "proxy_x",        "proxy_y",  "proxy_z", "radius",
    "contact", "force_x", "force_y", "force_z", "depth", "friction_scale", "sigma_hat"};

namespace detail {

/// Shortest representation that parses back to the same double.
inline void put_number(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

inline void put_number(std::string& out, std::int64_t v) {
  char buf[24];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

}  // namespace detail

inline std::string csv_header() {
  std::string out;
  for (const char* c : kTraceColumns) {
    if (!out.empty()) out += ',';
    out += c;
  }
  return out;
}

inline std::string to_csv_row(const Snapshot& s) {
  std::string out;
  out.reserve(256);
  auto num = [&](double v) {
    out += ',';
    detail::put_number(out, v);
  };
  detail::put_number(out, s.tick);
  num(s.hip.x);
  num(s.hip.y);
  num(s.hip.z);
  num(s.proxy_center.x);
  num(s.proxy_center.y);
  num(s.proxy_center.z);
  num(s.proxy_radius);
  out += ',';
  out += to_string(s.contact);
  num(s.force.x);
  num(s.force.y);
  num(s.force.z);
  num(s.depth_mag);
  num(s.friction_scale);
  num(s.sigma_hat);
  return out;
}

inline nlohmann::ordered_json to_json(const Snapshot& s) {
  nlohmann::ordered_json j;
  j["tick"] = s.tick;
  j["hip_x"] = s.hip.x;
  j["hip_y"] = s.hip.y;
  j["hip_z"] = s.hip.z;
  j["proxy_x"] = s.proxy_center.x;
  j["proxy_y"] = s.proxy_center.y;
  j["proxy_z"] = s.proxy_center.z;
  j["radius"] = s.proxy_radius;
  j["contact"] = std::string(to_string(s.contact));
  j["force_x"] = s.force.x;
  j["force_y"] = s.force.y;
  j["force_z"] = s.force.z;
  j["depth"] = s.depth_mag;
  j["friction_scale"] = s.friction_scale;
  j["sigma_hat"] = s.sigma_hat;
  return j;
}

inline Snapshot snapshot_from_json(const nlohmann::json& j) {
  Snapshot s;
  s.tick = j.at("tick").get<std::int64_t>();
  s.hip = {j.at("hip_x").get<double>(), j.at("hip_y").get<double>(), j.at("hip_z").get<double>()};
  s.proxy_center = {j.at("proxy_x").get<double>(), j.at("proxy_y").get<double>(),
                    j.at("proxy_z").get<double>()};
  s.proxy_radius = j.at("radius").get<double>();
  const auto contact = contact_from_string(j.at("contact").get<std::string>());
  if (!contact) throw ParseError("unknown contact value", 0);
  s.contact = *contact;
  s.force = {j.at("force_x").get<double>(), j.at("force_y").get<double>(),
             j.at("force_z").get<double>()};
  s.depth_mag = j.at("depth").get<double>();
  s.friction_scale = j.at("friction_scale").get<double>();
  s.sigma_hat = j.at("sigma_hat").get<double>();
  return s;
}

/// One row/object per snapshot. CSV always starts with the header line.
/// Throws Error if the sink reports a write failure.
inline void write_trace(std::span<const Snapshot> trace, TraceFormat format, std::ostream& sink) {
  if (format == TraceFormat::Csv) {
    sink << csv_header() << '\n';
    for (const auto& s : trace) sink << to_csv_row(s) << '\n';
  } else {
    for (const auto& s : trace) sink << to_json(s).dump() << '\n';
  }
  sink.flush();
  if (!sink) throw Error("failed to write trace");
}

inline std::vector<Snapshot> read_trace_jsonl(std::istream& in) {
  std::vector<Snapshot> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(snapshot_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return out;
}

}  // namespace haptic
