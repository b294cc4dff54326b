#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "facade/error.hpp"
#include "facade/geometry.hpp"

namespace facade {

/// UAV state at one timestamp. Altitude is relative to the facade's ground line.
struct Pose {
  double t = 0.0;
  double altitude_m = 0.0;
  double roll_rad = 0.0;
  double pitch_rad = 0.0;
  double yaw_rad = 0.0;

  bool operator==(const Pose&) const = default;
};

/// Pinhole camera with the optical center at the image center.
struct CameraModel {
  double focal_px = 1.0;
  int width_px = 1;
  int height_px = 1;

  bool operator==(const CameraModel&) const = default;
};

inline void validate(const CameraModel& cam) {
  if (!(cam.focal_px > 0.0) || !std::isfinite(cam.focal_px)) {
    throw Error(ErrorKind::Validation, "focal_px must be positive");
  }
  if (cam.width_px < 1 || cam.height_px < 1) {
    throw Error(ErrorKind::Validation, "image dimensions must be at least 1 px");
  }
}

inline void validate(const Pose& p) {
  for (double v : {p.t, p.altitude_m, p.roll_rad, p.pitch_rad, p.yaw_rad}) {
    if (!std::isfinite(v)) throw Error(ErrorKind::Validation, "pose values must be finite");
  }
  constexpr double pi = std::numbers::pi;
  if (std::abs(p.roll_rad) >= pi || std::abs(p.pitch_rad) >= pi ||
      std::abs(p.yaw_rad) >= pi) {
    throw Error(ErrorKind::Validation, "pose angles must lie in (-pi, pi)");
  }
}

struct FrameRef {
  std::string id;
  double t_s = 0.0;
  std::filesystem::path image;
};

struct SequenceMeta {
  double depth_m = 1.0;
  CameraModel camera;
  std::vector<FrameRef> frames;
};

inline void validate(const SequenceMeta& meta) {
  if (!(meta.depth_m > 0.0) || !std::isfinite(meta.depth_m)) {
    throw Error(ErrorKind::Validation, "depth_m must be positive");
  }
  validate(meta.camera);
  for (std::size_t i = 1; i < meta.frames.size(); ++i) {
    if (!(meta.frames[i].t_s > meta.frames[i - 1].t_s)) {
      throw Error(ErrorKind::Ordering, "frame timestamps must be strictly increasing (frame '" +
                                           meta.frames[i].id + "')");
    }
  }
}

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    return std::nullopt;
  }
  return v;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Telemetry CSV
// ---------------------------------------------------------------------------

inline constexpr std::string_view kTelemetryHeader = "t_s,altitude_m,roll_rad,pitch_rad,yaw_rad";

/// Parses the telemetry CSV. Blank lines are ignored; timestamps must be
/// strictly increasing.
inline std::vector<Pose> parse_telemetry(std::string_view text) {
  std::vector<Pose> out;
  std::size_t line_no = 0;
  bool seen_header = false;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!seen_header) {
      if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.remove_prefix(3);
      if (line != kTelemetryHeader) {
        throw Error(ErrorKind::Parse, "line 1: expected header '" +
                                          std::string(kTelemetryHeader) + "'");
      }
      seen_header = true;
      continue;
    }
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    double fields[5];
    std::size_t n = 0;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      const auto cell = line.substr(start, comma == std::string_view::npos ? line.npos
                                                                             : comma - start);
      if (n == 5) {
        throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": too many fields");
      }
      const auto v = detail::parse_double(cell);
      if (!v || !std::isfinite(*v)) {
        throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": bad number '" +
                                          std::string(cell) + "'");
      }
      fields[n++] = *v;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (n != 5) {
      throw Error(ErrorKind::Parse,
                  "line " + std::to_string(line_no) + ": expected 5 fields, got " +
                      std::to_string(n));
    }
    Pose p{fields[0], fields[1], fields[2], fields[3], fields[4]};
    try {
      validate(p);
    } catch (const Error& e) {
      throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!out.empty() && !(p.t > out.back().t)) {
      throw Error(ErrorKind::Ordering, "line " + std::to_string(line_no) +
                                           ": timestamp " + detail::format_double(p.t) +
                                           " does not increase");
    }
    out.push_back(p);
  }
  if (!seen_header) throw Error(ErrorKind::Parse, "telemetry is missing its header line");
  if (out.empty()) throw Error(ErrorKind::EmptyLog, "telemetry log has no samples");
  return out;
}

inline std::string serialize_telemetry(const std::vector<Pose>& poses) {
  std::string out(kTelemetryHeader);
  out.push_back('\n');
  for (const auto& p : poses) {
    out += detail::format_double(p.t) + ',' + detail::format_double(p.altitude_m) + ',' +
           detail::format_double(p.roll_rad) + ',' + detail::format_double(p.pitch_rad) + ',' +
           detail::format_double(p.yaw_rad) + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pose synchronization
// ---------------------------------------------------------------------------

enum class SyncMode { Linear, Nearest };

struct SyncOptions {
  double slack_s = 0.1;
  SyncMode mode = SyncMode::Linear;
};

/// Pose at a frame timestamp. Linear interpolation between the bracketing
/// samples; timestamps up to slack_s outside the log clamp to the endpoint.
inline Pose sync_pose(double frame_t, const std::vector<Pose>& log, SyncOptions opts = {},
                      std::string_view frame_id = {}) {
  if (log.empty()) throw Error(ErrorKind::EmptyLog, "cannot synchronize against an empty log");
  const double lo = log.front().t - opts.slack_s;
  const double hi = log.back().t + opts.slack_s;
  if (!(frame_t >= lo && frame_t <= hi)) {
    throw Error(ErrorKind::Sync, "frame '" + std::string(frame_id) + "' at t=" +
                                     detail::format_double(frame_t) +
                                     " outside telemetry range [" + detail::format_double(lo) +
                                     ", " + detail::format_double(hi) + "]");
  }
  Pose out;
  if (frame_t <= log.front().t) {
    out = log.front();
  } else if (frame_t >= log.back().t) {
    out = log.back();
  } else {
    const auto it = std::lower_bound(log.begin(), log.end(), frame_t,
                                     [](const Pose& p, double t) { return p.t < t; });
    if (it->t == frame_t) return *it;
    const Pose& b = *it;
    const Pose& a = *(it - 1);
    if (opts.mode == SyncMode::Nearest) {
      out = (frame_t - a.t <= b.t - frame_t) ? a : b;
    } else {
      const double u = (frame_t - a.t) / (b.t - a.t);
      const auto lerp = [u](double x, double y) { return x + u * (y - x); };
      out.altitude_m = lerp(a.altitude_m, b.altitude_m);
      out.roll_rad = lerp(a.roll_rad, b.roll_rad);
      out.pitch_rad = lerp(a.pitch_rad, b.pitch_rad);
      out.yaw_rad = lerp(a.yaw_rad, b.yaw_rad);
    }
  }
  out.t = frame_t;
  return out;
}

// ---------------------------------------------------------------------------
// Detections / annotations JSON
// ---------------------------------------------------------------------------

struct FrameDetections {
  std::string id;
  std::string image;
  std::vector<PixelBox> boxes;

  bool operator==(const FrameDetections&) const = default;
};

/// Fraction of its own size by which a box may hang over the image border.
inline constexpr double kEdgeTolerance = 0.10;

inline void check_in_bounds(const PixelBox& b, const CameraModel& cam) {
  const double tx = kEdgeTolerance * b.w;
  const double ty = kEdgeTolerance * b.h;
  if (b.x < -tx || b.y < -ty || b.x + b.w > cam.width_px + tx ||
      b.y + b.h > cam.height_px + ty) {
    throw Error(ErrorKind::Validation, "box exceeds image bounds beyond the edge tolerance");
  }
}

/// Parses a detections (or annotations) document. Boxes are validated
/// against the camera when one is given; frame ids are checked against
/// known_ids when that set is non-empty.
inline std::vector<FrameDetections> load_detections(
    std::string_view text, const std::optional<CameraModel>& camera = std::nullopt,
    const std::set<std::string>& known_ids = {}) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::Parse, std::string("detections JSON: ") + e.what());
  }
  std::vector<FrameDetections> out;
  try {
    const auto& frames = doc.at("frames");
    if (!frames.is_array()) throw Error(ErrorKind::Parse, "'frames' must be an array");
    std::set<std::string> seen;
    for (const auto& f : frames) {
      FrameDetections fd;
      fd.id = f.at("id").get<std::string>();
      fd.image = f.value("image", std::string{});
      if (!known_ids.empty() && !known_ids.contains(fd.id)) {
        throw Error(ErrorKind::UnknownFrame, "unknown frame id '" + fd.id + "'");
      }
      if (!seen.insert(fd.id).second) {
        throw Error(ErrorKind::Validation, "duplicate frame id '" + fd.id + "'");
      }
      for (const auto& jb : f.value("boxes", nlohmann::json::array())) {
        PixelBox b{jb.at("x").get<double>(), jb.at("y").get<double>(),
                   jb.at("w").get<double>(), jb.at("h").get<double>(),
                   jb.value("score", 1.0)};
        if (b.w <= 0.0 || b.h <= 0.0) {
          throw Error(ErrorKind::Validation, "frame '" + fd.id + "': box has non-positive size");
        }
        try {
          validate(b);
          if (camera) check_in_bounds(b, *camera);
        } catch (const Error& e) {
          throw Error(ErrorKind::Validation, "frame '" + fd.id + "': " + e.what());
        }
        fd.boxes.push_back(b);
      }
      out.push_back(std::move(fd));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("detections JSON: ") + e.what());
  }
  return out;
}

inline nlohmann::json to_json(const PixelBox& b) {
  return {{"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}, {"score", b.score}};
}

inline std::string serialize_detections(const std::vector<FrameDetections>& frames) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& f : frames) {
    nlohmann::json boxes = nlohmann::json::array();
    for (const auto& b : f.boxes) boxes.push_back(to_json(b));
    arr.push_back({{"id", f.id}, {"image", f.image}, {"boxes", std::move(boxes)}});
  }
  return nlohmann::json{{"frames", std::move(arr)}}.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Sequence config JSON
// ---------------------------------------------------------------------------

struct FrameTime {
  std::string id;
  double t_s = 0.0;

  bool operator==(const FrameTime&) const = default;
};

struct SequenceConfig {
  double depth_m = 1.0;
  CameraModel camera;
  std::string telemetry;
  std::string detections;
  std::vector<FrameTime> frame_times;

  bool operator==(const SequenceConfig&) const = default;
};

inline SequenceConfig parse_sequence_config(std::string_view text) {
  SequenceConfig cfg;
  try {
    const auto doc = nlohmann::json::parse(text);
    cfg.depth_m = doc.at("depth_m").get<double>();
    cfg.camera.focal_px = doc.at("focal_px").get<double>();
    cfg.camera.width_px = doc.at("width_px").get<int>();
    cfg.camera.height_px = doc.at("height_px").get<int>();
    cfg.telemetry = doc.at("telemetry").get<std::string>();
    cfg.detections = doc.at("detections").get<std::string>();
    for (const auto& ft : doc.at("frame_times")) {
      cfg.frame_times.push_back({ft.at("id").get<std::string>(), ft.at("t_s").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("sequence config: ") + e.what());
  }
  if (!(cfg.depth_m > 0.0)) throw Error(ErrorKind::Validation, "depth_m must be positive");
  validate(cfg.camera);
  for (std::size_t i = 1; i < cfg.frame_times.size(); ++i) {
    if (!(cfg.frame_times[i].t_s > cfg.frame_times[i - 1].t_s)) {
      throw Error(ErrorKind::Ordering, "frame_times must be strictly increasing");
    }
  }
  return cfg;
}

inline std::string serialize_sequence_config(const SequenceConfig& cfg) {
  nlohmann::json times = nlohmann::json::array();
  for (const auto& ft : cfg.frame_times) times.push_back({{"id", ft.id}, {"t_s", ft.t_s}});
  const nlohmann::json doc = {{"depth_m", cfg.depth_m},
                              {"focal_px", cfg.camera.focal_px},
                              {"width_px", cfg.camera.width_px},
                              {"height_px", cfg.camera.height_px},
                              {"telemetry", cfg.telemetry},
                              {"detections", cfg.detections},
                              {"frame_times", std::move(times)}};
  return doc.dump(2) + "\n";
}

}  // namespace facade
