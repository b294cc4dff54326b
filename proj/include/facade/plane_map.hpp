#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "facade/error.hpp"
#include "facade/geometry.hpp"
#include "facade/ingest.hpp"

namespace facade {

/// How the horizontal plane coordinate is produced.
enum class XMode {
  Metric,  // (x - width/2) * D / f, meters
  Pixel,   // raw image column, as in the original mapping rule
};

struct MappingContext {
  double depth_m = 1.0;
  CameraModel camera;
  /// Pitch of the first frame; every pitch is taken relative to it.
  double beta0_rad = 0.0;
  XMode x_mode = XMode::Metric;
};

inline void validate(const MappingContext& ctx) {
  if (!(ctx.depth_m > 0.0) || !std::isfinite(ctx.depth_m)) {
    throw Error(ErrorKind::Validation, "depth_m must be positive");
  }
  validate(ctx.camera);
}

/// Roll or yaw above this magnitude is reported; neither is compensated.
inline constexpr double kAttitudeWarnRad = 0.05;

/// Metric vertical offset caused by a relative pitch: -D * tan(beta).
inline double pitch_correction(double depth_m, double beta_rel) {
  if (!(std::abs(beta_rel) < 0.5 * std::numbers::pi)) {
    throw Error(ErrorKind::InvalidPitch, "relative pitch must satisfy |beta| < pi/2");
  }
  return -depth_m * std::tan(beta_rel);
}

/// Height above the facade's ground line of the point seen at image row y_px.
///
/// The pixel offset from the optical center is scaled to meters by D/f, then
/// the pitch correction (already in meters) and the UAV altitude are added.
/// Adding -f*tan(beta) pixels before scaling gives the same value.
inline double project_point(double y_px, const Pose& pose, const MappingContext& ctx) {
  const double beta_rel = pose.pitch_rad - ctx.beta0_rad;
  const double scale = ctx.depth_m / ctx.camera.focal_px;
  return (0.5 * ctx.camera.height_px - y_px) * scale +
         pitch_correction(ctx.depth_m, beta_rel) + pose.altitude_m;
}

inline double project_column(double x_px, const MappingContext& ctx) {
  if (ctx.x_mode == XMode::Pixel) return x_px;
  return (x_px - 0.5 * ctx.camera.width_px) * (ctx.depth_m / ctx.camera.focal_px);
}

inline PlaneBox project_box(const PixelBox& box, const Pose& pose, const MappingContext& ctx,
                            const std::string& frame_id = {}) {
  validate(box);
  const double y_top = project_point(box.y, pose, ctx);
  const double y_bottom = project_point(box.y + box.h, pose, ctx);
  const double x_left = project_column(box.x, ctx);
  const double x_right = project_column(box.x + box.w, ctx);
  PlaneBox out{x_left, y_bottom, x_right - x_left, y_top - y_bottom, box.score, {}};
  if (!frame_id.empty()) out.source_frames.push_back(frame_id);
  return out;
}

/// Warnings for attitude components the mapping ignores.
inline std::vector<std::string> attitude_warnings(const Pose& pose, const std::string& frame_id) {
  std::vector<std::string> out;
  if (std::abs(pose.roll_rad) > kAttitudeWarnRad) {
    out.push_back("frame '" + frame_id + "': roll " + std::to_string(pose.roll_rad) +
                  " rad is not compensated");
  }
  if (std::abs(pose.yaw_rad) > kAttitudeWarnRad) {
    out.push_back("frame '" + frame_id + "': yaw " + std::to_string(pose.yaw_rad) +
                  " rad is not compensated");
  }
  return out;
}

/// Plane-level NMS. Each survivor inherits the source frames of every box it
/// suppressed.
inline std::vector<PlaneBox> dedup_plane(const std::vector<PlaneBox>& boxes,
                                         double iou_threshold = 0.3) {
  std::vector<PlaneBox> out;
  for (const auto& g : nms_groups(std::span<const PlaneBox>(boxes), iou_threshold)) {
    PlaneBox keep = boxes[g.kept];
    std::set<std::string> frames(keep.source_frames.begin(), keep.source_frames.end());
    for (std::size_t j : g.suppressed) {
      frames.insert(boxes[j].source_frames.begin(), boxes[j].source_frames.end());
    }
    keep.source_frames.assign(frames.begin(), frames.end());
    out.push_back(std::move(keep));
  }
  return out;
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool operator==(const Interval&) const = default;
};

struct StoreyCount {
  int storey_count = 0;
  std::vector<int> windows_per_storey;  // bottom-up
  std::vector<Interval> storey_bands;   // bottom-up
};

/// Sweeps a horizontal line upward over the unique windows. A window joins
/// the open storey when its vertical span overlaps the storey band by at
/// least band_overlap_min of the shorter of the two spans; otherwise the band
/// closes and a new storey starts.
inline StoreyCount count_storeys(const std::vector<PlaneBox>& unique,
                                 double band_overlap_min = 0.5) {
  if (!(band_overlap_min >= 0.0 && band_overlap_min <= 1.0)) {
    throw Error(ErrorKind::InvalidParam, "band_overlap_min must lie in [0,1]");
  }
  std::vector<Interval> spans;
  spans.reserve(unique.size());
  for (const auto& b : unique) spans.push_back({b.y_m, b.y_m + b.h_m});
  std::sort(spans.begin(), spans.end(), [](const Interval& a, const Interval& b) {
    return a.lo != b.lo ? a.lo < b.lo : a.hi < b.hi;
  });

  StoreyCount out;
  for (const auto& s : spans) {
    if (!out.storey_bands.empty()) {
      Interval& band = out.storey_bands.back();
      const double overlap = std::min(band.hi, s.hi) - std::max(band.lo, s.lo);
      const double shorter = std::min(band.hi - band.lo, s.hi - s.lo);
      if (overlap > 0.0 && overlap >= band_overlap_min * shorter) {
        band.hi = std::max(band.hi, s.hi);
        ++out.windows_per_storey.back();
        continue;
      }
    }
    out.storey_bands.push_back(s);
    out.windows_per_storey.push_back(1);
  }
  out.storey_count = static_cast<int>(out.storey_bands.size());
  return out;
}

/// Axis-aligned rectangle on the facade plane.
struct Rect {
  double x_m = 0.0;
  double y_m = 0.0;
  double w_m = 0.0;
  double h_m = 0.0;

  bool operator==(const Rect&) const = default;
};

/// Bounding rectangle of the boxes padded by margin_m on every side. Empty
/// input gives a zero rectangle.
inline Rect auto_extent(const std::vector<PlaneBox>& boxes, double margin_m) {
  if (boxes.empty()) return {};
  double x0 = boxes.front().x_m, y0 = boxes.front().y_m;
  double x1 = x0 + boxes.front().w_m, y1 = y0 + boxes.front().h_m;
  for (const auto& b : boxes) {
    x0 = std::min(x0, b.x_m);
    y0 = std::min(y0, b.y_m);
    x1 = std::max(x1, b.x_m + b.w_m);
    y1 = std::max(y1, b.y_m + b.h_m);
  }
  return {x0 - margin_m, y0 - margin_m, (x1 - x0) + 2 * margin_m, (y1 - y0) + 2 * margin_m};
}

/// Summed window area inside the extent divided by the extent area.
inline double area_ratio(const std::vector<PlaneBox>& unique, const Rect& extent) {
  if (!(extent.w_m > 0.0 && extent.h_m > 0.0)) {
    throw Error(ErrorKind::ZeroExtent, "facade extent must have positive area");
  }
  double covered = 0.0;
  for (const auto& b : unique) {
    const double w = std::min(b.x_m + b.w_m, extent.x_m + extent.w_m) - std::max(b.x_m, extent.x_m);
    const double h = std::min(b.y_m + b.h_m, extent.y_m + extent.h_m) - std::max(b.y_m, extent.y_m);
    if (w > 0.0 && h > 0.0) covered += w * h;
  }
  return std::clamp(covered / (extent.w_m * extent.h_m), 0.0, 1.0);
}

struct FacadeMetrics {
  int window_count = 0;
  int storey_count = 0;
  std::vector<int> windows_per_storey;
  std::vector<Interval> storey_bands;
  double area_ratio = 0.0;
  Rect facade_extent;
  std::vector<PlaneBox> unique_windows;
};

struct MetricsOptions {
  double dedup_iou = 0.3;
  double band_overlap_min = 0.5;
  double wall_margin_m = 0.5;
  /// User-supplied facade rectangle; when unset the padded bounding box is used.
  std::optional<Rect> extent;
};

/// Dedup, storey count and area ratio over every mapped box of a sequence.
inline FacadeMetrics compute_metrics(const std::vector<PlaneBox>& mapped,
                                     const MetricsOptions& opts = {}) {
  FacadeMetrics m;
  m.unique_windows = dedup_plane(mapped, opts.dedup_iou);
  // Report windows bottom-up, left to right.
  std::sort(m.unique_windows.begin(), m.unique_windows.end(),
            [](const PlaneBox& a, const PlaneBox& b) {
              return std::tie(a.y_m, a.x_m, a.w_m, a.h_m) < std::tie(b.y_m, b.x_m, b.w_m, b.h_m);
            });
  const auto storeys = count_storeys(m.unique_windows, opts.band_overlap_min);
  m.window_count = static_cast<int>(m.unique_windows.size());
  m.storey_count = storeys.storey_count;
  m.windows_per_storey = storeys.windows_per_storey;
  m.storey_bands = storeys.storey_bands;
  m.facade_extent = opts.extent ? *opts.extent : auto_extent(m.unique_windows, opts.wall_margin_m);
  m.area_ratio = m.unique_windows.empty() ? 0.0 : area_ratio(m.unique_windows, m.facade_extent);
  return m;
}

}  // namespace facade
