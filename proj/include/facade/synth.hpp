#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "facade/error.hpp"
#include "facade/geometry.hpp"
#include "facade/image.hpp"
#include "facade/ingest.hpp"
#include "facade/plane_map.hpp"

namespace facade::synth {

/// Regular storey/window grid used as ground truth.
struct FacadeLayout {
  int storeys = 4;
  int windows_per_storey = 5;
  double window_w_m = 1.2;
  double window_h_m = 1.5;
  double h_gap_m = 0.8;
  double v_gap_m = 1.2;
  double sill_m = 1.0;
  int wall_intensity = 90;
  int window_intensity = 200;
  /// Added to the window intensity per storey; non-zero breaks the
  /// uniform-appearance assumption of template completion.
  int storey_intensity_step = 0;
};

struct FlightPlan {
  int frame_count = 12;
  double start_H_m = 1.0;
  double end_H_m = 10.0;
  double depth_m = 8.0;
  double pitch_noise_sigma_rad = 0.0;
  CameraModel camera{300.0, 320, 240};
  std::uint64_t seed = 0;
  double frame_interval_s = 0.5;
  /// Additive uniform pixel noise amplitude, in grey levels.
  int image_noise = 0;
  /// A clipped window enters a frame's truth when at least this share of its
  /// area is visible.
  double min_visible_fraction = 0.6;
};

inline constexpr double kMinFrameOverlap = 0.30;

inline void validate(const FacadeLayout& l) {
  if (l.storeys < 1 || l.windows_per_storey < 1) {
    throw Error(ErrorKind::Validation, "layout needs at least one storey and one window");
  }
  for (double v : {l.window_w_m, l.window_h_m, l.h_gap_m, l.v_gap_m, l.sill_m}) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorKind::Validation, "layout dimensions must be positive");
    }
  }
  const auto in_range = [](int v) { return v >= 0 && v <= 255; };
  if (!in_range(l.wall_intensity) || !in_range(l.window_intensity)) {
    throw Error(ErrorKind::Validation, "intensities must lie in [0,255]");
  }
  if (l.window_intensity == l.wall_intensity) {
    throw Error(ErrorKind::Validation, "window and wall intensity must differ");
  }
}

inline double grid_width(const FacadeLayout& l) {
  return l.windows_per_storey * l.window_w_m + (l.windows_per_storey - 1) * l.h_gap_m;
}

inline double storey_pitch(const FacadeLayout& l) { return l.window_h_m + l.v_gap_m; }

/// Metric rectangles of every window, bottom storey first, left to right.
/// The grid is centered on the plane's x origin.
inline std::vector<Rect> window_rects(const FacadeLayout& l) {
  std::vector<Rect> out;
  const double left = -0.5 * grid_width(l);
  for (int s = 0; s < l.storeys; ++s) {
    for (int c = 0; c < l.windows_per_storey; ++c) {
      out.push_back({left + c * (l.window_w_m + l.h_gap_m), l.sill_m + s * storey_pitch(l),
                     l.window_w_m, l.window_h_m});
    }
  }
  return out;
}

/// Facade rectangle: one horizontal gap of wall beside the outer columns,
/// ground line to one vertical gap above the top storey.
inline Rect facade_extent(const FacadeLayout& l) {
  const double w = grid_width(l) + 2 * l.h_gap_m;
  const double h = l.sill_m + l.storeys * l.window_h_m + l.storeys * l.v_gap_m;
  return {-0.5 * w, 0.0, w, h};
}

inline double analytic_area_ratio(const FacadeLayout& l) {
  const Rect e = facade_extent(l);
  return l.storeys * l.windows_per_storey * l.window_w_m * l.window_h_m / (e.w_m * e.h_m);
}

/// Image row at which a facade point of height Y appears; inverse of
/// project_point.
inline double inverse_project(double Y_m, const Pose& pose, const MappingContext& ctx) {
  const double beta_rel = pose.pitch_rad - ctx.beta0_rad;
  return 0.5 * ctx.camera.height_px -
         (Y_m - pose.altitude_m - pitch_correction(ctx.depth_m, beta_rel)) *
             (ctx.camera.focal_px / ctx.depth_m);
}

/// Image column of a plane x coordinate (metric mode).
inline double inverse_column(double X_m, const MappingContext& ctx) {
  return 0.5 * ctx.camera.width_px + X_m * (ctx.camera.focal_px / ctx.depth_m);
}

/// A plan whose depth fits the whole grid (plus one gap of wall per side)
/// across the image width, flying from the bottom storey's center height to
/// the top storey's.
inline FlightPlan suggest_plan(const FacadeLayout& l, int frame_count, std::uint64_t seed,
                               double pitch_noise_sigma_rad = 0.0,
                               CameraModel camera = {300.0, 320, 240}) {
  FlightPlan p;
  p.frame_count = frame_count;
  p.camera = camera;
  p.seed = seed;
  p.pitch_noise_sigma_rad = pitch_noise_sigma_rad;
  const double span = grid_width(l) + 4 * l.h_gap_m;
  p.depth_m = span * camera.focal_px / camera.width_px;
  p.start_H_m = l.sill_m + 0.5 * l.window_h_m;
  p.end_H_m = p.start_H_m + std::max(1.0, (l.storeys - 1) * storey_pitch(l));
  return p;
}

inline MappingContext mapping_context(const FlightPlan& p, double beta0) {
  return {p.depth_m, p.camera, beta0, XMode::Metric};
}

inline void validate(const FlightPlan& p, const FacadeLayout& l) {
  validate(l);
  validate(p.camera);
  if (p.frame_count < 2) throw Error(ErrorKind::Validation, "a flight needs at least 2 frames");
  if (!(p.end_H_m > p.start_H_m)) {
    throw Error(ErrorKind::Validation, "end altitude must exceed start altitude");
  }
  if (!(p.depth_m > 0.0)) throw Error(ErrorKind::Validation, "depth must be positive");
  if (!(p.pitch_noise_sigma_rad >= 0.0)) {
    throw Error(ErrorKind::Validation, "pitch noise sigma must be >= 0");
  }
  if (!(p.frame_interval_s > 0.0)) {
    throw Error(ErrorKind::Validation, "frame interval must be positive");
  }
  if (p.image_noise < 0 || p.image_noise > 127) {
    throw Error(ErrorKind::Validation, "image noise must lie in [0,127]");
  }
  const double fov_h = p.camera.height_px * p.depth_m / p.camera.focal_px;
  const double step = (p.end_H_m - p.start_H_m) / (p.frame_count - 1);
  if (1.0 - step / fov_h < kMinFrameOverlap) {
    throw Error(ErrorKind::Incompatible, "consecutive frames overlap by less than 30%");
  }
  const MappingContext ctx = mapping_context(p, 0.0);
  if (inverse_column(-0.5 * grid_width(l), ctx) < 0.0 ||
      inverse_column(0.5 * grid_width(l), ctx) > p.camera.width_px) {
    throw Error(ErrorKind::Incompatible, "facade grid does not fit the image width at this depth");
  }
  for (const auto& r : window_rects(l)) {
    bool seen = false;
    for (int i = 0; i < p.frame_count && !seen; ++i) {
      const Pose pose{0.0, p.start_H_m + i * step, 0.0, 0.0, 0.0};
      const double top = inverse_project(r.y_m + r.h_m, pose, ctx);
      const double bot = inverse_project(r.y_m, pose, ctx);
      seen = top >= 0.0 && bot <= p.camera.height_px;
    }
    if (!seen) {
      throw Error(ErrorKind::Incompatible,
                  "a window at height " + std::to_string(r.y_m) + " m is never fully in view");
    }
  }
}

struct Sequence {
  SequenceConfig config;
  std::vector<Pose> telemetry;
  std::vector<FrameDetections> truth;
  std::vector<GrayImage> images;
  /// Pose of each frame, in frame order.
  std::vector<Pose> frame_poses;
  MappingContext context;
};

inline std::string frame_id(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "f%03d", i);
  return buf;
}

/// Fabricates a vertical survey of the layout: poses, ground-truth boxes and
/// rendered frames, all consistent with the plane mapping.
inline Sequence gen_sequence(const FacadeLayout& layout, const FlightPlan& plan) {
  validate(plan, layout);
  std::mt19937_64 rng(plan.seed);
  std::normal_distribution<double> pitch_noise(0.0, 1.0);
  std::uniform_int_distribution<int> pixel_noise(-plan.image_noise, plan.image_noise);

  Sequence seq;
  seq.config.depth_m = plan.depth_m;
  seq.config.camera = plan.camera;
  seq.config.telemetry = "telemetry.csv";
  seq.config.detections = "detections.json";

  const double step = (plan.end_H_m - plan.start_H_m) / (plan.frame_count - 1);
  for (int i = 0; i < plan.frame_count; ++i) {
    Pose p;
    p.t = i * plan.frame_interval_s;
    p.altitude_m = plan.start_H_m + i * step;
    p.pitch_rad = plan.pitch_noise_sigma_rad * pitch_noise(rng);
    seq.frame_poses.push_back(p);
    seq.config.frame_times.push_back({frame_id(i), p.t});
  }
  // Telemetry carries the frame samples plus interpolation-consistent midpoints.
  for (int i = 0; i < plan.frame_count; ++i) {
    seq.telemetry.push_back(seq.frame_poses[i]);
    if (i + 1 < plan.frame_count) {
      const Pose& a = seq.frame_poses[i];
      const Pose& b = seq.frame_poses[i + 1];
      seq.telemetry.push_back(Pose{0.5 * (a.t + b.t), 0.5 * (a.altitude_m + b.altitude_m), 0.0,
                                   0.5 * (a.pitch_rad + b.pitch_rad), 0.0});
    }
  }
  seq.context = mapping_context(plan, seq.frame_poses.front().pitch_rad);

  const auto rects = window_rects(layout);
  const int W = plan.camera.width_px, H = plan.camera.height_px;
  for (int i = 0; i < plan.frame_count; ++i) {
    const Pose& pose = seq.frame_poses[i];
    FrameDetections fd;
    fd.id = frame_id(i);
    fd.image = "frames/" + fd.id + ".pgm";
    GrayImage img(W, H, static_cast<std::uint8_t>(layout.wall_intensity));
    for (std::size_t k = 0; k < rects.size(); ++k) {
      const Rect& r = rects[k];
      const int storey = static_cast<int>(k) / layout.windows_per_storey;
      const double x0 = inverse_column(r.x_m, seq.context);
      const double x1 = inverse_column(r.x_m + r.w_m, seq.context);
      const double y0 = inverse_project(r.y_m + r.h_m, pose, seq.context);
      const double y1 = inverse_project(r.y_m, pose, seq.context);

      // A pixel belongs to the window when its center does.
      const int c0 = std::max(0, static_cast<int>(std::ceil(x0 - 0.5)));
      const int c1 = std::min(W, static_cast<int>(std::ceil(x1 - 0.5)));
      const int r0 = std::max(0, static_cast<int>(std::ceil(y0 - 0.5)));
      const int r1 = std::min(H, static_cast<int>(std::ceil(y1 - 0.5)));
      const auto shade = static_cast<std::uint8_t>(std::clamp(
          layout.window_intensity + storey * layout.storey_intensity_step, 0, 255));
      for (int y = r0; y < r1; ++y) {
        for (int x = c0; x < c1; ++x) img.at(x, y) = shade;
      }

      const double cx0 = std::clamp(x0, 0.0, static_cast<double>(W));
      const double cx1 = std::clamp(x1, 0.0, static_cast<double>(W));
      const double cy0 = std::clamp(y0, 0.0, static_cast<double>(H));
      const double cy1 = std::clamp(y1, 0.0, static_cast<double>(H));
      const double visible = std::max(0.0, cx1 - cx0) * std::max(0.0, cy1 - cy0);
      if (visible > 0.0 && visible >= plan.min_visible_fraction * (x1 - x0) * (y1 - y0)) {
        fd.boxes.push_back(PixelBox{cx0, cy0, cx1 - cx0, cy1 - cy0, 1.0});
      }
    }
    if (plan.image_noise > 0) {
      for (auto& v : img.pixels()) v = static_cast<std::uint8_t>(std::clamp(v + pixel_noise(rng), 0, 255));
    }
    seq.truth.push_back(std::move(fd));
    seq.images.push_back(std::move(img));
  }
  return seq;
}

/// Emulates detector failures: independent dropout (at least one box per
/// non-empty frame survives), Gaussian corner jitter and fresh scores in
/// [0.7, 1.0). Jittered boxes are clipped to the camera frame when given.
inline std::vector<FrameDetections> corrupt_detections(
    const std::vector<FrameDetections>& truth, double dropout_p, double jitter_sigma_px,
    std::uint64_t seed, const std::optional<CameraModel>& bounds = std::nullopt) {
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
    throw Error(ErrorKind::InvalidParam, "dropout probability must lie in [0,1)");
  }
  if (!(jitter_sigma_px >= 0.0)) throw Error(ErrorKind::InvalidParam, "jitter sigma must be >= 0");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution drop(dropout_p);
  std::normal_distribution<double> jitter(0.0, 1.0);
  std::uniform_real_distribution<double> score(0.7, 1.0);

  std::vector<FrameDetections> out;
  out.reserve(truth.size());
  for (const auto& f : truth) {
    std::vector<bool> keep(f.boxes.size(), true);
    if (!f.boxes.empty()) {
      do {
        for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = !drop(rng);
      } while (std::none_of(keep.begin(), keep.end(), [](bool k) { return k; }));
    }
    FrameDetections g{f.id, f.image, {}};
    for (std::size_t i = 0; i < f.boxes.size(); ++i) {
      if (!keep[i]) continue;
      const PixelBox& b = f.boxes[i];
      double x0 = b.x + jitter_sigma_px * jitter(rng);
      double y0 = b.y + jitter_sigma_px * jitter(rng);
      double x1 = b.x + b.w + jitter_sigma_px * jitter(rng);
      double y1 = b.y + b.h + jitter_sigma_px * jitter(rng);
      if (bounds) {
        x0 = std::clamp(x0, 0.0, static_cast<double>(bounds->width_px));
        x1 = std::clamp(x1, 0.0, static_cast<double>(bounds->width_px));
        y0 = std::clamp(y0, 0.0, static_cast<double>(bounds->height_px));
        y1 = std::clamp(y1, 0.0, static_cast<double>(bounds->height_px));
      }
      // Keep at least one pixel of extent.
      if (x1 - x0 < 1.0) x1 = x0 + 1.0;
      if (y1 - y0 < 1.0) y1 = y0 + 1.0;
      if (bounds) {
        if (x1 > bounds->width_px) { x1 = bounds->width_px; x0 = x1 - 1.0; }
        if (y1 > bounds->height_px) { y1 = bounds->height_px; y0 = y1 - 1.0; }
      }
      g.boxes.push_back(PixelBox{x0, y0, x1 - x0, y1 - y0, score(rng)});
    }
    out.push_back(std::move(g));
  }
  return out;
}

inline nlohmann::json layout_json(const FacadeLayout& l, const FlightPlan& p) {
  const Rect e = facade_extent(l);
  return {{"storeys", l.storeys},
          {"windows_per_storey", l.windows_per_storey},
          {"window_count", l.storeys * l.windows_per_storey},
          {"window_w_m", l.window_w_m},
          {"window_h_m", l.window_h_m},
          {"h_gap_m", l.h_gap_m},
          {"v_gap_m", l.v_gap_m},
          {"sill_m", l.sill_m},
          {"area_ratio", analytic_area_ratio(l)},
          {"facade_extent", {{"x_m", e.x_m}, {"y_m", e.y_m}, {"w_m", e.w_m}, {"h_m", e.h_m}}},
          {"plan",
           {{"frame_count", p.frame_count},
            {"start_H_m", p.start_H_m},
            {"end_H_m", p.end_H_m},
            {"depth_m", p.depth_m},
            {"pitch_noise_sigma_rad", p.pitch_noise_sigma_rad},
            {"seed", p.seed}}}};
}

/// Writes the dataset in the on-disk ingest formats: sequence.json,
/// telemetry.csv, detections.json, truth.json, layout.json and frames/*.pgm.
inline void write_dataset(const std::filesystem::path& dir, const Sequence& seq,
                          const std::vector<FrameDetections>& detections,
                          const nlohmann::json& layout_doc) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "frames");
  detail::write_text(dir / "sequence.json", serialize_sequence_config(seq.config));
  detail::write_text(dir / seq.config.telemetry, serialize_telemetry(seq.telemetry));
  detail::write_text(dir / seq.config.detections, serialize_detections(detections));
  detail::write_text(dir / "truth.json", serialize_detections(seq.truth));
  detail::write_text(dir / "layout.json", layout_doc.dump(2) + "\n");
  for (std::size_t i = 0; i < seq.images.size(); ++i) {
    save_pgm(dir / seq.truth[i].image, seq.images[i]);
  }
}

}  // namespace facade::synth
