#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "facade/error.hpp"
#include "facade/image.hpp"
#include "facade/ingest.hpp"
#include "facade/plane_map.hpp"
#include "facade/postprocess.hpp"

namespace facade {

/// Everything read from a sequence config, validated and path-resolved.
struct LoadedSequence {
  SequenceConfig config;
  SequenceMeta meta;
  std::vector<Pose> telemetry;
  /// Detections aligned with meta.frames (empty list for frames without any).
  std::vector<std::vector<PixelBox>> detections;
};

/// Reads the config and the files it references. Relative paths are resolved
/// against the config's directory. Every failure here is an input error.
inline LoadedSequence load_sequence(const std::filesystem::path& config_path) {
  namespace fs = std::filesystem;
  if (!fs::exists(config_path)) {
    throw Error(ErrorKind::Io, "sequence config not found: " + config_path.string());
  }
  LoadedSequence seq;
  seq.config = parse_sequence_config(detail::read_text(config_path));
  const fs::path base = config_path.parent_path();
  const auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };

  const fs::path telemetry_path = resolve(seq.config.telemetry);
  if (!fs::exists(telemetry_path)) {
    throw Error(ErrorKind::Io, "telemetry file not found: " + telemetry_path.string());
  }
  seq.telemetry = parse_telemetry(detail::read_text(telemetry_path));

  const fs::path det_path = resolve(seq.config.detections);
  if (!fs::exists(det_path)) {
    throw Error(ErrorKind::Io, "detections file not found: " + det_path.string());
  }
  std::set<std::string> ids;
  for (const auto& ft : seq.config.frame_times) ids.insert(ft.id);
  const auto frames = load_detections(detail::read_text(det_path), seq.config.camera, ids);
  std::map<std::string, const FrameDetections*> by_id;
  for (const auto& f : frames) by_id[f.id] = &f;

  seq.meta.depth_m = seq.config.depth_m;
  seq.meta.camera = seq.config.camera;
  for (const auto& ft : seq.config.frame_times) {
    FrameRef ref{ft.id, ft.t_s, {}};
    auto it = by_id.find(ft.id);
    if (it != by_id.end()) {
      if (!it->second->image.empty()) ref.image = resolve(it->second->image);
      seq.detections.push_back(it->second->boxes);
    } else {
      seq.detections.emplace_back();
    }
    seq.meta.frames.push_back(std::move(ref));
  }
  validate(seq.meta);
  return seq;
}

struct RunOptions {
  MatchParams match;
  MetricsOptions metrics;
  XMode x_mode = XMode::Metric;
  SyncOptions sync;
  bool skip_postprocess = false;
  unsigned threads = 1;
  /// Plane score multiplier for boxes touching the image border; a full view
  /// of a window outranks an edge-truncated one during plane dedup.
  double edge_score_factor = 0.5;
};

struct FrameDiagnostics {
  std::string frame;
  std::size_t originals = 0;
  std::size_t candidates = 0;
  std::size_t kept = 0;
  std::vector<std::string> warnings;
};

struct PipelineResult {
  FacadeMetrics metrics;
  std::vector<FrameDiagnostics> diagnostics;
  /// Per-frame boxes after completion, aligned with meta.frames.
  std::vector<std::vector<PixelBox>> completed;
  std::vector<Pose> frame_poses;
  std::vector<PlaneBox> mapped;
};

inline constexpr double kBorderTolerancePx = 1.0;
inline constexpr double kBorderToleranceFraction = 0.1;

/// True when the box comes within max(1 px, 10% of its own size) of the image
/// border. The relative margin catches truncated windows whose edge has been
/// pulled inward by localisation noise.
inline bool touches_border(const PixelBox& b, const CameraModel& cam) {
  const double tx = std::max(kBorderTolerancePx, kBorderToleranceFraction * b.w);
  const double ty = std::max(kBorderTolerancePx, kBorderToleranceFraction * b.h);
  return b.x <= tx || b.y <= ty || b.x + b.w >= cam.width_px - tx || b.y + b.h >= cam.height_px - ty;
}

/// Runs completion, plane mapping and metrics over a loaded sequence. Frames
/// are processed by up to `threads` workers; all reductions are ordered.
inline PipelineResult run_pipeline(const LoadedSequence& seq, const RunOptions& opts) {
  validate(opts.match);
  const auto& frames = seq.meta.frames;
  const std::size_t n = frames.size();
  PipelineResult res;
  res.diagnostics.resize(n);
  res.completed.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    res.frame_poses.push_back(sync_pose(frames[i].t_s, seq.telemetry, opts.sync, frames[i].id));
  }

  const auto process = [&](std::size_t i) {
    auto& diag = res.diagnostics[i];
    diag.frame = frames[i].id;
    const auto& dets = seq.detections[i];
    diag.originals = dets.size();
    if (dets.empty()) {
      diag.warnings.push_back("no detections; frame contributes nothing");
      return;
    }
    if (opts.skip_postprocess || frames[i].image.empty()) {
      if (!opts.skip_postprocess) diag.warnings.push_back("no image; completion skipped");
      res.completed[i] = nms(dets, opts.match.nms_iou);
    } else {
      const GrayImage img = load_image(
          frames[i].image, std::make_pair(seq.meta.camera.width_px, seq.meta.camera.height_px));
      auto fr = post_process_frame_detailed(img, dets, opts.match);
      diag.candidates = fr.candidates;
      diag.warnings.insert(diag.warnings.end(), fr.warnings.begin(), fr.warnings.end());
      res.completed[i] = std::move(fr.boxes);
    }
    diag.kept = res.completed[i].size();
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(opts.threads, static_cast<unsigned>(n)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) process(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < n; i = next++) process(i);
        } catch (...) {
          errors[w] = std::current_exception();
          next = n;
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  MappingContext ctx{seq.meta.depth_m, seq.meta.camera,
                     res.frame_poses.empty() ? 0.0 : res.frame_poses.front().pitch_rad,
                     opts.x_mode};
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& w : attitude_warnings(res.frame_poses[i], frames[i].id)) {
      res.diagnostics[i].warnings.push_back(std::move(w));
    }
    for (const auto& b : res.completed[i]) {
      PlaneBox pb = project_box(b, res.frame_poses[i], ctx, frames[i].id);
      if (touches_border(b, seq.meta.camera)) pb.score *= opts.edge_score_factor;
      res.mapped.push_back(std::move(pb));
    }
  }
  res.metrics = compute_metrics(res.mapped, opts.metrics);
  return res;
}

}  // namespace facade
