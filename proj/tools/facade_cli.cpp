// facade: window/storey counting from a vertical UAV facade survey.
//
//   facade pipeline --config seq.json --out run/
//   facade synth    --storeys 4 --windows 5 --frames 12 --seed 7 --out data/
//   facade eval     --pred completed.json --truth truth.json [--iou 0.5]
//   facade report   --metrics run/metrics.json --out panorama.svg
//
// Exit codes: 0 success, 2 invalid input, 3 processing failure. Failures also
// print a one-line JSON object on stderr.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "facade/facade.hpp"

namespace fs = std::filesystem;
using namespace facade;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitProcessing = 3;

int fail(int code, std::string_view kind, const std::string& message) {
  const nlohmann::json err = {{"error", kind}, {"message", message}, {"exit_code", code}};
  std::cerr << err.dump() << std::endl;
  return code;
}

std::optional<Rect> parse_extent(const std::string& text) {
  if (text.empty()) return std::nullopt;
  std::vector<double> v;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto d = detail::parse_double(cell);
    if (!d) throw Error(ErrorKind::InvalidParam, "--extent expects x,y,w,h in meters");
    v.push_back(*d);
  }
  if (v.size() != 4) throw Error(ErrorKind::InvalidParam, "--extent expects x,y,w,h in meters");
  return Rect{v[0], v[1], v[2], v[3]};
}

struct PipelineArgs {
  std::string config;
  std::string out;
  MatchParams match;
  double peak_sep = -1.0;
  MetricsOptions metrics;
  std::string extent;
  bool pixel_x = false;
  bool nearest_sync = false;
  double sync_slack = 0.1;
  bool skip_postprocess = false;
  unsigned threads = 1;
};

int run_pipeline_cmd(const PipelineArgs& a) {
  RunOptions opts;
  LoadedSequence seq;
  try {
    opts.match = a.match;
    if (a.peak_sep >= 0.0) opts.match.peak_min_separation = a.peak_sep;
    validate(opts.match);
    opts.metrics = a.metrics;
    opts.metrics.extent = parse_extent(a.extent);
    if (!(opts.metrics.dedup_iou >= 0.0 && opts.metrics.dedup_iou <= 1.0)) {
      throw Error(ErrorKind::InvalidParam, "--dedup-iou must lie in [0,1]");
    }
    if (!(opts.metrics.band_overlap_min >= 0.0 && opts.metrics.band_overlap_min <= 1.0)) {
      throw Error(ErrorKind::InvalidParam, "--band-overlap must lie in [0,1]");
    }
    if (!(a.sync_slack >= 0.0)) throw Error(ErrorKind::InvalidParam, "--sync-slack must be >= 0");
    opts.x_mode = a.pixel_x ? XMode::Pixel : XMode::Metric;
    opts.sync = {a.sync_slack, a.nearest_sync ? SyncMode::Nearest : SyncMode::Linear};
    opts.skip_postprocess = a.skip_postprocess;
    opts.threads = a.threads;
    seq = load_sequence(a.config);
  } catch (const Error& e) {
    return fail(kExitInput, to_string(e.kind()), e.what());
  }

  try {
    const PipelineResult res = run_pipeline(seq, opts);
    const fs::path out(a.out);
    fs::create_directories(out);
    detail::write_text(out / "metrics.json", metrics_to_json(res.metrics).dump(2) + "\n");
    detail::write_text(out / "panorama.svg", render_panorama_svg(res.metrics));
    detail::write_text(out / "diagnostics.json",
                       diagnostics_to_json(res.diagnostics).dump(2) + "\n");
    std::vector<FrameDetections> completed;
    for (std::size_t i = 0; i < seq.meta.frames.size(); ++i) {
      const auto& f = seq.meta.frames[i];
      completed.push_back({f.id, f.image.empty() ? "" : f.image.lexically_relative(out).generic_string(),
                           res.completed[i]});
    }
    detail::write_text(out / "completed.json", serialize_detections(completed));
    std::cout << summary_line(res.metrics) << std::endl;
  } catch (const Error& e) {
    return fail(kExitProcessing, to_string(e.kind()), e.what());
  } catch (const std::exception& e) {
    return fail(kExitProcessing, "internal", e.what());
  }
  return 0;
}

struct SynthArgs {
  std::string out;
  synth::FacadeLayout layout;
  int frames = 12;
  std::uint64_t seed = 0;
  double dropout = 0.0;
  double jitter = 0.0;
  double pitch_noise = 0.0;
  int image_noise = 0;
  double focal = 300.0;
  int width = 320;
  int height = 240;
  double depth = 0.0;
  double start_h = -1.0;
  double end_h = -1.0;
};

int run_synth_cmd(const SynthArgs& a) {
  synth::Sequence seq;
  synth::FlightPlan plan;
  std::vector<FrameDetections> dets;
  try {
    validate(a.layout);
    plan = synth::suggest_plan(a.layout, a.frames, a.seed, a.pitch_noise,
                               CameraModel{a.focal, a.width, a.height});
    if (a.depth > 0.0) plan.depth_m = a.depth;
    if (a.start_h >= 0.0) plan.start_H_m = a.start_h;
    if (a.end_h >= 0.0) plan.end_H_m = a.end_h;
    plan.image_noise = a.image_noise;
    seq = synth::gen_sequence(a.layout, plan);
    // Derived from the plan seed so one --seed pins the whole dataset.
    dets = synth::corrupt_detections(seq.truth, a.dropout, a.jitter, a.seed ^ 0x9e3779b97f4a7c15ULL,
                                     plan.camera);
  } catch (const Error& e) {
    return fail(kExitInput, to_string(e.kind()), e.what());
  }
  try {
    synth::write_dataset(a.out, seq, dets, synth::layout_json(a.layout, plan));
  } catch (const std::exception& e) {
    return fail(kExitProcessing, "io", e.what());
  }
  std::cout << "wrote " << seq.images.size() << " frames, "
            << a.layout.storeys * a.layout.windows_per_storey << " windows to " << a.out
            << std::endl;
  return 0;
}

std::string pct(const std::optional<double>& v, bool percent = false) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, percent ? "%.2f%%" : "%.4f", *v);
  return buf;
}

int run_eval_cmd(const std::string& pred_path, const std::string& truth_path, double iou,
                 const std::string& out_path) {
  std::vector<FrameDetections> pred, truth;
  try {
    check_match_iou(iou);
    truth = load_detections(detail::read_text(truth_path));
    pred = load_detections(detail::read_text(pred_path));
  } catch (const Error& e) {
    return fail(kExitInput, to_string(e.kind()), e.what());
  }
  std::map<std::string, const std::vector<PixelBox>*> pred_by_id;
  for (const auto& f : pred) pred_by_id[f.id] = &f.boxes;

  std::vector<EvalFrame> frames;
  nlohmann::json per_frame = nlohmann::json::array();
  std::printf("%-12s %6s %6s %7s %10s %10s %10s %8s\n", "frame", "pred", "truth", "matched",
              "precision", "recall", "accuracy", "ap");
  const auto row = [](const std::string& id, const DetectionMetrics& m) {
    std::printf("%-12s %6zu %6zu %7zu %10s %10s %10s %8s\n", id.c_str(), m.predicted, m.truth,
                m.matched, pct(m.precision).c_str(), pct(m.recall).c_str(),
                pct(m.accuracy, true).c_str(), pct(m.ap).c_str());
  };
  for (const auto& t : truth) {
    auto it = pred_by_id.find(t.id);
    EvalFrame ef{it == pred_by_id.end() ? std::vector<PixelBox>{} : *it->second, t.boxes};
    const auto m = eval_detections(ef.predicted, ef.truth, iou);
    row(t.id, m);
    auto j = detection_metrics_to_json(m);
    j["frame"] = t.id;
    per_frame.push_back(std::move(j));
    frames.push_back(std::move(ef));
  }
  const auto agg = eval_detections(frames, iou);
  row("ALL", agg);

  if (!out_path.empty()) {
    const nlohmann::json doc = {{"match_iou", iou},
                                {"frames", std::move(per_frame)},
                                {"aggregate", detection_metrics_to_json(agg)}};
    try {
      detail::write_text(out_path, doc.dump(2) + "\n");
    } catch (const Error& e) {
      return fail(kExitProcessing, to_string(e.kind()), e.what());
    }
  }
  return 0;
}

int run_report_cmd(const std::string& metrics_path, const std::string& out_path) {
  FacadeMetrics m;
  try {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(detail::read_text(metrics_path));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::Parse, std::string("metrics JSON: ") + e.what());
    }
    m = metrics_from_json(doc);
  } catch (const Error& e) {
    return fail(kExitInput, to_string(e.kind()), e.what());
  }
  try {
    detail::write_text(out_path, render_panorama_svg(m));
  } catch (const Error& e) {
    return fail(kExitProcessing, to_string(e.kind()), e.what());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Window and storey counting for vertical UAV facade surveys"};
  app.require_subcommand(1);

  PipelineArgs pa;
  auto* pipeline = app.add_subcommand("pipeline", "Complete detections, map to the facade plane, count");
  pipeline->add_option("--config", pa.config, "Sequence config JSON")->required();
  pipeline->add_option("--out", pa.out, "Output directory")->required();
  pipeline->add_option("--ncc-threshold", pa.match.ncc_threshold, "Minimum ZNCC for a match");
  pipeline->add_option("--strip-margin", pa.match.strip_margin, "Storey strip margin (x seed height)");
  pipeline->add_option("--nms-iou", pa.match.nms_iou, "Per-frame NMS IoU threshold");
  pipeline->add_option("--peak-sep", pa.peak_sep, "Minimum peak separation in px (default: half template width)");
  pipeline->add_option("--dedup-iou", pa.metrics.dedup_iou, "Plane dedup IoU threshold");
  pipeline->add_option("--band-overlap", pa.metrics.band_overlap_min, "Storey band overlap fraction");
  pipeline->add_option("--wall-margin", pa.metrics.wall_margin_m, "Auto-extent wall margin (m)");
  pipeline->add_option("--extent", pa.extent, "Facade rectangle x,y,w,h in meters");
  pipeline->add_flag("--pixel-x", pa.pixel_x, "Keep plane x in raw image columns");
  pipeline->add_flag("--nearest-sync", pa.nearest_sync, "Nearest-sample pose sync instead of linear");
  pipeline->add_option("--sync-slack", pa.sync_slack, "Tolerated time outside the telemetry log (s)");
  pipeline->add_flag("--skip-postprocess", pa.skip_postprocess, "Use raw detections (NMS only)");
  pipeline->add_option("--threads", pa.threads, "Worker threads for frame completion");

  SynthArgs sa;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic survey with ground truth");
  synth_cmd->add_option("--out", sa.out, "Output directory")->required();
  synth_cmd->add_option("--storeys", sa.layout.storeys, "Storeys");
  synth_cmd->add_option("--windows", sa.layout.windows_per_storey, "Windows per storey");
  synth_cmd->add_option("--frames", sa.frames, "Frame count");
  synth_cmd->add_option("--seed", sa.seed, "RNG seed");
  synth_cmd->add_option("--dropout", sa.dropout, "Detection dropout probability");
  synth_cmd->add_option("--jitter", sa.jitter, "Detection corner jitter sigma (px)");
  synth_cmd->add_option("--pitch-noise", sa.pitch_noise, "Pitch noise sigma (rad)");
  synth_cmd->add_option("--image-noise", sa.image_noise, "Uniform pixel noise amplitude");
  synth_cmd->add_option("--storey-intensity-step", sa.layout.storey_intensity_step,
                        "Window intensity change per storey");
  synth_cmd->add_option("--window-w", sa.layout.window_w_m, "Window width (m)");
  synth_cmd->add_option("--window-h", sa.layout.window_h_m, "Window height (m)");
  synth_cmd->add_option("--h-gap", sa.layout.h_gap_m, "Horizontal gap (m)");
  synth_cmd->add_option("--v-gap", sa.layout.v_gap_m, "Vertical gap (m)");
  synth_cmd->add_option("--sill", sa.layout.sill_m, "Lowest window bottom (m)");
  synth_cmd->add_option("--focal", sa.focal, "Focal length (px)");
  synth_cmd->add_option("--width", sa.width, "Image width (px)");
  synth_cmd->add_option("--height", sa.height, "Image height (px)");
  synth_cmd->add_option("--depth", sa.depth, "Depth override (m)");
  synth_cmd->add_option("--start-h", sa.start_h, "Start altitude override (m)");
  synth_cmd->add_option("--end-h", sa.end_h, "End altitude override (m)");

  std::string pred_path, truth_path, eval_out;
  double eval_iou = 0.5;
  auto* eval = app.add_subcommand("eval", "Precision/recall/AP of detections against annotations");
  eval->add_option("--pred", pred_path, "Predicted detections JSON")->required();
  eval->add_option("--truth", truth_path, "Annotation JSON")->required();
  eval->add_option("--iou", eval_iou, "Match IoU threshold");
  eval->add_option("--out", eval_out, "Write metrics JSON here");

  std::string metrics_path, svg_out;
  auto* report = app.add_subcommand("report", "Render the panorama SVG from metrics JSON");
  report->add_option("--metrics", metrics_path, "Metrics JSON")->required();
  report->add_option("--out", svg_out, "SVG output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return fail(kExitInput, "usage", e.what());
  }

  if (*pipeline) return run_pipeline_cmd(pa);
  if (*synth_cmd) return run_synth_cmd(sa);
  if (*eval) return run_eval_cmd(pred_path, truth_path, eval_iou, eval_out);
  if (*report) return run_report_cmd(metrics_path, svg_out);
  return kExitInput;
}
