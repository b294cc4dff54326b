#pragma once

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "facade/error.hpp"
#include "facade/evaluation.hpp"
#include "facade/pipeline.hpp"
#include "facade/plane_map.hpp"

namespace facade {

inline nlohmann::json metrics_to_json(const FacadeMetrics& m) {
  nlohmann::json windows = nlohmann::json::array();
  for (const auto& b : m.unique_windows) {
    windows.push_back({{"x_m", b.x_m},
                       {"y_m", b.y_m},
                       {"w_m", b.w_m},
                       {"h_m", b.h_m},
                       {"score", b.score},
                       {"source_frames", b.source_frames}});
  }
  nlohmann::json bands = nlohmann::json::array();
  for (const auto& b : m.storey_bands) bands.push_back({{"lo_m", b.lo}, {"hi_m", b.hi}});
  return {{"window_count", m.window_count},
          {"storey_count", m.storey_count},
          {"windows_per_storey", m.windows_per_storey},
          {"area_ratio", m.area_ratio},
          {"facade_extent",
           {{"x_m", m.facade_extent.x_m},
            {"y_m", m.facade_extent.y_m},
            {"w_m", m.facade_extent.w_m},
            {"h_m", m.facade_extent.h_m}}},
          {"storey_bands", std::move(bands)},
          {"unique_windows", std::move(windows)}};
}

/// Inverse of metrics_to_json. The extent origin and storey bands are
/// optional; missing bands are recomputed from the windows.
inline FacadeMetrics metrics_from_json(const nlohmann::json& doc) {
  FacadeMetrics m;
  try {
    m.window_count = doc.at("window_count").get<int>();
    m.storey_count = doc.at("storey_count").get<int>();
    m.windows_per_storey = doc.at("windows_per_storey").get<std::vector<int>>();
    m.area_ratio = doc.at("area_ratio").get<double>();
    const auto& e = doc.at("facade_extent");
    m.facade_extent = {e.value("x_m", 0.0), e.value("y_m", 0.0), e.at("w_m").get<double>(),
                       e.at("h_m").get<double>()};
    for (const auto& w : doc.at("unique_windows")) {
      PlaneBox b{w.at("x_m").get<double>(), w.at("y_m").get<double>(),
                 w.at("w_m").get<double>(), w.at("h_m").get<double>(), w.value("score", 1.0),
                 w.value("source_frames", std::vector<std::string>{})};
      validate(b);
      m.unique_windows.push_back(std::move(b));
    }
    if (doc.contains("storey_bands")) {
      for (const auto& b : doc.at("storey_bands")) {
        m.storey_bands.push_back({b.at("lo_m").get<double>(), b.at("hi_m").get<double>()});
      }
    } else {
      m.storey_bands = count_storeys(m.unique_windows).storey_bands;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("metrics JSON: ") + e.what());
  }
  if (m.window_count != static_cast<int>(m.unique_windows.size())) {
    throw Error(ErrorKind::Validation, "window_count does not match unique_windows");
  }
  return m;
}

inline nlohmann::json diagnostics_to_json(const std::vector<FrameDiagnostics>& diags) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& d : diags) {
    arr.push_back({{"frame", d.frame},
                   {"originals", d.originals},
                   {"candidates", d.candidates},
                   {"kept", d.kept},
                   {"warnings", d.warnings}});
  }
  return arr;
}

inline nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json detection_metrics_to_json(const DetectionMetrics& m) {
  return {{"predicted", m.predicted},
          {"truth", m.truth},
          {"matched", m.matched},
          {"precision", optional_json(m.precision)},
          {"recall", optional_json(m.recall)},
          {"accuracy_pct", optional_json(m.accuracy)},
          {"ap", optional_json(m.ap)}};
}

/// One-line run summary; the format is stable.
inline std::string summary_line(const FacadeMetrics& m) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "windows=%d storeys=%d area_ratio=%.4f", m.window_count,
                m.storey_count, m.area_ratio);
  return buf;
}

namespace detail {

inline std::string fmt2(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace detail

/// Panoramic view of the mapped facade: one rect per unique window, storey
/// guide lines and W/S labels. Plane y is up, so it is flipped for SVG.
inline std::string render_panorama_svg(const FacadeMetrics& m) {
  using detail::fmt2;
  constexpr double kScale = 40.0;  // SVG units per meter
  constexpr double kMargin = 40.0;
  constexpr double kLabelBand = 30.0;

  Rect ext = m.facade_extent;
  if (!(ext.w_m > 0.0 && ext.h_m > 0.0)) ext = auto_extent(m.unique_windows, 0.5);
  const bool empty = !(ext.w_m > 0.0 && ext.h_m > 0.0);
  const double width = empty ? 200.0 : ext.w_m * kScale + 2 * kMargin;
  const double height = (empty ? 60.0 : ext.h_m * kScale + 2 * kMargin) + kLabelBand;
  const double top_m = ext.y_m + ext.h_m;
  const auto sx = [&](double x) { return kMargin + (x - ext.x_m) * kScale; };
  const auto sy = [&](double y) { return kLabelBand + kMargin + (top_m - y) * kScale; };

  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt2(width) + "\" height=\"" +
       fmt2(height) + "\" viewBox=\"0 0 " + fmt2(width) + " " + fmt2(height) + "\">\n";
  s += "  <style>.facade{fill:#eeeeee;stroke:#555555;stroke-width:1}"
       ".window{fill:#9ec5fe;stroke:#0d47a1;stroke-width:1.5}"
       ".storey{stroke:#d32f2f;stroke-width:1;stroke-dasharray:4 3}"
       ".label{font-family:sans-serif;font-size:14px;fill:#222222}</style>\n";
  s += "  <rect x=\"0\" y=\"0\" width=\"" + fmt2(width) + "\" height=\"" + fmt2(height) +
       "\" fill=\"#ffffff\"/>\n";
  if (!empty) {
    s += "  <rect class=\"facade\" x=\"" + fmt2(sx(ext.x_m)) + "\" y=\"" + fmt2(sy(top_m)) +
         "\" width=\"" + fmt2(ext.w_m * kScale) + "\" height=\"" + fmt2(ext.h_m * kScale) +
         "\"/>\n";
    for (std::size_t i = 0; i < m.storey_bands.size(); ++i) {
      const auto& b = m.storey_bands[i];
      for (double y : {b.lo, b.hi}) {
        s += "  <line class=\"storey\" x1=\"" + fmt2(sx(ext.x_m)) + "\" y1=\"" + fmt2(sy(y)) +
             "\" x2=\"" + fmt2(sx(ext.x_m + ext.w_m)) + "\" y2=\"" + fmt2(sy(y)) + "\"/>\n";
      }
      const int count = i < m.windows_per_storey.size() ? m.windows_per_storey[i] : 0;
      s += "  <text class=\"label\" x=\"" + fmt2(sx(ext.x_m) + 4) + "\" y=\"" +
           fmt2(sy(b.hi) - 4) + "\">S" + std::to_string(i + 1) + ": " + std::to_string(count) +
           "</text>\n";
    }
    for (const auto& w : m.unique_windows) {
      s += "  <rect class=\"window\" x=\"" + fmt2(sx(w.x_m)) + "\" y=\"" + fmt2(sy(w.y_m + w.h_m)) +
           "\" width=\"" + fmt2(w.w_m * kScale) + "\" height=\"" + fmt2(w.h_m * kScale) + "\"/>\n";
    }
  }
  s += "  <text class=\"label\" x=\"" + fmt2(kMargin / 2) + "\" y=\"20.00\">W=" +
       std::to_string(m.window_count) + " S=" + std::to_string(m.storey_count) + "</text>\n";
  s += "</svg>\n";
  return s;
}

}  // namespace facade
