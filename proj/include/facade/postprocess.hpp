#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "facade/detail/correlate.hpp"
#include "facade/error.hpp"
#include "facade/geometry.hpp"
#include "facade/image.hpp"

namespace facade {

/// Rotation variants tried for every seed window, in degrees.
inline constexpr std::array<double, 3> kTemplateRotations = {-2.5, 0.0, 2.5};

/// Smallest patch side (pixels) worth matching.
inline constexpr int kMinTemplateSide = 4;

/// Score multiplier applied to template-match candidates so that an original
/// detection beats its own echo at equal overlap.
inline constexpr double kCandidateScoreScale = 0.99;

struct Template {
  GrayImage pixels;
  double rotation_deg = 0.0;
  PixelBox origin_box;
  // Top-left pixel of the crop inside the source image. Differs from the
  // origin box by its sub-pixel part and by clamping at the image border.
  int crop_x = 0;
  int crop_y = 0;
};

struct MatchParams {
  double ncc_threshold = 0.80;
  double strip_margin = 0.5;
  double nms_iou = 0.3;
  /// Minimum distance between accepted peaks; unset means half the template width.
  std::optional<double> peak_min_separation;
};

inline void validate(const MatchParams& p) {
  if (!(p.ncc_threshold > 0.0 && p.ncc_threshold <= 1.0)) {
    throw Error(ErrorKind::InvalidParam, "ncc_threshold must lie in (0,1]");
  }
  if (!(p.strip_margin >= 0.0)) throw Error(ErrorKind::InvalidParam, "strip_margin must be >= 0");
  if (!(p.nms_iou >= 0.0 && p.nms_iou <= 1.0)) {
    throw Error(ErrorKind::InvalidParam, "nms_iou must lie in [0,1]");
  }
  if (p.peak_min_separation && !(*p.peak_min_separation >= 0.0)) {
    throw Error(ErrorKind::InvalidParam, "peak_min_separation must be >= 0");
  }
}

/// Vertical search band [y_lo, y_hi] in image rows; spans the full width.
struct Band {
  double y_lo = 0.0;
  double y_hi = 0.0;

  bool operator==(const Band&) const = default;
};

/// Rotates a patch about its center with bilinear sampling. Samples falling
/// outside the patch take the nearest edge value; the output keeps the input
/// dimensions.
inline GrayImage rotate_patch(const GrayImage& patch, double degrees) {
  if (degrees == 0.0) return patch;
  const int w = patch.width(), h = patch.height();
  const double theta = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(theta), sn = std::sin(theta);
  const double cx = 0.5 * (w - 1), cy = 0.5 * (h - 1);
  GrayImage out(w, h);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double dx = c - cx, dy = r - cy;
      const double sx = std::clamp(cx + cs * dx + sn * dy, 0.0, static_cast<double>(w - 1));
      const double sy = std::clamp(cy - sn * dx + cs * dy, 0.0, static_cast<double>(h - 1));
      const int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
      const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
      const double fx = sx - x0, fy = sy - y0;
      const double top = (1 - fx) * patch.at(x0, y0) + fx * patch.at(x1, y0);
      const double bot = (1 - fx) * patch.at(x0, y1) + fx * patch.at(x1, y1);
      out.at(c, r) = static_cast<std::uint8_t>(
          std::clamp(std::lround((1 - fy) * top + fy * bot), 0L, 255L));
    }
  }
  return out;
}

/// Cuts each detection out of the image and adds its rotated variants.
/// Patches smaller than kMinTemplateSide after clamping are skipped and
/// reported through `warnings`.
inline std::vector<Template> extract_templates(const GrayImage& image,
                                               const std::vector<PixelBox>& detections,
                                               std::vector<std::string>* warnings = nullptr) {
  if (detections.empty()) {
    throw Error(ErrorKind::NoSeed, "template extraction needs at least one detected window");
  }
  std::vector<Template> out;
  out.reserve(detections.size() * kTemplateRotations.size());
  for (const auto& det : detections) {
    validate(det);
    const int x0 = std::max(0, static_cast<int>(std::lround(det.x)));
    const int y0 = std::max(0, static_cast<int>(std::lround(det.y)));
    const int x1 = std::min(image.width(), static_cast<int>(std::lround(det.x + det.w)));
    const int y1 = std::min(image.height(), static_cast<int>(std::lround(det.y + det.h)));
    if (x1 - x0 < kMinTemplateSide || y1 - y0 < kMinTemplateSide) {
      if (warnings) {
        warnings->push_back("skipped degenerate seed at (" + std::to_string(det.x) + ", " +
                            std::to_string(det.y) + ") size " + std::to_string(x1 - x0) + "x" +
                            std::to_string(std::max(0, y1 - y0)) + " px");
      }
      continue;
    }
    const GrayImage patch = image.crop(x0, y0, x1 - x0, y1 - y0);
    for (double deg : kTemplateRotations) {
      out.push_back(Template{rotate_patch(patch, deg), deg, det, x0, y0});
    }
  }
  return out;
}

/// Rows searched for windows of the seed's storey.
inline Band storey_strip(const PixelBox& seed, double image_h, const MatchParams& params) {
  const double pad = params.strip_margin * seed.h;
  return {std::max(0.0, seed.y - pad), std::min(image_h, seed.y + seed.h + pad)};
}

namespace detail {

// Integral images and spectrum of one band, shared by every template whose
// strip covers the same rows.
class BandSearcher {
 public:
  BandSearcher(const GrayImage& image, int row0, int row1)
      : row0_(row0), region_(image.crop(0, row0, image.width(), row1 - row0)),
        integral_(region_), correlator_(region_) {}

  int row0() const noexcept { return row0_; }

  // ZNCC map over all placements, (rw - tw + 1) x (rh - th + 1), row-major.
  std::vector<double> zncc(const GrayImage& tmpl) const {
    const int tw = tmpl.width(), th = tmpl.height();
    const auto dots = correlator_.correlate(tmpl);
    const int nu = region_.width() - tw + 1, nv = region_.height() - th + 1;
    const std::int64_t n = static_cast<std::int64_t>(tw) * th;
    std::int64_t st = 0, stt = 0;
    for (auto v : tmpl.pixels()) {
      st += v;
      stt += static_cast<std::int64_t>(v) * v;
    }
    const std::int64_t var_t = n * stt - st * st;
    std::vector<double> out(dots.size(), 0.0);
    if (var_t == 0) return out;
    for (int v = 0; v < nv; ++v) {
      for (int u = 0; u < nu; ++u) {
        const std::int64_t si = integral_.sum(u, v, tw, th);
        const std::int64_t var_i = n * integral_.sum_sq(u, v, tw, th) - si * si;
        if (var_i == 0) continue;  // flat placement scores 0
        const std::size_t k = static_cast<std::size_t>(v) * nu + u;
        const std::int64_t num = n * dots[k] - st * si;
        const double den = std::sqrt(static_cast<double>(var_t) * static_cast<double>(var_i));
        out[k] = std::clamp(static_cast<double>(num) / den, -1.0, 1.0);
      }
    }
    return out;
  }

  int region_width() const { return region_.width(); }
  int region_height() const { return region_.height(); }

 private:
  int row0_;
  GrayImage region_;
  IntegralImage integral_;
  RegionCorrelator correlator_;
};

inline std::pair<int, int> band_rows(const Band& band, int image_h) {
  const int r0 = std::clamp(static_cast<int>(std::ceil(band.y_lo - 1e-9)), 0, image_h);
  const int r1 = std::clamp(static_cast<int>(std::floor(band.y_hi + 1e-9)), 0, image_h);
  return {r0, std::max(r0, r1)};
}

inline std::vector<PixelBox> find_peaks(const BandSearcher& searcher, const Template& t,
                                        const MatchParams& params) {
  const int tw = t.pixels.width(), th = t.pixels.height();
  if (tw > searcher.region_width() || th > searcher.region_height()) {
    throw Error(ErrorKind::BandTooSmall,
                "template " + std::to_string(tw) + "x" + std::to_string(th) +
                    " does not fit search band of height " +
                    std::to_string(searcher.region_height()));
  }
  const auto score = searcher.zncc(t.pixels);
  const int nu = searcher.region_width() - tw + 1;
  const int nv = searcher.region_height() - th + 1;

  struct Peak {
    double s;
    int v, u;
  };
  std::vector<Peak> peaks;
  for (int v = 0; v < nv; ++v) {
    for (int u = 0; u < nu; ++u) {
      const double s = score[static_cast<std::size_t>(v) * nu + u];
      if (s < params.ncc_threshold) continue;
      bool is_max = true;
      for (int dv = -1; dv <= 1 && is_max; ++dv) {
        for (int du = -1; du <= 1; ++du) {
          const int vv = v + dv, uu = u + du;
          if ((dv == 0 && du == 0) || vv < 0 || uu < 0 || vv >= nv || uu >= nu) continue;
          if (score[static_cast<std::size_t>(vv) * nu + uu] > s) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) peaks.push_back({s, v, u});
    }
  }
  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
    if (a.s != b.s) return a.s > b.s;
    if (a.v != b.v) return a.v < b.v;
    return a.u < b.u;
  });

  const double sep = params.peak_min_separation.value_or(0.5 * tw);
  std::vector<Peak> accepted;
  for (const auto& p : peaks) {
    const bool far = std::all_of(accepted.begin(), accepted.end(), [&](const Peak& q) {
      return std::hypot(static_cast<double>(p.u - q.u), static_cast<double>(p.v - q.v)) >= sep;
    });
    if (far) accepted.push_back(p);
  }

  const double dx = t.origin_box.x - t.crop_x;
  const double dy = t.origin_box.y - t.crop_y;
  std::vector<PixelBox> out;
  out.reserve(accepted.size());
  for (const auto& p : accepted) {
    out.push_back(PixelBox{p.u + dx, searcher.row0() + p.v + dy, t.origin_box.w,
                           t.origin_box.h, std::clamp(p.s, 0.0, 1.0)});
  }
  return out;
}

}  // namespace detail

/// Zero-normalized cross-correlation search of one template over a band.
/// Returns separated local maxima scoring at least params.ncc_threshold, as
/// boxes with the template's origin size.
inline std::vector<PixelBox> match_template(const GrayImage& image, const Template& tmpl,
                                            const Band& band, const MatchParams& params) {
  validate(params);
  const auto [r0, r1] = detail::band_rows(band, image.height());
  if (tmpl.pixels.height() > r1 - r0 || tmpl.pixels.width() > image.width()) {
    throw Error(ErrorKind::BandTooSmall, "template larger than search band");
  }
  const detail::BandSearcher searcher(image, r0, r1);
  return detail::find_peaks(searcher, tmpl, params);
}

struct FrameResult {
  std::vector<PixelBox> boxes;
  std::size_t originals = 0;
  std::size_t candidates = 0;
  std::vector<std::string> warnings;
};

/// Completes one frame's detections: every detection and its rotated variants
/// are searched along their storey strip. Matches that overlap an original
/// detection are dropped, so completion only ever adds boxes; the remaining
/// candidates and the originals then go through NMS.
inline FrameResult post_process_frame_detailed(const GrayImage& image,
                                               const std::vector<PixelBox>& detections,
                                               const MatchParams& params) {
  validate(params);
  FrameResult res;
  const auto templates = extract_templates(image, detections, &res.warnings);

  std::vector<PixelBox> pool(detections.begin(), detections.end());
  res.originals = detections.size();

  std::map<std::pair<int, int>, detail::BandSearcher> searchers;
  for (const auto& t : templates) {
    const Band band = storey_strip(t.origin_box, image.height(), params);
    const auto rows = detail::band_rows(band, image.height());
    if (t.pixels.height() > rows.second - rows.first) {
      res.warnings.push_back("template taller than its storey strip; skipped");
      continue;
    }
    auto it = searchers.find(rows);
    if (it == searchers.end()) {
      it = searchers.try_emplace(rows, image, rows.first, rows.second).first;
    }
    for (auto cand : detail::find_peaks(it->second, t, params)) {
      const bool covered = std::any_of(detections.begin(), detections.end(),
                                       [&](const PixelBox& d) { return iou(cand, d) > params.nms_iou; });
      if (covered) continue;
      cand.score *= kCandidateScoreScale;
      pool.push_back(cand);
      ++res.candidates;
    }
  }
  res.boxes = nms(pool, params.nms_iou);
  return res;
}

inline std::vector<PixelBox> post_process_frame(const GrayImage& image,
                                                const std::vector<PixelBox>& detections,
                                                const MatchParams& params = {}) {
  return post_process_frame_detailed(image, detections, params).boxes;
}

}  // namespace facade
