#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "facade/error.hpp"

namespace facade {

/// Window box in image coordinates. (x, y) is the top-left corner, y grows
/// downward. Real-valued so sub-pixel offsets from matching survive.
struct PixelBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;
  double score = 1.0;

  bool operator==(const PixelBox&) const = default;
};

/// Window box on the global facade plane, in meters. y_m is the bottom edge,
/// measured upward from the facade/ground intersection line.
struct PlaneBox {
  double x_m = 0.0;
  double y_m = 0.0;
  double w_m = 0.0;
  double h_m = 0.0;
  double score = 1.0;
  std::vector<std::string> source_frames;

  bool operator==(const PlaneBox&) const = default;
};

// Uniform interval access: every box is [left, left+width] x [low, low+height]
// on its own axes. The vertical direction does not matter for overlap.
inline double box_left(const PixelBox& b) { return b.x; }
inline double box_low(const PixelBox& b) { return b.y; }
inline double box_width(const PixelBox& b) { return b.w; }
inline double box_height(const PixelBox& b) { return b.h; }
inline double box_score(const PixelBox& b) { return b.score; }

inline double box_left(const PlaneBox& b) { return b.x_m; }
inline double box_low(const PlaneBox& b) { return b.y_m; }
inline double box_width(const PlaneBox& b) { return b.w_m; }
inline double box_height(const PlaneBox& b) { return b.h_m; }
inline double box_score(const PlaneBox& b) { return b.score; }

template <typename B>
concept AxisBox = requires(const B& b) {
  { box_left(b) } -> std::convertible_to<double>;
  { box_low(b) } -> std::convertible_to<double>;
  { box_width(b) } -> std::convertible_to<double>;
  { box_height(b) } -> std::convertible_to<double>;
  { box_score(b) } -> std::convertible_to<double>;
};

namespace detail {

// Area is always computed from edge coordinates so that the intersection of
// a box with itself reproduces its area bit for bit.
template <AxisBox B>
double edge_area(const B& b) {
  const double l = box_left(b);
  const double lo = box_low(b);
  return ((l + box_width(b)) - l) * ((lo + box_height(b)) - lo);
}

template <AxisBox B>
void require_positive_area(const B& b) {
  const double w = box_width(b);
  const double h = box_height(b);
  if (!(w > 0.0) || !(h > 0.0) || !std::isfinite(box_left(b)) ||
      !std::isfinite(box_low(b)) || !std::isfinite(w) || !std::isfinite(h)) {
    throw Error(ErrorKind::InvalidBox,
                "box must have finite coordinates and positive area (w=" +
                    std::to_string(w) + ", h=" + std::to_string(h) + ")");
  }
}

}  // namespace detail

inline void validate(const PixelBox& b) {
  detail::require_positive_area(b);
  if (!(b.score >= 0.0 && b.score <= 1.0)) {
    throw Error(ErrorKind::InvalidBox,
                "box score must lie in [0,1], got " + std::to_string(b.score));
  }
}

inline void validate(const PlaneBox& b) {
  detail::require_positive_area(b);
  if (b.y_m < -b.h_m) {
    throw Error(ErrorKind::InvalidBox, "plane box lies entirely below ground");
  }
}

template <AxisBox B>
double area(const B& b) {
  return detail::edge_area(b);
}

/// Intersection over union of two axis-aligned boxes.
template <AxisBox B>
double iou(const B& a, const B& b) {
  detail::require_positive_area(a);
  detail::require_positive_area(b);
  const double al = box_left(a), ar = al + box_width(a);
  const double bl = box_left(b), br = bl + box_width(b);
  const double alo = box_low(a), ahi = alo + box_height(a);
  const double blo = box_low(b), bhi = blo + box_height(b);

  const double iw = std::min(ar, br) - std::max(al, bl);
  const double ih = std::min(ahi, bhi) - std::max(alo, blo);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;

  const double inter = iw * ih;
  const double uni = detail::edge_area(a) + detail::edge_area(b) - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

/// Strict weak order used by NMS: higher score first, then smaller low
/// coordinate, then smaller left, then size. Makes NMS independent of input
/// order.
template <AxisBox B>
bool nms_before(const B& a, const B& b) {
  const auto key = [](const B& v) {
    return std::make_tuple(-box_score(v), box_low(v), box_left(v), box_width(v),
                           box_height(v));
  };
  return key(a) < key(b);
}

/// One NMS survivor together with the input indices it suppressed.
struct NmsGroup {
  std::size_t kept = 0;
  std::vector<std::size_t> suppressed;
};

/// Greedy score-ordered NMS returning survivor groups in output order.
template <AxisBox B>
std::vector<NmsGroup> nms_groups(std::span<const B> boxes, double iou_threshold) {
  if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0)) {
    throw Error(ErrorKind::InvalidParam, "iou_threshold must lie in [0,1]");
  }
  for (const auto& b : boxes) detail::require_positive_area(b);

  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return nms_before(boxes[i], boxes[j]);
  });

  std::vector<bool> removed(boxes.size(), false);
  std::vector<NmsGroup> groups;
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const std::size_t i = order[oi];
    if (removed[i]) continue;
    NmsGroup g{i, {}};
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      const std::size_t j = order[oj];
      if (removed[j]) continue;
      if (iou(boxes[i], boxes[j]) > iou_threshold) {
        removed[j] = true;
        g.suppressed.push_back(j);
      }
    }
    groups.push_back(std::move(g));
  }
  return groups;
}

/// Greedy NMS: keep the best remaining box, drop everything overlapping it by
/// more than iou_threshold, repeat. Output is in descending score order.
template <AxisBox B>
std::vector<B> nms(std::span<const B> boxes, double iou_threshold) {
  std::vector<B> out;
  for (const auto& g : nms_groups(boxes, iou_threshold)) out.push_back(boxes[g.kept]);
  return out;
}

template <AxisBox B>
std::vector<B> nms(const std::vector<B>& boxes, double iou_threshold) {
  return nms(std::span<const B>(boxes), iou_threshold);
}

}  // namespace facade
