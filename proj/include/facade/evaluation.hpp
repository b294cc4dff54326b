#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <vector>

#include "facade/error.hpp"
#include "facade/geometry.hpp"

namespace facade {

/// Detection quality. Metrics with an empty denominator are std::nullopt.
struct DetectionMetrics {
  std::size_t predicted = 0;
  std::size_t truth = 0;
  std::size_t matched = 0;
  std::optional<double> precision;
  std::optional<double> recall;
  /// Recall as a percentage.
  std::optional<double> accuracy;
  /// Trapezoidal area under the precision/recall curve.
  std::optional<double> ap;
};

/// One frame's predictions against its ground truth.
struct EvalFrame {
  std::vector<PixelBox> predicted;
  std::vector<PixelBox> truth;
};

namespace detail {

struct ScoredHit {
  double score;
  bool hit;
};

// Greedy one-to-one matching: predictions in descending score order each take
// the unmatched truth box with the highest IoU, provided it reaches match_iou.
inline std::vector<ScoredHit> greedy_match(const std::vector<PixelBox>& predicted,
                                           const std::vector<PixelBox>& truth,
                                           double match_iou) {
  std::vector<std::size_t> order(predicted.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return nms_before(predicted[a], predicted[b]);
  });
  std::vector<bool> used(truth.size(), false);
  std::vector<ScoredHit> hits;
  hits.reserve(predicted.size());
  for (std::size_t i : order) {
    double best = -1.0;
    std::size_t best_j = truth.size();
    for (std::size_t j = 0; j < truth.size(); ++j) {
      if (used[j]) continue;
      const double v = iou(predicted[i], truth[j]);
      if (v >= match_iou && v > best) {
        best = v;
        best_j = j;
      }
    }
    if (best_j < truth.size()) used[best_j] = true;
    hits.push_back({predicted[i].score, best_j < truth.size()});
  }
  return hits;
}

inline DetectionMetrics summarize(std::vector<ScoredHit> hits, std::size_t n_truth) {
  DetectionMetrics m;
  m.predicted = hits.size();
  m.truth = n_truth;
  m.matched = static_cast<std::size_t>(
      std::count_if(hits.begin(), hits.end(), [](const ScoredHit& h) { return h.hit; }));
  if (m.predicted > 0) m.precision = static_cast<double>(m.matched) / m.predicted;
  if (n_truth == 0) return m;
  m.recall = static_cast<double>(m.matched) / n_truth;
  m.accuracy = 100.0 * *m.recall;

  // Sweep every distinct score threshold from high to low. The curve starts
  // at recall 0 with the precision of the first operating point.
  std::stable_sort(hits.begin(), hits.end(),
                   [](const ScoredHit& a, const ScoredHit& b) { return a.score > b.score; });
  double ap = 0.0;
  double prev_r = 0.0, prev_p = -1.0;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    tp += hits[i].hit ? 1 : 0;
    if (i + 1 < hits.size() && hits[i + 1].score == hits[i].score) continue;
    const double r = static_cast<double>(tp) / n_truth;
    const double p = static_cast<double>(tp) / (i + 1);
    if (prev_p < 0.0) prev_p = p;
    ap += (r - prev_r) * 0.5 * (p + prev_p);
    prev_r = r;
    prev_p = p;
  }
  m.ap = ap;
  return m;
}

}  // namespace detail

inline void check_match_iou(double match_iou) {
  if (!(match_iou > 0.0 && match_iou <= 1.0)) {
    throw Error(ErrorKind::InvalidParam, "match_iou must lie in (0,1]");
  }
}

inline DetectionMetrics eval_detections(const std::vector<PixelBox>& predicted,
                                        const std::vector<PixelBox>& truth,
                                        double match_iou = 0.5) {
  check_match_iou(match_iou);
  return detail::summarize(detail::greedy_match(predicted, truth, match_iou), truth.size());
}

/// Pools several frames: matching stays per frame, counts and the
/// precision/recall sweep are aggregated.
inline DetectionMetrics eval_detections(const std::vector<EvalFrame>& frames,
                                        double match_iou = 0.5) {
  check_match_iou(match_iou);
  std::vector<detail::ScoredHit> all;
  std::size_t n_truth = 0;
  for (const auto& f : frames) {
    auto hits = detail::greedy_match(f.predicted, f.truth, match_iou);
    all.insert(all.end(), hits.begin(), hits.end());
    n_truth += f.truth.size();
  }
  return detail::summarize(std::move(all), n_truth);
}

}  // namespace facade
