#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "facade/geometry.hpp"

namespace facade {
namespace {

// Oracle: IoU of integer-aligned boxes by counting unit cells.
double grid_iou(int ax, int ay, int aw, int ah, int bx, int by, int bw, int bh) {
  const int x0 = std::min(ax, bx), y0 = std::min(ay, by);
  const int x1 = std::max(ax + aw, bx + bw), y1 = std::max(ay + ah, by + bh);
  int inter = 0, uni = 0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const bool in_a = x >= ax && x < ax + aw && y >= ay && y < ay + ah;
      const bool in_b = x >= bx && x < bx + bw && y >= by && y < by + bh;
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  }
  return static_cast<double>(inter) / uni;
}

std::vector<PixelBox> random_boxes(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> pos(0.0, 100.0), size(2.0, 30.0), score(0.0, 1.0);
  std::uniform_int_distribution<int> coarse(0, 4);
  std::vector<PixelBox> out;
  for (int i = 0; i < n; ++i) {
    // Coarse scores make ties frequent so the tie-break gets exercised.
    const double s = coarse(rng) == 0 ? 0.5 : score(rng);
    out.push_back({pos(rng), pos(rng), size(rng), size(rng), s});
  }
  return out;
}

TEST(Iou, WorkedExamples) {
  EXPECT_EQ(iou(PixelBox{0, 0, 10, 10}, PixelBox{0, 0, 10, 10}), 1.0);
  EXPECT_EQ(iou(PixelBox{0, 0, 10, 10}, PixelBox{20, 20, 5, 5}), 0.0);
  const double expected = grid_iou(0, 0, 2, 2, 1, 0, 2, 2);
  EXPECT_NEAR(expected, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(iou(PixelBox{0, 0, 2, 2}, PixelBox{1, 0, 2, 2}), expected, 1e-9);
}

TEST(Iou, MatchesGridOracle) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> pos(0, 20), size(1, 12);
  for (int i = 0; i < 300; ++i) {
    const int ax = pos(rng), ay = pos(rng), aw = size(rng), ah = size(rng);
    const int bx = pos(rng), by = pos(rng), bw = size(rng), bh = size(rng);
    EXPECT_NEAR(iou(PixelBox{double(ax), double(ay), double(aw), double(ah)},
                    PixelBox{double(bx), double(by), double(bw), double(bh)}),
                grid_iou(ax, ay, aw, ah, bx, by, bw, bh), 1e-12);
  }
}

TEST(Iou, WorksOnPlaneBoxes) {
  EXPECT_NEAR(iou(PlaneBox{0, 0, 2, 2, 1.0, {}}, PlaneBox{1, 0, 2, 2, 1.0, {}}), 1.0 / 3.0, 1e-12);
}

TEST(Iou, RejectsNonPositiveArea) {
  try {
    iou(PixelBox{0, 0, 0, 10}, PixelBox{0, 0, 10, 10});
    FAIL() << "expected invalid-box error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidBox);
  }
  EXPECT_THROW(iou(PixelBox{0, 0, 10, 10}, PixelBox{0, 0, 10, -1}), Error);
}

TEST(Iou, PropertiesOnRandomBoxes) {
  std::mt19937_64 rng(5);
  const auto boxes = random_boxes(rng, 400);
  for (std::size_t i = 0; i + 1 < boxes.size(); i += 2) {
    const auto& a = boxes[i];
    const auto& b = boxes[i + 1];
    EXPECT_EQ(iou(a, b), iou(b, a));
    EXPECT_EQ(iou(a, a), 1.0);
    const double v = iou(a, b);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    const PixelBox far{a.x + a.w + 1.0, a.y, b.w, b.h};
    EXPECT_EQ(iou(a, far), 0.0);
  }
}

TEST(Nms, WorkedExamples) {
  const std::vector<PixelBox> one{{0, 0, 10, 10, 0.9}};
  EXPECT_EQ(nms(one, 0.3), one);

  const std::vector<PixelBox> dup{{0, 0, 10, 10, 0.9}, {0, 0, 10, 10, 0.8}};
  const auto kept = nms(dup, 0.5);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].score, 0.9);

  const std::vector<PixelBox> apart{{0, 0, 10, 10, 0.9}, {100, 0, 10, 10, 0.8}};
  EXPECT_EQ(nms(apart, 0.5).size(), 2u);
}

TEST(Nms, TieBreakPrefersSmallerYThenX) {
  const std::vector<PixelBox> tied{{2, 1, 10, 10, 0.7}, {1, 1, 10, 10, 0.7}, {0, 2, 10, 10, 0.7}};
  const auto kept = nms(tied, 0.3);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].x, 1.0);
  EXPECT_EQ(kept[0].y, 1.0);
}

TEST(Nms, GroupsRecordSuppressedIndices) {
  const std::vector<PixelBox> boxes{{0, 0, 10, 10, 0.5}, {1, 0, 10, 10, 0.9}, {50, 50, 5, 5, 0.1}};
  const auto groups = nms_groups(std::span<const PixelBox>(boxes), 0.3);
  ASSERT_EQ(groups.size(), 2u);
  EXPECT_EQ(groups[0].kept, 1u);
  EXPECT_EQ(groups[0].suppressed, std::vector<std::size_t>{0});
  EXPECT_EQ(groups[1].kept, 2u);
}

TEST(Nms, RejectsBadThreshold) {
  const std::vector<PixelBox> boxes{{0, 0, 10, 10, 0.5}};
  EXPECT_THROW(nms(boxes, 1.5), Error);
  EXPECT_THROW(nms(boxes, -0.1), Error);
}

TEST(Nms, ThresholdOneKeepsEverythingNotIdentical) {
  std::mt19937_64 rng(3);
  const auto boxes = random_boxes(rng, 60);
  EXPECT_EQ(nms(boxes, 1.0).size(), boxes.size());
}

TEST(Nms, PropertiesOverRandomSets) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> count(0, 25);
  std::uniform_real_distribution<double> thr(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto boxes = random_boxes(rng, count(rng));
    const double t = thr(rng);
    const auto kept = nms(boxes, t);

    for (const auto& k : kept) {
      EXPECT_NE(std::find(boxes.begin(), boxes.end(), k), boxes.end());
    }
    for (std::size_t i = 0; i < kept.size(); ++i) {
      for (std::size_t j = i + 1; j < kept.size(); ++j) EXPECT_LE(iou(kept[i], kept[j]), t);
      if (i > 0) {
        EXPECT_GE(kept[i - 1].score, kept[i].score);
      }
    }
    EXPECT_EQ(nms(kept, t), kept);

    auto shuffled = boxes;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    EXPECT_EQ(nms(shuffled, t), kept);
  }
}

}  // namespace
}  // namespace facade
