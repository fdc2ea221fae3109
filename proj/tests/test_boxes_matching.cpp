#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "slhoi/boxes.hpp"
#include "slhoi/errors.hpp"
#include "slhoi/dataset.hpp"
#include "slhoi/matching.hpp"
#include "slhoi/rng.hpp"

using namespace slhoi;

namespace {

// Monte-Carlo IoU oracle: rasterize on a fine grid over the union of extents.
double raster_iou(const Box& a, const Box& b, int res = 2000) {
  CornerBox ca = to_corners(a), cb = to_corners(b);
  const double lo_x = std::min(ca.x1, cb.x1), hi_x = std::max(ca.x2, cb.x2);
  const double lo_y = std::min(ca.y1, cb.y1), hi_y = std::max(ca.y2, cb.y2);
  if (hi_x <= lo_x || hi_y <= lo_y) return 0.0;
  long long ia = 0, iu = 0;
  for (int y = 0; y < res; ++y) {
    const double py = lo_y + (y + 0.5) / res * (hi_y - lo_y);
    for (int x = 0; x < res; ++x) {
      const double px = lo_x + (x + 0.5) / res * (hi_x - lo_x);
      const bool in_a = px > ca.x1 && px < ca.x2 && py > ca.y1 && py < ca.y2;
      const bool in_b = px > cb.x1 && px < cb.x2 && py > cb.y1 && py < cb.y2;
      ia += in_a && in_b;
      iu += in_a || in_b;
    }
  }
  return iu == 0 ? 0.0 : static_cast<double>(ia) / static_cast<double>(iu);
}

// Exhaustive assignment oracle for square or wide cost matrices.
double brute_best(const Mat& cost, std::vector<int>* best_cols = nullptr) {
  const int n = cost.rows(), m = cost.cols();
  std::vector<int> cols(m);
  std::iota(cols.begin(), cols.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  // Permute columns, read off the first n as the assignment.
  std::sort(cols.begin(), cols.end());
  do {
    double c = 0.0;
    for (int r = 0; r < n; ++r) c += cost(r, cols[r]);
    if (c < best) {
      best = c;
      if (best_cols) best_cols->assign(cols.begin(), cols.begin() + n);
    }
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

}  // namespace

TEST_CASE("corner and center-size conversions invert each other") {
  Box b{0.3, 0.6, 0.2, 0.5};
  CornerBox c = to_corners(b);
  CHECK(c.x1 == doctest::Approx(0.2));
  CHECK(c.x2 == doctest::Approx(0.4));
  CHECK(c.y1 == doctest::Approx(0.35));
  CHECK(c.y2 == doctest::Approx(0.85));
  Box back = to_center_size(c);
  CHECK(back.cx == doctest::Approx(b.cx));
  CHECK(back.cy == doctest::Approx(b.cy));
  CHECK(back.w == doctest::Approx(b.w));
  CHECK(back.h == doctest::Approx(b.h));
}

TEST_CASE("IoU matches geometric cases exactly") {
  Box unit{0.5, 0.5, 1.0, 1.0};
  CHECK(box_iou(unit, unit) == doctest::Approx(1.0));

  // Right half of the unit square: intersection 0.5, union 1.0.
  Box right{0.75, 0.5, 0.5, 1.0};
  CHECK(box_iou(unit, right) == doctest::Approx(0.5));

  // Nested quarter box: intersection 0.25, union 1.0.
  Box quarter{0.25, 0.25, 0.5, 0.5};
  CHECK(box_iou(unit, quarter) == doctest::Approx(0.25));

  // Touching edges intersect with zero area.
  Box beside{1.5, 0.5, 1.0, 1.0};
  CHECK(box_iou(unit, beside) == 0.0);

  // Partial overlap: two unit squares offset by (0.5, 0.5):
  // intersection 0.25, union 1.75.
  Box shifted{1.0, 1.0, 1.0, 1.0};
  CHECK(box_iou(unit, shifted) == doctest::Approx(0.25 / 1.75));

  // Degenerate operands give zero, even against themselves.
  Box line{0.5, 0.5, 0.0, 0.3};
  CHECK(box_iou(line, line) == 0.0);
  CHECK(box_iou(unit, line) == 0.0);
}

TEST_CASE("IoU agrees with a rasterized oracle on random boxes") {
  Rng rng(73);
  for (int i = 0; i < 25; ++i) {
    Box a{rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.05, 0.5),
          rng.uniform(0.05, 0.5)};
    Box b{rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.05, 0.5),
          rng.uniform(0.05, 0.5)};
    CHECK(box_iou(a, b) == doctest::Approx(raster_iou(a, b)).epsilon(5e-3));
  }
}

TEST_CASE("GIoU equals IoU minus enclosing-box slack") {
  Box unit{0.5, 0.5, 1.0, 1.0};
  CHECK(box_giou(unit, unit) == doctest::Approx(1.0));

  // Disjoint unit squares side by side: IoU 0, hull 2.0, slack 0 -> GIoU 0.
  Box beside{1.5, 0.5, 1.0, 1.0};
  CHECK(box_giou(unit, beside) == doctest::Approx(0.0));

  // With a gap of 1 between them the hull is 3x1; GIoU = 0 - 1/3.
  Box gapped{2.5, 0.5, 1.0, 1.0};
  CHECK(box_giou(unit, gapped) == doctest::Approx(-1.0 / 3.0));

  // Diagonal offset by (1, 1): hull 2x2 = 4, union 2, slack (4-2)/4.
  Box diag{1.5, 1.5, 1.0, 1.0};
  CHECK(box_giou(unit, diag) == doctest::Approx(-0.5));

  // GIoU never leaves (-1, 1].
  Rng rng(79);
  for (int i = 0; i < 200; ++i) {
    Box a{rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0.01, 1), rng.uniform(0.01, 1)};
    Box b{rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0.01, 1), rng.uniform(0.01, 1)};
    const double v = box_giou(a, b);
    CHECK(v > -1.0);
    CHECK(v <= 1.0);
    CHECK(v <= box_iou(a, b) + 1e-12);
  }
}

TEST_CASE("box L1 sums the four coordinate deltas") {
  Box a{0.1, 0.2, 0.3, 0.4}, b{0.4, 0.0, 0.5, 0.1};
  CHECK(box_l1(a, b) == doctest::Approx(0.3 + 0.2 + 0.2 + 0.3));
}

TEST_CASE("normalize_box maps corner pixels to clamped center-size") {
  Box b = normalize_box(16, 32, 48, 64, 64, 128);
  CHECK(b.cx == doctest::Approx(0.5));
  CHECK(b.cy == doctest::Approx(0.375));
  CHECK(b.w == doctest::Approx(0.5));
  CHECK(b.h == doctest::Approx(0.25));

  // Out-of-canvas corners clamp to the image.
  Box c = normalize_box(-10, -10, 80, 80, 64, 64);
  CHECK(c.cx == doctest::Approx(0.5));
  CHECK(c.cy == doctest::Approx(0.5));
  CHECK(c.w == doctest::Approx(1.0));
  CHECK(c.h == doctest::Approx(1.0));
}

TEST_CASE("assignment solver is exact against brute force") {
  Rng rng(83);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = rng.uniform_int(1, 6);
    const int m = n + rng.uniform_int(0, 3);
    Mat cost(n, m);
    for (std::size_t i = 0; i < cost.size(); ++i)
      cost.data()[i] = rng.uniform(-5.0, 5.0);
    std::vector<int> rows = solve_assignment(cost);
    REQUIRE(static_cast<int>(rows.size()) == n);
    // Feasibility: distinct columns in range.
    std::vector<int> seen;
    for (int c : rows) {
      CHECK(c >= 0);
      CHECK(c < m);
      CHECK(std::find(seen.begin(), seen.end(), c) == seen.end());
      seen.push_back(c);
    }
    CHECK(assignment_cost(cost, rows) == doctest::Approx(brute_best(cost)).epsilon(1e-10));
  }
}

TEST_CASE("matching cost composes class, L1 and GIoU terms") {
  MatchInputs preds;
  preds.human_boxes = Mat::from_list(2, 4, {0.25, 0.25, 0.2, 0.2, 0.7, 0.7, 0.3, 0.3});
  preds.object_boxes = Mat::from_list(2, 4, {0.5, 0.5, 0.1, 0.1, 0.2, 0.8, 0.2, 0.2});
  preds.class_probs = Mat::from_list(2, 3, {0.6, 0.3, 0.1, 0.2, 0.2, 0.6});

  MatchTarget t;
  t.human = Box{0.3, 0.25, 0.2, 0.2};
  t.object = Box{0.5, 0.55, 0.1, 0.1};
  t.class_col = 2;

  MatchWeights w{2.5, 1.25, 0.75};
  Mat cost = matching_cost(preds, {t}, w);  // targets x predictions
  REQUIRE(cost.rows() == 1);
  REQUIRE(cost.cols() == 2);

  for (int i = 0; i < 2; ++i) {
    const Box ph = row_to_box(preds.human_boxes, i);
    const Box po = row_to_box(preds.object_boxes, i);
    const double want = w.w_cls * (-preds.class_probs(i, 2)) +
                        w.w_l1 * (box_l1(ph, t.human) + box_l1(po, t.object)) +
                        w.w_giou * ((1.0 - box_giou(ph, t.human)) + (1.0 - box_giou(po, t.object)));
    CHECK(cost(0, i) == doctest::Approx(want).epsilon(1e-12));
  }

  MatchAssignment asg = hungarian_match(preds, {t}, w);
  REQUIRE(asg.pairs.size() == 1);
  CHECK(asg.pairs[0].second == 0);
  CHECK(asg.pairs[0].first == (cost(0, 0) < cost(0, 1) ? 0 : 1));
}

TEST_CASE("hungarian_match rejects more targets than predictions") {
  MatchInputs preds;
  preds.human_boxes = Mat(1, 4, 0.5);
  preds.object_boxes = Mat(1, 4, 0.5);
  preds.class_probs = Mat(1, 1, 1.0);
  MatchTarget t;
  t.human = t.object = Box{0.5, 0.5, 0.2, 0.2};
  CHECK_THROWS_AS(hungarian_match(preds, {t, t}, MatchWeights{}), DataError);
}

TEST_CASE("matched pairs minimize the summed cost on random instances") {
  Rng rng(89);
  for (int trial = 0; trial < 50; ++trial) {
    const int nq = rng.uniform_int(2, 5);
    const int nt = rng.uniform_int(1, nq);
    MatchInputs preds;
    preds.human_boxes = Mat(nq, 4);
    preds.object_boxes = Mat(nq, 4);
    preds.class_probs = Mat(nq, 3);
    for (int r = 0; r < nq; ++r) {
      for (int c = 0; c < 4; ++c) {
        preds.human_boxes(r, c) = rng.uniform(0.1, 0.9);
        preds.object_boxes(r, c) = rng.uniform(0.1, 0.9);
      }
      double z = 0.0;
      for (int c = 0; c < 3; ++c) {
        preds.class_probs(r, c) = rng.uniform(0.01, 1.0);
        z += preds.class_probs(r, c);
      }
      for (int c = 0; c < 3; ++c) preds.class_probs(r, c) /= z;
    }
    std::vector<MatchTarget> targets(nt);
    for (MatchTarget& t : targets) {
      t.human = Box{rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.1, 0.4),
                    rng.uniform(0.1, 0.4)};
      t.object = Box{rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.1, 0.4),
                     rng.uniform(0.1, 0.4)};
      t.class_col = rng.uniform_int(0, 2);
    }
    MatchWeights w{1.0, 2.0, 1.0};
    Mat cost = matching_cost(preds, targets, w);

    MatchAssignment asg = hungarian_match(preds, targets, w);
    REQUIRE(asg.pairs.size() == targets.size());
    double got = 0.0;
    for (auto [pi, ti] : asg.pairs) got += cost(ti, pi);
    CHECK(got == doctest::Approx(brute_best(cost)).epsilon(1e-10));

    // Pairs arrive sorted by target and use each prediction at most once.
    for (std::size_t i = 1; i < asg.pairs.size(); ++i)
      CHECK(asg.pairs[i - 1].second < asg.pairs[i].second);
  }
}

TEST_CASE("non-finite prediction values fail matching instead of hanging") {
  MatchInputs preds;
  preds.human_boxes = Mat(2, 4);
  preds.object_boxes = Mat(2, 4);
  preds.class_probs = Mat(2, 1, 0.5);
  for (int i = 0; i < 2; ++i) {
    for (int c = 0; c < 4; ++c) {
      preds.human_boxes(i, c) = 0.4;
      preds.object_boxes(i, c) = 0.4;
    }
  }
  preds.human_boxes(1, 0) = std::numeric_limits<double>::quiet_NaN();
  std::vector<MatchTarget> targets(1);
  targets[0].human = Box{0.5, 0.5, 0.2, 0.2};
  targets[0].object = Box{0.5, 0.5, 0.2, 0.2};
  targets[0].class_col = 0;
  CHECK_THROWS_AS(hungarian_match(preds, targets, MatchWeights{1.0, 1.0, 1.0}), NumericalError);
  preds.human_boxes(1, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(hungarian_match(preds, targets, MatchWeights{1.0, 1.0, 1.0}), NumericalError);
}
