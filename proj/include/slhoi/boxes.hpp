#pragma once

namespace slhoi {

// Axis-aligned box in normalized center-size form; the canonical in-model
// representation. Conversions to corner form happen at the IoU/annotation
// boundaries.
struct Box {
  double cx = 0.0, cy = 0.0, w = 0.0, h = 0.0;
};

struct CornerBox {
  double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;
};

CornerBox to_corners(const Box& b);
Box to_center_size(const CornerBox& b);

// Intersection over union. A degenerate (non-positive-area) operand gives 0,
// including against itself.
double box_iou(const Box& a, const Box& b);

// Generalized IoU in (-1, 1]: IoU minus the enclosing-box slack. Falls back
// to 0 when even the enclosing box has zero area.
double box_giou(const Box& a, const Box& b);

// Sum of |delta| over the four center-size coordinates.
double box_l1(const Box& a, const Box& b);

}  // namespace slhoi
