#include "slhoi/boxes.hpp"

#include <algorithm>
#include <cmath>

namespace slhoi {

CornerBox to_corners(const Box& b) {
  return CornerBox{b.cx - 0.5 * b.w, b.cy - 0.5 * b.h, b.cx + 0.5 * b.w, b.cy + 0.5 * b.h};
}

Box to_center_size(const CornerBox& b) {
  return Box{0.5 * (b.x1 + b.x2), 0.5 * (b.y1 + b.y2), b.x2 - b.x1, b.y2 - b.y1};
}

namespace {

double area(const CornerBox& b) {
  return std::max(0.0, b.x2 - b.x1) * std::max(0.0, b.y2 - b.y1);
}

double intersection_area(const CornerBox& a, const CornerBox& b) {
  const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  return std::max(0.0, w) * std::max(0.0, h);
}

}  // namespace

double box_iou(const Box& a, const Box& b) {
  const CornerBox ca = to_corners(a), cb = to_corners(b);
  const double aa = area(ca), ab = area(cb);
  if (aa <= 0.0 || ab <= 0.0) return 0.0;
  const double inter = intersection_area(ca, cb);
  return inter / (aa + ab - inter);
}

double box_giou(const Box& a, const Box& b) {
  const CornerBox ca = to_corners(a), cb = to_corners(b);
  const double aa = area(ca), ab = area(cb);
  const double inter = (aa <= 0.0 || ab <= 0.0) ? 0.0 : intersection_area(ca, cb);
  const double uni = aa + ab - inter;
  const double iou = uni > 0.0 ? inter / uni : 0.0;
  const CornerBox hull{std::min(ca.x1, cb.x1), std::min(ca.y1, cb.y1),
                       std::max(ca.x2, cb.x2), std::max(ca.y2, cb.y2)};
  const double hull_area = area(hull);
  if (hull_area <= 0.0) return iou;
  return iou - (hull_area - uni) / hull_area;
}

double box_l1(const Box& a, const Box& b) {
  return std::abs(a.cx - b.cx) + std::abs(a.cy - b.cy) + std::abs(a.w - b.w) +
         std::abs(a.h - b.h);
}

}  // namespace slhoi
