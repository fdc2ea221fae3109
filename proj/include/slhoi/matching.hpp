#pragma once

#include <utility>
#include <vector>

#include "slhoi/boxes.hpp"
#include "slhoi/mat.hpp"

namespace slhoi {

// Injective prediction->target assignment; every unmatched prediction is
// implicitly background.
struct MatchAssignment {
  std::vector<std::pair<int, int>> pairs;  // (prediction_index, target_index)
};

// Minimum-cost assignment of every row to a distinct column (rows <= cols),
// shortest-augmenting-path Hungarian. Returns the column chosen per row.
std::vector<int> solve_assignment(const Mat& cost);

double assignment_cost(const Mat& cost, const std::vector<int>& row_to_col);

struct MatchWeights {
  double w_cls = 1.0;
  double w_l1 = 1.0;
  double w_giou = 1.0;
};

struct MatchInputs {
  Mat human_boxes;   // N_q x 4, center-size
  Mat object_boxes;  // N_q x 4
  Mat class_probs;   // N_q x C over the matching category columns
};

struct MatchTarget {
  Box human;
  Box object;
  int class_col = 0;  // column of the target's category in class_probs
};

// cost(i,j) = w_cls * (-p_i(class_j))
//           + w_l1 * (|b_h - t_h|_1 + |b_o - t_o|_1)
//           + w_giou * ((1 - GIoU_h) + (1 - GIoU_o))
Mat matching_cost(const MatchInputs& preds, const std::vector<MatchTarget>& targets,
                  const MatchWeights& w);

// Throws DataError when there are more targets than predictions. Pairs come
// back sorted by target index.
MatchAssignment hungarian_match(const MatchInputs& preds,
                                const std::vector<MatchTarget>& targets,
                                const MatchWeights& w);

Box row_to_box(const Mat& m, int row);

}  // namespace slhoi
