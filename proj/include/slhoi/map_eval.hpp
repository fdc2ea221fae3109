#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "slhoi/boxes.hpp"
#include "slhoi/text_bank.hpp"

namespace slhoi {

struct EvalTriplet {
  Box human;
  Box object;
  int category = 0;
  double score = 0.0;  // ignored on ground truth
};

struct ImageEval {
  std::vector<EvalTriplet> predictions;
  std::vector<EvalTriplet> ground_truth;
};

struct ApResult {
  double ap = 0.0;
  int num_gt = 0;  // categories with no ground truth are excluded from means
};

// Score-descending greedy matching (ties broken by insertion order): a
// prediction is a true positive when the best unmatched same-category ground
// truth in its image has min(IoU_h, IoU_o) > 0.5. AP uses all-points
// interpolation of the precision-recall curve.
ApResult average_precision(const std::vector<ImageEval>& images, int category);

// Per-split mAP over the bank's category groups; splits whose categories all
// lack ground truth come back as nullopt (undefined), never zero.
std::map<std::string, std::optional<double>> evaluate_map(const std::vector<ImageEval>& images,
                                                          const TextBank& bank);

}  // namespace slhoi
