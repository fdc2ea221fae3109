#pragma once

// Straight-line average-precision oracle kept independent of the library's
// evaluator: global stable score ordering, greedy per-image matching on
// min(IoU_human, IoU_object) > 0.5, all-points interpolated area.

#include <algorithm>
#include <vector>

#include "slhoi/boxes.hpp"
#include "slhoi/map_eval.hpp"

namespace slhoi_test {

struct OracleAp {
  double ap = 0.0;
  int num_gt = 0;
};

inline OracleAp oracle_average_precision(const std::vector<slhoi::ImageEval>& images,
                                         int category) {
  struct Cand {
    int image = 0;
    int index = 0;
    double score = 0.0;
  };
  std::vector<Cand> cands;
  int num_gt = 0;
  for (int i = 0; i < static_cast<int>(images.size()); ++i) {
    for (int p = 0; p < static_cast<int>(images[i].predictions.size()); ++p)
      if (images[i].predictions[p].category == category)
        cands.push_back({i, p, images[i].predictions[p].score});
    for (const slhoi::EvalTriplet& g : images[i].ground_truth)
      if (g.category == category) ++num_gt;
  }
  if (num_gt == 0) return {0.0, 0};

  std::stable_sort(cands.begin(), cands.end(),
                   [](const Cand& a, const Cand& b) { return a.score > b.score; });

  std::vector<std::vector<bool>> used(images.size());
  for (std::size_t i = 0; i < images.size(); ++i)
    used[i].assign(images[i].ground_truth.size(), false);

  std::vector<int> is_tp;
  is_tp.reserve(cands.size());
  for (const Cand& c : cands) {
    const slhoi::EvalTriplet& pred = images[c.image].predictions[c.index];
    int best = -1;
    double best_overlap = 0.0;
    const auto& gts = images[c.image].ground_truth;
    for (int gi = 0; gi < static_cast<int>(gts.size()); ++gi) {
      if (used[c.image][gi] || gts[gi].category != category) continue;
      const double overlap = std::min(slhoi::box_iou(pred.human, gts[gi].human),
                                      slhoi::box_iou(pred.object, gts[gi].object));
      if (overlap > best_overlap) {
        best_overlap = overlap;
        best = gi;
      }
    }
    if (best >= 0 && best_overlap > 0.5) {
      used[c.image][best] = true;
      is_tp.push_back(1);
    } else {
      is_tp.push_back(0);
    }
  }

  // Precision at each rank, then the all-points interpolated area: sum of
  // recall increments times the best precision achieved at or after them.
  std::vector<double> precision(is_tp.size()), recall(is_tp.size());
  int tp = 0;
  for (std::size_t k = 0; k < is_tp.size(); ++k) {
    tp += is_tp[k];
    precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
    recall[k] = static_cast<double>(tp) / num_gt;
  }
  for (int k = static_cast<int>(precision.size()) - 2; k >= 0; --k)
    precision[k] = std::max(precision[k], precision[k + 1]);

  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t k = 0; k < is_tp.size(); ++k) {
    if (is_tp[k]) {
      ap += (recall[k] - prev_recall) * precision[k];
      prev_recall = recall[k];
    }
  }
  return {ap, num_gt};
}

}  // namespace slhoi_test
