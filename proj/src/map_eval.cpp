#include "slhoi/map_eval.hpp"

#include <algorithm>

namespace slhoi {

ApResult average_precision(const std::vector<ImageEval>& images, int category) {
  struct Candidate {
    int image = 0;
    int index = 0;  // within the image's prediction list
    double score = 0.0;
  };
  std::vector<Candidate> candidates;
  int num_gt = 0;
  for (int i = 0; i < static_cast<int>(images.size()); ++i) {
    for (int k = 0; k < static_cast<int>(images[i].predictions.size()); ++k) {
      if (images[i].predictions[k].category == category)
        candidates.push_back({i, k, images[i].predictions[k].score});
    }
    for (const EvalTriplet& gt : images[i].ground_truth) {
      if (gt.category == category) ++num_gt;
    }
  }
  if (num_gt == 0) return ApResult{0.0, 0};

  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.image != b.image) return a.image < b.image;
    return a.index < b.index;
  });

  // Greedy matching in score order against each image's ground truth.
  std::vector<std::vector<char>> gt_used(images.size());
  for (std::size_t i = 0; i < images.size(); ++i)
    gt_used[i].assign(images[i].ground_truth.size(), 0);

  std::vector<char> is_tp(candidates.size(), 0);
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const Candidate& cand = candidates[c];
    const EvalTriplet& pred = images[cand.image].predictions[cand.index];
    const std::vector<EvalTriplet>& gts = images[cand.image].ground_truth;
    int best = -1;
    double best_overlap = 0.5;  // strict threshold on min(IoU_h, IoU_o)
    for (int gi = 0; gi < static_cast<int>(gts.size()); ++gi) {
      if (gt_used[cand.image][gi] || gts[gi].category != category) continue;
      const double overlap =
          std::min(box_iou(pred.human, gts[gi].human), box_iou(pred.object, gts[gi].object));
      if (overlap > best_overlap) {
        best_overlap = overlap;
        best = gi;
      }
    }
    if (best >= 0) {
      gt_used[cand.image][best] = 1;
      is_tp[c] = 1;
    }
  }

  // All-points interpolation: sum the precision envelope at each recall step.
  const int n = static_cast<int>(candidates.size());
  std::vector<double> precision(n);
  int tp = 0;
  for (int k = 0; k < n; ++k) {
    if (is_tp[k]) ++tp;
    precision[k] = static_cast<double>(tp) / (k + 1);
  }
  for (int k = n - 2; k >= 0; --k) precision[k] = std::max(precision[k], precision[k + 1]);
  double ap = 0.0;
  for (int k = 0; k < n; ++k) {
    if (is_tp[k]) ap += precision[k];
  }
  return ApResult{ap / num_gt, num_gt};
}

std::map<std::string, std::optional<double>> evaluate_map(const std::vector<ImageEval>& images,
                                                          const TextBank& bank) {
  std::map<int, ApResult> per_category;
  for (const CategoryEntry& e : bank.entries) per_category[e.id] = average_precision(images, e.id);

  std::map<std::string, std::optional<double>> report;
  for (const auto& [split, ids] : split_groups(bank)) {
    double sum = 0.0;
    int populated = 0;
    for (int id : ids) {
      const ApResult& r = per_category.at(id);
      if (r.num_gt == 0) continue;
      sum += r.ap;
      ++populated;
    }
    report[split] = populated > 0 ? std::optional<double>(sum / populated) : std::nullopt;
  }
  return report;
}

}  // namespace slhoi
