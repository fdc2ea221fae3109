#pragma once

#include <map>
#include <string>
#include <vector>

#include "slhoi/dataset.hpp"
#include "slhoi/graph.hpp"
#include "slhoi/matching.hpp"
#include "slhoi/model.hpp"
#include "slhoi/protocol.hpp"

namespace slhoi {

// Differentiable GIoU for row-paired boxes (center-size); targets are
// constants. Returns an M x 1 column.
Var giou_rows(Graph& g, Var pred_boxes, const Mat& target_boxes);

struct LossBreakdown {
  std::map<std::string, double> terms;  // unweighted term values
  double total = 0.0;
  Var total_var;  // weighted sum on the tape
};

// Matches every image of the batch under the protocol's cost weights.
// category_cols maps bank rows to columns of the classification logits.
std::vector<MatchAssignment> match_batch(const std::vector<ModelForward>& outputs,
                                         const std::vector<const SampleImage*>& batch,
                                         const std::map<int, int>& category_cols,
                                         const ProtocolSpec& proto);

// Batch loss under the protocol:
//   swig: total = w_l1*L1 + w_giou*GIoU + w_int*contrastive + w_conf*confidence
//   hico: total = w_l1*L1 + w_giou*GIoU + w_obj*object_CE + w_int*interaction_CE
// Box terms average over matched pairs; the swig contrastive term is the
// symmetric cross-entropy over the in-batch category set; confidence is BCE
// on matched/unmatched status over every query.
LossBreakdown compute_batch_loss(Graph& g, const std::vector<ModelForward>& outputs,
                                 const std::vector<const SampleImage*>& batch,
                                 const std::vector<MatchAssignment>& assignments,
                                 const std::map<int, int>& category_cols,
                                 const ProtocolSpec& proto);

// The in-batch category set (sorted unique bank rows) for the swig
// contrastive objective; hico always classifies over the full bank.
std::vector<int> category_rows_for_batch(const std::vector<const SampleImage*>& batch,
                                         const TextBank& bank, const ProtocolSpec& proto);

}  // namespace slhoi
