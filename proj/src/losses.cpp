#include "slhoi/losses.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <set>

#include "slhoi/errors.hpp"

namespace slhoi {

Var giou_rows(Graph& g, Var pred_boxes, const Mat& target_boxes) {
  const int m = pred_boxes->value.rows();
  assert(pred_boxes->value.cols() == 4);
  assert(target_boxes.rows() == m && target_boxes.cols() == 4);

  Var pcx = slice_cols(pred_boxes, 0, 1);
  Var pcy = slice_cols(pred_boxes, 1, 2);
  Var pw = slice_cols(pred_boxes, 2, 3);
  Var ph = slice_cols(pred_boxes, 3, 4);
  Var px1 = sub(pcx, scale(pw, 0.5));
  Var px2 = add(pcx, scale(pw, 0.5));
  Var py1 = sub(pcy, scale(ph, 0.5));
  Var py2 = add(pcy, scale(ph, 0.5));

  Mat tx1(m, 1), ty1(m, 1), tx2(m, 1), ty2(m, 1), ta(m, 1);
  for (int i = 0; i < m; ++i) {
    const CornerBox c = to_corners(row_to_box(target_boxes, i));
    tx1(i, 0) = c.x1;
    ty1(i, 0) = c.y1;
    tx2(i, 0) = c.x2;
    ty2(i, 0) = c.y2;
    ta(i, 0) = (c.x2 - c.x1) * (c.y2 - c.y1);
    if (ta(i, 0) <= 0.0) {
      throw DataError("GIoU loss target " + std::to_string(i) + " has non-positive area");
    }
  }
  Var vx1 = g.input(tx1), vy1 = g.input(ty1), vx2 = g.input(tx2), vy2 = g.input(ty2);

  Var iw = relu(sub(minimum(px2, vx2), maximum(px1, vx1)));
  Var ih = relu(sub(minimum(py2, vy2), maximum(py1, vy1)));
  Var inter = mul(iw, ih);
  Var uni = sub(add(mul(pw, ph), g.input(ta)), inter);
  Var iou = divide(inter, uni);
  Var hull = mul(sub(maximum(px2, vx2), minimum(px1, vx1)),
                 sub(maximum(py2, vy2), minimum(py1, vy1)));
  return sub(iou, divide(sub(hull, uni), hull));
}

std::vector<int> category_rows_for_batch(const std::vector<const SampleImage*>& batch,
                                         const TextBank& bank, const ProtocolSpec& proto) {
  if (proto.kind == ProtocolKind::hico) return bank.all_rows();
  std::set<int> rows;
  for (const SampleImage* img : batch) {
    for (const GroundTruth& gt : img->triplets) rows.insert(gt.category);
  }
  if (rows.empty()) return bank.all_rows();
  return std::vector<int>(rows.begin(), rows.end());
}

std::vector<MatchAssignment> match_batch(const std::vector<ModelForward>& outputs,
                                         const std::vector<const SampleImage*>& batch,
                                         const std::map<int, int>& category_cols,
                                         const ProtocolSpec& proto) {
  assert(outputs.size() == batch.size());
  std::vector<MatchAssignment> out;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    MatchInputs inputs;
    inputs.human_boxes = outputs[i].human_boxes->value;
    inputs.object_boxes = outputs[i].object_boxes->value;
    inputs.class_probs = outputs[i].cls.probs->value;
    std::vector<MatchTarget> targets;
    for (const GroundTruth& gt : batch[i]->triplets) {
      targets.push_back(MatchTarget{gt.human, gt.object, category_cols.at(gt.category)});
    }
    out.push_back(hungarian_match(inputs, targets, proto.match_weights()));
  }
  return out;
}

namespace {

// 0/1 selector lifting matched prediction rows into pair order.
Mat selector(const MatchAssignment& a, int num_queries) {
  Mat s(static_cast<int>(a.pairs.size()), num_queries);
  for (std::size_t k = 0; k < a.pairs.size(); ++k) s(static_cast<int>(k), a.pairs[k].first) = 1.0;
  return s;
}

}  // namespace

LossBreakdown compute_batch_loss(Graph& g, const std::vector<ModelForward>& outputs,
                                 const std::vector<const SampleImage*>& batch,
                                 const std::vector<MatchAssignment>& assignments,
                                 const std::map<int, int>& category_cols,
                                 const ProtocolSpec& proto) {
  assert(outputs.size() == batch.size() && outputs.size() == assignments.size());
  const int num_images = static_cast<int>(batch.size());
  if (num_images == 0) throw DataError("cannot compute a loss over an empty batch");
  const int num_queries = outputs[0].human_boxes->value.rows();
  const double neg_inf = -std::numeric_limits<double>::infinity();

  int total_matched = 0;
  for (const MatchAssignment& a : assignments) total_matched += static_cast<int>(a.pairs.size());

  Var zero = constant_scalar(0.0);
  Var l1_sum = zero, giou_sum = zero;
  std::vector<Var> matched_logit_parts;
  std::vector<int> matched_cols;  // positive column per matched pair

  for (int i = 0; i < num_images; ++i) {
    const MatchAssignment& a = assignments[i];
    const int m = static_cast<int>(a.pairs.size());
    if (m == 0) continue;
    const Mat sel = selector(a, num_queries);
    Mat tgt_h(m, 4), tgt_o(m, 4);
    Mat ones(m, 1, 1.0);
    for (int k = 0; k < m; ++k) {
      const GroundTruth& gt = batch[i]->triplets[a.pairs[k].second];
      tgt_h(k, 0) = gt.human.cx;
      tgt_h(k, 1) = gt.human.cy;
      tgt_h(k, 2) = gt.human.w;
      tgt_h(k, 3) = gt.human.h;
      tgt_o(k, 0) = gt.object.cx;
      tgt_o(k, 1) = gt.object.cy;
      tgt_o(k, 2) = gt.object.w;
      tgt_o(k, 3) = gt.object.h;
      matched_cols.push_back(category_cols.at(gt.category));
    }
    Var sel_v = g.input(sel);
    Var mh = matmul(sel_v, outputs[i].human_boxes);
    Var mo = matmul(sel_v, outputs[i].object_boxes);
    l1_sum = add(l1_sum, sum_all(abs_v(sub(mh, g.input(tgt_h)))));
    l1_sum = add(l1_sum, sum_all(abs_v(sub(mo, g.input(tgt_o)))));
    Var ones_v = g.input(ones);
    giou_sum = add(giou_sum, sum_all(sub(ones_v, giou_rows(g, mh, tgt_h))));
    giou_sum = add(giou_sum, sum_all(sub(ones_v, giou_rows(g, mo, tgt_o))));
    matched_logit_parts.push_back(matmul(sel_v, outputs[i].cls.logits));
  }

  Var l1_term = total_matched > 0 ? scale(l1_sum, 1.0 / total_matched) : zero;
  Var giou_term = total_matched > 0 ? scale(giou_sum, 1.0 / total_matched) : zero;

  // Interaction classification.
  Var inter_term = zero;
  if (total_matched > 0) {
    Var logits = matched_logit_parts.size() == 1 ? matched_logit_parts[0]
                                                 : concat_rows(matched_logit_parts);
    const int cols = logits->value.cols();
    Mat onehot(total_matched, cols);
    for (int k = 0; k < total_matched; ++k) onehot(k, matched_cols[k]) = 1.0;
    Var picked = row_sum(mul(logits, g.input(onehot)));
    Var v2t = scale(sum_all(sub(logsumexp_rows(logits), picked)), 1.0 / total_matched);
    if (proto.kind == ProtocolKind::swig) {
      // Symmetric contrastive objective over the in-batch category set:
      // text->query side is a multi-positive cross-entropy per category.
      Mat pos_mask(cols, total_matched, neg_inf);
      for (int k = 0; k < total_matched; ++k) pos_mask(matched_cols[k], k) = 0.0;
      Var lt = transpose(logits);
      Var t2v_rows = sub(logsumexp_rows(lt), logsumexp_rows(add(lt, g.input(pos_mask))));
      Var t2v = scale(sum_all(t2v_rows), 1.0 / cols);
      inter_term = scale(add(v2t, t2v), 0.5);
    } else {
      inter_term = v2t;
    }
  }

  LossBreakdown out;
  out.terms["l1"] = l1_term->value(0, 0);
  out.terms["giou"] = giou_term->value(0, 0);
  out.terms["interaction"] = inter_term->value(0, 0);

  if (proto.kind == ProtocolKind::swig) {
    Var conf_sum = zero;
    for (int i = 0; i < num_images; ++i) {
      if (!outputs[i].confidence) throw DataError("swig loss requires confidence outputs");
      Mat target(num_queries, 1);
      for (const auto& [pred, tgt] : assignments[i].pairs) target(pred, 0) = 1.0;
      Var logit = outputs[i].confidence->logits;
      conf_sum = add(conf_sum, sum_all(sub(softplus(logit), mul(logit, g.input(target)))));
    }
    Var conf_term = scale(conf_sum, 1.0 / (num_images * num_queries));
    out.terms["confidence"] = conf_term->value(0, 0);
    out.total_var = add(add(add(scale(l1_term, proto.w_l1), scale(giou_term, proto.w_giou)),
                            scale(inter_term, proto.w_interaction)),
                        scale(conf_term, proto.w_confidence));
  } else {
    Var obj_sum = zero;
    for (int i = 0; i < num_images; ++i) {
      if (!outputs[i].object_logits) throw DataError("hico loss requires object logits");
      Var logits = outputs[i].object_logits;
      const int classes = logits->value.cols();
      const int background = classes - 1;
      Mat onehot(num_queries, classes);
      std::vector<int> target_col(num_queries, background);
      for (const auto& [pred, tgt] : assignments[i].pairs) {
        target_col[pred] = batch[i]->triplets[tgt].object_class;
      }
      for (int q = 0; q < num_queries; ++q) onehot(q, target_col[q]) = 1.0;
      Var picked = row_sum(mul(logits, g.input(onehot)));
      obj_sum = add(obj_sum, sum_all(sub(logsumexp_rows(logits), picked)));
    }
    Var obj_term = scale(obj_sum, 1.0 / (num_images * num_queries));
    out.terms["object_class"] = obj_term->value(0, 0);
    out.total_var = add(add(add(scale(l1_term, proto.w_l1), scale(giou_term, proto.w_giou)),
                            scale(obj_term, proto.w_object)),
                        scale(inter_term, proto.w_interaction));
  }

  out.total = out.total_var->value(0, 0);
  return out;
}

}  // namespace slhoi
