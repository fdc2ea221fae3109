#include "slhoi/model.hpp"

#include <string>

#include "slhoi/errors.hpp"

namespace slhoi {

void ModelConfig::validate() const {
  backbone.validate();
  head.validate();
  det.validate();
  inter.validate();
  if (head.dim != backbone.dim) {
    throw ConfigError("head dim " + std::to_string(head.dim) + " must equal backbone dim " +
                      std::to_string(backbone.dim));
  }
  if (inter.D != backbone.dim) {
    throw ConfigError("interaction width D " + std::to_string(inter.D) +
                      " must equal backbone dim " + std::to_string(backbone.dim));
  }
}

Model::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  backbone_.emplace(store_, cfg_.backbone, rng);
  head_.emplace(store_, cfg_.head, rng);
  detector_.emplace(store_, cfg_.det, cfg_.backbone.dim, cfg_.protocol, rng);
  interaction_.emplace(store_, cfg_.inter, cfg_.det.d, cfg_.backbone.dim, rng);
}

ImageContext Model::encode_image(const Image& img, AttentionRecord* backbone_attention) const {
  ImageContext ctx;
  ctx.backbone_tokens = backbone_->encode(img, backbone_attention);
  ctx.head_plain = head_->forward_plain(ctx.backbone_tokens);
  return ctx;
}

ModelForward Model::forward(Graph& g, const ImageContext& ctx, const Mat& bank_embeddings,
                            const std::vector<int>& category_rows,
                            ForwardCaptures* captures) const {
  ModelForward out;

  Detector::Memory memory;
  if (cfg_.protocol == ProtocolKind::hico) {
    const Mat head_cls = ctx.head_plain.segment_values(Segment::Class);
    memory = detector_->adapt(g, ctx.backbone_tokens, &head_cls);
  } else {
    memory = detector_->adapt(g, ctx.backbone_tokens);
  }

  AttentionRecord* dec_cap =
      (captures && captures->want_decoder_cross) ? &captures->decoder_cross : nullptr;
  DecoderEmbeddings pairs = detector_->decode_instances(g, memory, dec_cap);
  out.human_boxes = detector_->predict_boxes(g, pairs.human, true);
  out.object_boxes = detector_->predict_boxes(g, pairs.object, false);
  out.raw_queries = interaction_->form_queries(g, pairs);

  const InteractionVariant variant = cfg_.inter.variant;
  const bool capture_head = captures && captures->want_head_blocks;
  if (variant == InteractionVariant::full || variant == InteractionVariant::masked_full) {
    BootstrapOutput boot = head_->forward_bootstrapped(g, out.raw_queries, ctx.backbone_tokens,
                                                       interaction_->mask_mode(), capture_head);
    if (capture_head) captures->head_blocks = boot.block_attention;
    out.bootstrapped = boot.queries_out;
    Var kv = VisionHead::build_kv(boot);
    AttentionRecord* ref_cap =
        (captures && captures->want_refine) ? &captures->refine_cross : nullptr;
    out.refined = interaction_->refine(g, boot.queries_out, kv, ref_cap);
    out.text_embeddings = interaction_->project_to_text(g, out.refined);
  } else if (variant == InteractionVariant::bootstrap_only) {
    BootstrapOutput boot = head_->forward_bootstrapped(g, out.raw_queries, ctx.backbone_tokens,
                                                       MaskMode::none, capture_head);
    if (capture_head) captures->head_blocks = boot.block_attention;
    out.bootstrapped = boot.queries_out;
    out.text_embeddings = interaction_->project_to_text(g, boot.queries_out);
  } else {
    const TokenSequence* bb = variant == InteractionVariant::late_fusion_multiscale
                                  ? &ctx.backbone_tokens
                                  : nullptr;
    Var lf = interaction_->late_fusion_embeddings(g, out.raw_queries, ctx.head_plain, bb);
    out.text_embeddings = interaction_->project_to_text(g, lf);
  }

  out.cls = interaction_->classify(g, out.text_embeddings, bank_embeddings, category_rows);

  if (cfg_.protocol == ProtocolKind::swig) {
    out.confidence = detector_->predict_confidence(g, pairs);
  } else {
    out.object_logits = detector_->predict_object_logits(g, pairs.object);
  }
  return out;
}

}  // namespace slhoi
