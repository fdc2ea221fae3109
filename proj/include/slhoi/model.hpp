#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "slhoi/backbone.hpp"
#include "slhoi/detector.hpp"
#include "slhoi/interaction.hpp"
#include "slhoi/vision_head.hpp"

namespace slhoi {

struct ModelConfig {
  BackboneConfig backbone;
  HeadConfig head;
  DetectionConfig det;
  InteractionConfig inter;
  ProtocolKind protocol = ProtocolKind::swig;

  void validate() const;  // cross-module dimension / variant consistency
};

// Frozen per-image work (backbone pass + query-free head pass); independent of
// every learnable parameter, so it is computed once per image and reused
// across training iterations.
struct ImageContext {
  TokenSequence backbone_tokens;
  TokenSequence head_plain;
};

struct ModelForward {
  Var human_boxes;   // N_q x 4, center-size in [0,1]
  Var object_boxes;
  Var raw_queries;   // Q_r
  Var bootstrapped;  // Q_r' (null under late-fusion variants)
  Var refined;       // E_r (full/masked_full only)
  Var text_embeddings;  // N_q x 2D
  ClassifyOutput cls;
  std::optional<ConfidenceOutput> confidence;  // swig
  Var object_logits;                           // hico
};

struct ForwardCaptures {
  bool want_head_blocks = false;
  bool want_refine = false;
  bool want_decoder_cross = false;
  std::vector<AttentionRecord> head_blocks;
  AttentionRecord refine_cross;
  AttentionRecord decoder_cross;
};

class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  const Backbone& backbone() const { return *backbone_; }
  const VisionHead& head() const { return *head_; }
  const Detector& detector() const { return *detector_; }
  const InteractionModule& interaction() const { return *interaction_; }

  ImageContext encode_image(const Image& img,
                            AttentionRecord* backbone_attention = nullptr) const;

  // Full differentiable pass from cached frozen features to classification.
  // category_rows selects the bank columns classification runs over.
  ModelForward forward(Graph& g, const ImageContext& ctx, const Mat& bank_embeddings,
                       const std::vector<int>& category_rows,
                       ForwardCaptures* captures = nullptr) const;

 private:
  ModelConfig cfg_;
  ParamStore store_;
  std::optional<Backbone> backbone_;
  std::optional<VisionHead> head_;
  std::optional<Detector> detector_;
  std::optional<InteractionModule> interaction_;
};

}  // namespace slhoi
