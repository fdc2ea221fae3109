#pragma once

#include <optional>
#include <string>
#include <vector>

#include "slhoi/detector.hpp"
#include "slhoi/graph.hpp"
#include "slhoi/tokens.hpp"
#include "slhoi/transformer.hpp"
#include "slhoi/vision_head.hpp"

namespace slhoi {

enum class InteractionVariant {
  full,
  masked_full,
  bootstrap_only,
  late_fusion_head_only,
  late_fusion_multiscale,
};

InteractionVariant parse_variant(const std::string& name);  // throws ConfigError
const char* variant_name(InteractionVariant v);

struct InteractionConfig {
  int D = 1024;  // must match the vision head width
  int num_heads = 8;
  InteractionVariant variant = InteractionVariant::full;
  int refine_layers = 1;        // full / masked_full
  int late_fusion_layers = 3;   // late-fusion decoder depth

  void validate() const;
};

struct ClassifyOutput {
  Var logits;  // N_q x |categories|, temperature-scaled cosine
  Var probs;   // row-wise softmax of logits
};

// Interaction classification: pair-query formation, refinement of the
// head-bootstrapped queries, and cosine classification against a text bank.
// Also hosts the late-fusion ablation decoders. Parameters live under
// "inter.".
class InteractionModule {
 public:
  InteractionModule(ParamStore& store, const InteractionConfig& cfg, int det_dim,
                    int backbone_dim, Rng& rng);

  const InteractionConfig& config() const { return cfg_; }
  MaskMode mask_mode() const;

  // Q_r: project the mean of each (human, object) embedding pair, d -> D.
  Var form_queries(Graph& g, const DecoderEmbeddings& e) const;

  // One (or refine_layers) residual cross-attention + MLP pass over the
  // bootstrapped queries, conditioned on the head kv sequence. `capture`
  // receives the last layer's cross-attention weights.
  Var refine(Graph& g, Var bootstrapped, Var kv, AttentionRecord* capture = nullptr) const;

  // Late-fusion decoders consume the raw queries and the *query-free* head
  // outputs; the multiscale variant additionally reads backbone patch tokens.
  Var late_fusion_embeddings(Graph& g, Var raw_queries, const TokenSequence& head_out,
                             const TokenSequence* backbone_tokens) const;

  // Variant-appropriate projection into the joint text space (width 2D).
  Var project_to_text(Graph& g, Var embeddings) const;

  // p_ij = softmax_j(tau * cos(e_i, t_j)) over the selected bank rows.
  ClassifyOutput classify(Graph& g, Var text_space_embeddings, const Mat& bank_embeddings,
                          const std::vector<int>& category_rows) const;

  Var temperature(Graph& g) const;  // exp(log_scale) clamped to <= 100, 1x1
  int text_dim() const { return 2 * cfg_.D; }

 private:
  InteractionConfig cfg_;
  int det_dim_;
  int backbone_dim_;

  LinearLayer query_proj_;  // d -> D
  struct RefineLayer {
    LayerNormLayer ln1, ln2;
    AttentionLayer cross_attn;
    MlpLayer mlp;
  };
  std::vector<RefineLayer> refine_;
  LinearLayer text_proj_;  // D -> 2D
  Parameter* log_scale_;

  // Late-fusion stack (width det_dim_).
  struct LateFusion {
    LinearLayer query_proj;     // D -> d
    LinearLayer head_proj;      // D -> d
    LinearLayer backbone_proj;  // backbone dim -> d (multiscale only)
    struct Layer {
      LayerNormLayer ln1, ln2, ln3;
      AttentionLayer self_attn;
      AttentionLayer cross_attn;
      MlpLayer mlp;
    };
    std::vector<Layer> layers;
    LayerNormLayer norm;
    LinearLayer text_proj;  // d -> 2D
  };
  std::optional<LateFusion> late_fusion_;

  bool is_late_fusion() const {
    return cfg_.variant == InteractionVariant::late_fusion_head_only ||
           cfg_.variant == InteractionVariant::late_fusion_multiscale;
  }
};

}  // namespace slhoi
