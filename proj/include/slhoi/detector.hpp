#pragma once

#include <optional>
#include <vector>

#include "slhoi/graph.hpp"
#include "slhoi/tokens.hpp"
#include "slhoi/transformer.hpp"

namespace slhoi {

enum class ProtocolKind { swig, hico };

struct DetectionConfig {
  int d = 256;             // detection width
  int num_heads = 8;
  int adapter_layers = 2;  // L_E
  int decoder_layers = 3;  // L_D
  int num_queries = 64;    // N_q per set
  int num_object_classes = 80;  // hico protocol; background class is appended

  void validate() const;
};

struct DecoderEmbeddings {
  Var human;   // N_q x d
  Var object;  // N_q x d
};

struct ConfidenceOutput {
  Var logits;  // N_q x 1
  Var probs;   // sigmoid(logits)
};

// Learnable interactive human-object detection: 1x1 projection + sine
// positions + L_E self-attention layers over patch tokens, then a dual-query
// decoder and box / score heads. Parameters live under "det.".
class Detector {
 public:
  Detector(ParamStore& store, const DetectionConfig& cfg, int backbone_dim,
           ProtocolKind protocol, Rng& rng);

  const DetectionConfig& config() const { return cfg_; }
  ProtocolKind protocol() const { return protocol_; }

  // Adapter over patch tokens; |F| == N. Under the hico protocol an extra
  // head-level class token (1 x backbone_dim) is projected and appended to F,
  // giving |F| == N + 1 with a zero positional row.
  struct Memory {
    Var tokens;  // (N or N+1) x d, positions baked in (zero for the appended token)
    Mat pos;     // the sine encoding that was added, kept for inspection
  };
  Memory adapt(Graph& g, const TokenSequence& xb,
               const Mat* head_class_token = nullptr) const;

  DecoderEmbeddings decode_instances(Graph& g, const Memory& memory,
                                     AttentionRecord* last_cross_attention = nullptr) const;

  // 3-layer MLP -> sigmoid; boxes are (cx, cy, w, h) in [0,1].
  Var predict_boxes(Graph& g, Var embeddings, bool human) const;

  ConfidenceOutput predict_confidence(Graph& g, const DecoderEmbeddings& e) const;  // swig only
  Var predict_object_logits(Graph& g, Var object_embeddings) const;                 // hico only

 private:
  DetectionConfig cfg_;
  ProtocolKind protocol_;
  int backbone_dim_;

  LinearLayer input_proj_;  // backbone D -> d (the 1x1 conv)
  std::vector<TransformerBlock> adapter_;

  Parameter* query_embed_human_;   // decoder input content, one row per query
  Parameter* query_embed_object_;
  struct DecoderLayer {
    LayerNormLayer ln1, ln2, ln3;
    AttentionLayer self_attn;
    AttentionLayer cross_attn;
    MlpLayer mlp;
  };
  std::vector<DecoderLayer> decoder_;
  LayerNormLayer decoder_norm_;

  LinearLayer box_h_[3];
  LinearLayer box_o_[3];
  std::optional<LinearLayer> confidence_head_;
  std::optional<LinearLayer> object_class_head_;
  std::optional<LinearLayer> head_token_proj_;  // hico: head CLS' D -> d
};

}  // namespace slhoi
