#include "slhoi/detector.hpp"

#include <cassert>
#include <cmath>
#include <string>

#include "slhoi/errors.hpp"

namespace slhoi {

void DetectionConfig::validate() const {
  if (d <= 0 || d % 4 != 0) {
    throw ConfigError("detection width must be positive and divisible by 4, got " +
                      std::to_string(d));
  }
  if (num_heads <= 0 || d % num_heads != 0) {
    throw ConfigError("detection width " + std::to_string(d) +
                      " not divisible by num_heads " + std::to_string(num_heads));
  }
  if (adapter_layers < 0) throw ConfigError("adapter_layers must be >= 0");
  if (decoder_layers <= 0) throw ConfigError("decoder_layers must be >= 1");
  if (num_queries <= 0) throw ConfigError("num_queries must be >= 1");
  if (num_object_classes <= 0) throw ConfigError("num_object_classes must be >= 1");
}

Detector::Detector(ParamStore& store, const DetectionConfig& cfg, int backbone_dim,
                   ProtocolKind protocol, Rng& rng)
    : cfg_(cfg), protocol_(protocol), backbone_dim_(backbone_dim) {
  cfg_.validate();
  const int d = cfg_.d;

  // Scale-preserving init (1/sqrt(fan_in)) keeps the projected content
  // comparable to the O(1) sine positions it is summed with.
  input_proj_ = make_linear(store, "det.input_proj", backbone_dim, d, rng,
                            1.0 / std::sqrt(static_cast<double>(backbone_dim)));
  for (int i = 0; i < cfg_.adapter_layers; ++i) {
    adapter_.push_back(make_block(store, "det.adapter.block" + std::to_string(i), d,
                                  cfg_.num_heads, 4 * d, rng));
  }

  // The two learnable query sets are the decoder's input embeddings.
  query_embed_human_ = &store.create("det.query_embed.human", cfg_.num_queries, d, false);
  query_embed_human_->value = rng.normal_mat(cfg_.num_queries, d, 1.0);
  query_embed_object_ = &store.create("det.query_embed.object", cfg_.num_queries, d, false);
  query_embed_object_->value = rng.normal_mat(cfg_.num_queries, d, 1.0);

  for (int i = 0; i < cfg_.decoder_layers; ++i) {
    const std::string base = "det.decoder.layer" + std::to_string(i);
    DecoderLayer layer;
    layer.ln1 = make_layer_norm(store, base + ".ln1", d);
    layer.ln2 = make_layer_norm(store, base + ".ln2", d);
    layer.ln3 = make_layer_norm(store, base + ".ln3", d);
    layer.self_attn = make_attention(store, base + ".self_attn", d, cfg_.num_heads, rng);
    layer.cross_attn = make_attention(store, base + ".cross_attn", d, cfg_.num_heads, rng);
    layer.mlp = make_mlp(store, base + ".mlp", d, 4 * d, rng);
    decoder_.push_back(layer);
  }
  decoder_norm_ = make_layer_norm(store, "det.decoder.norm", d);

  for (int i = 0; i < 3; ++i) {
    const int out = (i == 2) ? 4 : d;
    const double s = std::sqrt(2.0 / (d + out));
    box_h_[i] = make_linear(store, "det.box_h." + std::to_string(i), d, out, rng, s);
    box_o_[i] = make_linear(store, "det.box_o." + std::to_string(i), d, out, rng, s);
  }

  if (protocol_ == ProtocolKind::swig) {
    confidence_head_ = make_linear(store, "det.confidence", d, 1, rng,
                                   std::sqrt(2.0 / (d + 1)));
  } else {
    object_class_head_ =
        make_linear(store, "det.object_class", d, cfg_.num_object_classes + 1, rng,
                    std::sqrt(2.0 / (d + cfg_.num_object_classes + 1)));
    head_token_proj_ = make_linear(store, "det.head_token_proj", backbone_dim, d, rng,
                                   1.0 / std::sqrt(static_cast<double>(backbone_dim)));
  }
}

Detector::Memory Detector::adapt(Graph& g, const TokenSequence& xb,
                                 const Mat* head_class_token) const {
  xb.validate();
  if (xb.layout.count(Segment::Patch) == 0) {
    throw DataError("adapter requires at least one patch token");
  }
  if (xb.dim() != backbone_dim_) {
    throw DataError("adapter expected token dim " + std::to_string(backbone_dim_) +
                    ", got " + std::to_string(xb.dim()));
  }
  const SegmentSpan patches = xb.layout.span(Segment::Patch);
  const int n = patches.size();
  if (xb.layout.grid_rows * xb.layout.grid_cols != n) {
    throw DataError("patch count does not match token grid");
  }

  Mat patch_values(n, xb.dim());
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < xb.dim(); ++c) patch_values(i, c) = xb.tokens(patches.begin + i, c);
  }

  Mat pos = sine_position_encoding(xb.layout.grid_rows, xb.layout.grid_cols, cfg_.d);
  // Projected tokens plus positions form the adapter input, so position is
  // part of the memory content the decoder reads out.
  Var f = add(linear(g, g.input(patch_values), input_proj_), g.input(pos));

  if (head_class_token != nullptr) {
    if (protocol_ != ProtocolKind::hico) {
      throw DataError("head class token is only consumed under the hico protocol");
    }
    if (head_class_token->rows() != 1 || head_class_token->cols() != backbone_dim_) {
      throw DataError("head class token must be 1 x backbone dim");
    }
    Var extra = linear(g, g.input(*head_class_token), *head_token_proj_);
    f = concat_rows({f, extra});  // the appended token carries no position
    Mat padded(n + 1, cfg_.d);
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < cfg_.d; ++c) padded(i, c) = pos(i, c);
    }
    pos = padded;
  } else if (protocol_ == ProtocolKind::hico) {
    throw DataError("hico protocol requires the head class token in adapt()");
  }

  for (const TransformerBlock& blk : adapter_) {
    f = transformer_block(g, f, blk);
  }
  return Memory{f, pos};
}

DecoderEmbeddings Detector::decode_instances(Graph& g, const Memory& memory,
                                             AttentionRecord* last_cross_attention) const {
  const int nq = cfg_.num_queries;
  Var x = concat_rows({g.param(*query_embed_human_), g.param(*query_embed_object_)});

  for (size_t i = 0; i < decoder_.size(); ++i) {
    const DecoderLayer& layer = decoder_[i];
    AttentionRecord* capture =
        (last_cross_attention != nullptr && i + 1 == decoder_.size()) ? last_cross_attention
                                                                      : nullptr;
    // Both query sets share one self-attention stream so humans and objects
    // can coordinate before attending to the image memory.
    Var t = layer_norm(g, x, layer.ln1);
    x = add(x, attention(g, t, t, t, layer.self_attn));

    t = layer_norm(g, x, layer.ln2);
    x = add(x, attention(g, t, memory.tokens, memory.tokens, layer.cross_attn, nullptr,
                         capture));

    x = add(x, mlp(g, layer_norm(g, x, layer.ln3), layer.mlp));
  }

  Var y = layer_norm(g, x, decoder_norm_);
  return DecoderEmbeddings{slice_rows(y, 0, nq), slice_rows(y, nq, 2 * nq)};
}

Var Detector::predict_boxes(Graph& g, Var embeddings, bool human) const {
  const LinearLayer* head = human ? box_h_ : box_o_;
  Var h = relu(linear(g, embeddings, head[0]));
  h = relu(linear(g, h, head[1]));
  return sigmoid(linear(g, h, head[2]));
}

ConfidenceOutput Detector::predict_confidence(Graph& g, const DecoderEmbeddings& e) const {
  if (!confidence_head_) {
    throw DataError("confidence head is only available under the swig protocol");
  }
  Var pair_mean = scale(add(e.human, e.object), 0.5);
  Var logits = linear(g, pair_mean, *confidence_head_);
  return ConfidenceOutput{logits, sigmoid(logits)};
}

Var Detector::predict_object_logits(Graph& g, Var object_embeddings) const {
  if (!object_class_head_) {
    throw DataError("object class head is only available under the hico protocol");
  }
  return linear(g, object_embeddings, *object_class_head_);
}

}  // namespace slhoi
