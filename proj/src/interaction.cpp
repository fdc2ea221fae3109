#include "slhoi/interaction.hpp"

#include <cmath>

#include <string>

#include "slhoi/errors.hpp"

namespace slhoi {

InteractionVariant parse_variant(const std::string& name) {
  if (name == "full") return InteractionVariant::full;
  if (name == "masked_full") return InteractionVariant::masked_full;
  if (name == "bootstrap_only") return InteractionVariant::bootstrap_only;
  if (name == "late_fusion_head_only") return InteractionVariant::late_fusion_head_only;
  if (name == "late_fusion_multiscale") return InteractionVariant::late_fusion_multiscale;
  throw ConfigError("unknown interaction variant '" + name + "'");
}

const char* variant_name(InteractionVariant v) {
  switch (v) {
    case InteractionVariant::full: return "full";
    case InteractionVariant::masked_full: return "masked_full";
    case InteractionVariant::bootstrap_only: return "bootstrap_only";
    case InteractionVariant::late_fusion_head_only: return "late_fusion_head_only";
    case InteractionVariant::late_fusion_multiscale: return "late_fusion_multiscale";
  }
  return "?";
}

void InteractionConfig::validate() const {
  if (D <= 0) throw ConfigError("interaction width D must be positive");
  if (num_heads <= 0 || D % num_heads != 0) {
    throw ConfigError("interaction width " + std::to_string(D) +
                      " not divisible by num_heads " + std::to_string(num_heads));
  }
  const bool lf = variant == InteractionVariant::late_fusion_head_only ||
                  variant == InteractionVariant::late_fusion_multiscale;
  if (!lf && refine_layers < 1 && variant != InteractionVariant::bootstrap_only) {
    throw ConfigError("refine_layers must be >= 1 for the full variants");
  }
  if (lf && late_fusion_layers < 1) {
    throw ConfigError("late_fusion_layers must be >= 1");
  }
}

InteractionModule::InteractionModule(ParamStore& store, const InteractionConfig& cfg,
                                     int det_dim, int backbone_dim, Rng& rng)
    : cfg_(cfg), det_dim_(det_dim), backbone_dim_(backbone_dim) {
  cfg_.validate();
  const int D = cfg_.D;

  // Cross-space projections use scale-preserving 1/sqrt(fan_in) init so the
  // frozen head sees queries at the same scale as its image tokens.
  query_proj_ = make_linear(store, "inter.query_proj", det_dim, D, rng,
                            1.0 / std::sqrt(static_cast<double>(det_dim)));
  for (int i = 0; i < cfg_.refine_layers; ++i) {
    const std::string base = "inter.refine" + std::to_string(i);
    RefineLayer layer;
    layer.ln1 = make_layer_norm(store, base + ".ln1", D);
    layer.ln2 = make_layer_norm(store, base + ".ln2", D);
    layer.cross_attn = make_attention(store, base + ".cross_attn", D, cfg_.num_heads, rng);
    layer.mlp = make_mlp(store, base + ".mlp", D, 4 * D, rng);
    refine_.push_back(layer);
  }
  text_proj_ = make_linear(store, "inter.text_proj", D, 2 * D, rng);
  log_scale_ = &store.create("inter.log_scale", 1, 1, false);
  log_scale_->value(0, 0) = 2.6592;

  if (is_late_fusion()) {
    LateFusion lf;
    const double head_std = 1.0 / std::sqrt(static_cast<double>(D));
    lf.query_proj = make_linear(store, "inter.lf.query_proj", D, det_dim, rng, head_std);
    lf.head_proj = make_linear(store, "inter.lf.head_proj", D, det_dim, rng, head_std);
    if (cfg_.variant == InteractionVariant::late_fusion_multiscale) {
      lf.backbone_proj = make_linear(store, "inter.lf.backbone_proj", backbone_dim, det_dim,
                                     rng, 1.0 / std::sqrt(static_cast<double>(backbone_dim)));
    }
    const int heads = det_dim % cfg_.num_heads == 0 ? cfg_.num_heads : 1;
    for (int i = 0; i < cfg_.late_fusion_layers; ++i) {
      const std::string base = "inter.lf.layer" + std::to_string(i);
      LateFusion::Layer layer;
      layer.ln1 = make_layer_norm(store, base + ".ln1", det_dim);
      layer.ln2 = make_layer_norm(store, base + ".ln2", det_dim);
      layer.ln3 = make_layer_norm(store, base + ".ln3", det_dim);
      layer.self_attn = make_attention(store, base + ".self_attn", det_dim, heads, rng);
      layer.cross_attn = make_attention(store, base + ".cross_attn", det_dim, heads, rng);
      layer.mlp = make_mlp(store, base + ".mlp", det_dim, 4 * det_dim, rng);
      lf.layers.push_back(layer);
    }
    lf.norm = make_layer_norm(store, "inter.lf.norm", det_dim);
    lf.text_proj = make_linear(store, "inter.lf.text_proj", det_dim, 2 * D, rng);
    late_fusion_ = lf;
  }
}

MaskMode InteractionModule::mask_mode() const {
  return cfg_.variant == InteractionVariant::masked_full ? MaskMode::block_query_to_image
                                                         : MaskMode::none;
}

Var InteractionModule::form_queries(Graph& g, const DecoderEmbeddings& e) const {
  Var pair_mean = scale(add(e.human, e.object), 0.5);
  return linear(g, pair_mean, query_proj_);
}

Var InteractionModule::refine(Graph& g, Var bootstrapped, Var kv,
                              AttentionRecord* capture) const {
  if (cfg_.variant != InteractionVariant::full &&
      cfg_.variant != InteractionVariant::masked_full) {
    throw ConfigError("refine() is only defined for the full/masked_full variants, not " +
                      std::string(variant_name(cfg_.variant)));
  }
  Var x = std::move(bootstrapped);
  for (std::size_t i = 0; i < refine_.size(); ++i) {
    const RefineLayer& layer = refine_[i];
    AttentionRecord* cap = (capture != nullptr && i + 1 == refine_.size()) ? capture : nullptr;
    x = add(x, attention(g, layer_norm(g, x, layer.ln1), kv, kv, layer.cross_attn, nullptr, cap));
    x = add(x, mlp(g, layer_norm(g, x, layer.ln2), layer.mlp));
  }
  return x;
}

Var InteractionModule::late_fusion_embeddings(Graph& g, Var raw_queries,
                                              const TokenSequence& head_out,
                                              const TokenSequence* backbone_tokens) const {
  if (!late_fusion_) {
    throw ConfigError("late_fusion_embeddings() requires a late-fusion variant, not " +
                      std::string(variant_name(cfg_.variant)));
  }
  const LateFusion& lf = *late_fusion_;

  // Key/value memory: query-free head outputs (class + patches; registers are
  // dropped downstream), multiscale adds the backbone patch tokens.
  Mat head_cls = head_out.segment_values(Segment::Class);
  Mat head_patches = head_out.segment_values(Segment::Patch);
  std::vector<Var> sources;
  sources.push_back(linear(g, g.input(head_cls), lf.head_proj));
  sources.push_back(linear(g, g.input(head_patches), lf.head_proj));
  if (cfg_.variant == InteractionVariant::late_fusion_multiscale) {
    if (backbone_tokens == nullptr) {
      throw DataError("late_fusion_multiscale requires backbone patch tokens");
    }
    Mat bb_patches = backbone_tokens->segment_values(Segment::Patch);
    sources.push_back(linear(g, g.input(bb_patches), lf.backbone_proj));
  } else if (backbone_tokens != nullptr) {
    throw DataError("backbone tokens are only consumed by late_fusion_multiscale");
  }
  Var memory = sources.size() == 1 ? sources[0] : concat_rows(sources);

  Var x = linear(g, std::move(raw_queries), lf.query_proj);
  for (const LateFusion::Layer& layer : lf.layers) {
    x = add(x, self_attention(g, layer_norm(g, x, layer.ln1), layer.self_attn));
    x = add(x, attention(g, layer_norm(g, x, layer.ln2), memory, memory, layer.cross_attn));
    x = add(x, mlp(g, layer_norm(g, x, layer.ln3), layer.mlp));
  }
  return layer_norm(g, x, lf.norm);
}

Var InteractionModule::project_to_text(Graph& g, Var embeddings) const {
  const LinearLayer& proj = is_late_fusion() ? late_fusion_->text_proj : text_proj_;
  if (embeddings->value.cols() != proj.w->value.rows()) {
    throw DataError("text projection expected width " + std::to_string(proj.w->value.rows()) +
                    ", got " + std::to_string(embeddings->value.cols()));
  }
  return linear(g, std::move(embeddings), proj);
}

ClassifyOutput InteractionModule::classify(Graph& g, Var text_space_embeddings,
                                           const Mat& bank_embeddings,
                                           const std::vector<int>& category_rows) const {
  if (category_rows.empty()) {
    throw DataError("classify() called with an empty category set");
  }
  if (bank_embeddings.cols() != text_dim()) {
    throw DataError("text bank width " + std::to_string(bank_embeddings.cols()) +
                    " does not match configured 2D = " + std::to_string(text_dim()));
  }
  if (text_space_embeddings->value.cols() != text_dim()) {
    throw DataError("classify() expects text-space embeddings of width " +
                    std::to_string(text_dim()));
  }
  Mat selected(static_cast<int>(category_rows.size()), bank_embeddings.cols());
  for (std::size_t i = 0; i < category_rows.size(); ++i) {
    const int r = category_rows[i];
    if (r < 0 || r >= bank_embeddings.rows()) {
      throw DataError("category row " + std::to_string(r) + " outside text bank of size " +
                      std::to_string(bank_embeddings.rows()));
    }
    for (int c = 0; c < bank_embeddings.cols(); ++c)
      selected(static_cast<int>(i), c) = bank_embeddings(r, c);
  }

  Var e = l2_normalize_rows(std::move(text_space_embeddings));
  Var t = l2_normalize_rows(g.input(selected));
  Var logits = mul_scalar_var(matmul(std::move(e), transpose(std::move(t))), temperature(g));
  return ClassifyOutput{logits, softmax_rows(logits)};
}

Var InteractionModule::temperature(Graph& g) const {
  return clamp_max(exp_v(g.param(*log_scale_)), 100.0);
}

}  // namespace slhoi
