#include "slhoi/backbone.hpp"

#include <cmath>
#include <string>

#include "slhoi/errors.hpp"
#include "slhoi/graph.hpp"

namespace slhoi {

void BackboneConfig::validate() const {
  if (patch_size < 1) throw ConfigError("backbone patch_size must be >= 1");
  if (dim <= 0 || depth <= 0 || num_heads <= 0)
    throw ConfigError("backbone dim/depth/heads must be positive");
  if (dim % num_heads != 0)
    throw ConfigError("backbone dim " + std::to_string(dim) +
                      " not divisible by num_heads " + std::to_string(num_heads));
  if (num_registers < 0) throw ConfigError("backbone num_registers must be >= 0");
  if (pos_rows < 1 || pos_cols < 1)
    throw ConfigError("backbone positional table must be at least 1x1");
}

Backbone::Backbone(ParamStore& store, const BackboneConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  const int in = cfg.patch_size * cfg.patch_size * 3;
  patch_embed_ = make_linear(store, "backbone.patch_embed", in, cfg.dim, rng, 0.02, true);
  cls_token_ = &store.create("backbone.cls_token", 1, cfg.dim, true);
  cls_token_->value = rng.normal_mat(1, cfg.dim, 0.02);
  register_tokens_ = &store.create("backbone.register_tokens",
                                   std::max(cfg.num_registers, 1), cfg.dim, true);
  register_tokens_->value = rng.normal_mat(std::max(cfg.num_registers, 1), cfg.dim, 0.02);
  pos_table_ = &store.create("backbone.pos_table", cfg.pos_rows * cfg.pos_cols, cfg.dim, true);
  // Content-scale positional code: a trained ViT's patch outputs are strongly
  // position-dependent, and the detection stages rely on reading position out
  // of the frozen features.
  pos_table_->value = rng.normal_mat(cfg.pos_rows * cfg.pos_cols, cfg.dim, 0.2);
  for (int i = 0; i < cfg.depth; ++i)
    blocks_.push_back(make_block(store, "backbone.block" + std::to_string(i), cfg.dim,
                                 cfg.num_heads, 4 * cfg.dim, rng, true));
  final_norm_ = make_layer_norm(store, "backbone.final_norm", cfg.dim, true);
}

Mat Backbone::interpolated_positions(int grid_rows, int grid_cols) const {
  const int R0 = cfg_.pos_rows, C0 = cfg_.pos_cols, D = cfg_.dim;
  const Mat& table = pos_table_->value;
  Mat out(grid_rows * grid_cols, D);
  auto src_coord = [](int i, int n, int n0) {
    if (n == 1) return 0.5 * (n0 - 1);
    return static_cast<double>(i) * (n0 - 1) / (n - 1);
  };
  for (int r = 0; r < grid_rows; ++r) {
    const double fy = src_coord(r, grid_rows, R0);
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, R0 - 1);
    const double wy = fy - y0;
    for (int c = 0; c < grid_cols; ++c) {
      const double fx = src_coord(c, grid_cols, C0);
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, C0 - 1);
      const double wx = fx - x0;
      const int idx = r * grid_cols + c;
      for (int d = 0; d < D; ++d) {
        const double top = (1.0 - wx) * table(y0 * C0 + x0, d) + wx * table(y0 * C0 + x1, d);
        const double bot = (1.0 - wx) * table(y1 * C0 + x0, d) + wx * table(y1 * C0 + x1, d);
        out(idx, d) = (1.0 - wy) * top + wy * bot;
      }
    }
  }
  return out;
}

TokenSequence Backbone::patchify(const Image& img) const {
  const int p = cfg_.patch_size;
  if (img.height % p != 0)
    throw DataError("image height " + std::to_string(img.height) +
                    " not divisible by patch size " + std::to_string(p));
  if (img.width % p != 0)
    throw DataError("image width " + std::to_string(img.width) +
                    " not divisible by patch size " + std::to_string(p));
  const int gr = img.height / p, gc = img.width / p;
  const int n = gr * gc;
  const int in = p * p * 3;

  // Flatten each patch row-major, channels innermost, then project.
  Mat patches(n, in);
  for (int r = 0; r < gr; ++r)
    for (int c = 0; c < gc; ++c) {
      double* row = patches.row(r * gc + c);
      int k = 0;
      for (int y = 0; y < p; ++y)
        for (int x = 0; x < p; ++x)
          for (int ch = 0; ch < 3; ++ch) row[k++] = img.at(r * p + y, c * p + x, ch);
    }
  Mat projected = matmul(patches, patch_embed_.w->value);
  const Mat pos = interpolated_positions(gr, gc);
  for (int i = 0; i < n; ++i)
    for (int d = 0; d < cfg_.dim; ++d)
      projected(i, d) += patch_embed_.b->value(0, d) + pos(i, d);

  TokenSequence seq;
  seq.layout = image_layout(cfg_.num_registers, gr, gc);
  seq.tokens = Mat(seq.layout.total(), cfg_.dim);
  for (int d = 0; d < cfg_.dim; ++d) seq.tokens(0, d) = cls_token_->value(0, d);
  for (int i = 0; i < cfg_.num_registers; ++i)
    for (int d = 0; d < cfg_.dim; ++d) seq.tokens(1 + i, d) = register_tokens_->value(i, d);
  const int p0 = 1 + cfg_.num_registers;
  for (int i = 0; i < n; ++i)
    for (int d = 0; d < cfg_.dim; ++d) seq.tokens(p0 + i, d) = projected(i, d);
  seq.validate();
  return seq;
}

TokenSequence Backbone::encode_tokens(const TokenSequence& in,
                                      AttentionRecord* last_block_attention) const {
  Graph g;  // frozen params become constants; this is plain evaluation
  Var x = g.input(in.tokens);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    AttentionRecord* cap =
        (last_block_attention && i + 1 == blocks_.size()) ? last_block_attention : nullptr;
    x = transformer_block(g, x, blocks_[i], nullptr, cap);
  }
  x = layer_norm(g, x, final_norm_);
  TokenSequence out;
  out.tokens = x->value;
  out.layout = in.layout;
  return out;
}

TokenSequence Backbone::encode(const Image& img, AttentionRecord* last_block_attention) const {
  return encode_tokens(patchify(img), last_block_attention);
}

}  // namespace slhoi
