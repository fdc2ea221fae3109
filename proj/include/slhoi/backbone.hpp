#pragma once

#include <array>
#include <optional>
#include <vector>

#include "slhoi/image_io.hpp"
#include "slhoi/params.hpp"
#include "slhoi/rng.hpp"
#include "slhoi/tokens.hpp"
#include "slhoi/transformer.hpp"

namespace slhoi {

struct BackboneConfig {
  int patch_size = 16;
  int depth = 2;          // L, reference 24 for ViT-L
  int dim = 64;           // D, reference 1024
  int num_heads = 4;
  int num_registers = 4;
  int pos_rows = 14;      // learned positional table resolution
  int pos_cols = 14;
  std::array<double, 3> norm_mean = {0.485, 0.456, 0.406};  // ImageNet
  std::array<double, 3> norm_std = {0.229, 0.224, 0.225};

  void validate() const;  // throws ConfigError
};

// Frozen ViT encoder: patchify + L pre-norm self-attention blocks + final
// norm. All parameters live under "backbone." and are registered frozen; the
// forward pass is plain-valued (no gradients ever reach it).
class Backbone {
 public:
  Backbone(ParamStore& store, const BackboneConfig& cfg, Rng& rng);

  const BackboneConfig& config() const { return cfg_; }

  // Class token + registers + patch embeddings with interpolated positional
  // terms. Expects a normalized image; throws DataError naming the offending
  // axis when a side is not divisible by the patch size.
  TokenSequence patchify(const Image& img) const;

  // Full frozen forward. Deterministic; optionally captures the last block's
  // attention maps.
  TokenSequence encode(const Image& img, AttentionRecord* last_block_attention = nullptr) const;
  TokenSequence encode_tokens(const TokenSequence& in,
                              AttentionRecord* last_block_attention = nullptr) const;

  // Positional table resampled to an arbitrary grid (bilinear).
  Mat interpolated_positions(int grid_rows, int grid_cols) const;

 private:
  BackboneConfig cfg_;
  LinearLayer patch_embed_;
  Parameter* cls_token_;
  Parameter* register_tokens_;
  Parameter* pos_table_;  // (pos_rows*pos_cols) x dim
  std::vector<TransformerBlock> blocks_;
  LayerNormLayer final_norm_;
};

}  // namespace slhoi
