#pragma once

#include <string>
#include <vector>

#include "slhoi/graph.hpp"
#include "slhoi/params.hpp"
#include "slhoi/rng.hpp"

namespace slhoi {

// Per-head attention weights captured during a forward pass; each entry is a
// (queries x keys) row-stochastic matrix.
struct AttentionRecord {
  std::vector<Mat> per_head;
  Mat head_mean() const;
};

struct LinearLayer {
  Parameter* w = nullptr;  // in x out
  Parameter* b = nullptr;  // 1 x out
};

struct LayerNormLayer {
  Parameter* gain = nullptr;  // 1 x dim
  Parameter* bias = nullptr;
};

struct AttentionLayer {
  LinearLayer q, k, v, o;
  int num_heads = 1;
};

struct MlpLayer {
  LinearLayer fc1, fc2;
  bool use_gelu = true;
};

// Pre-norm transformer block: x += attn(ln1(x)); x += mlp(ln2(x)).
struct TransformerBlock {
  LayerNormLayer ln1, ln2;
  AttentionLayer attn;
  MlpLayer mlp;
};

// Parameter registration helpers. `init` controls weight init; biases and LN
// offsets start at zero, LN gains at one.
LinearLayer make_linear(ParamStore& store, const std::string& name, int in, int out,
                        Rng& rng, double init_std = 0.02, bool frozen = false);
LayerNormLayer make_layer_norm(ParamStore& store, const std::string& name, int dim,
                               bool frozen = false);
AttentionLayer make_attention(ParamStore& store, const std::string& name, int dim,
                              int num_heads, Rng& rng, bool frozen = false);
MlpLayer make_mlp(ParamStore& store, const std::string& name, int dim, int hidden,
                  Rng& rng, bool use_gelu = true, bool frozen = false);
TransformerBlock make_block(ParamStore& store, const std::string& name, int dim,
                            int num_heads, int mlp_hidden, Rng& rng, bool frozen = false);

// Forward builders ---------------------------------------------------------
Var linear(Graph& g, Var x, const LinearLayer& l);
Var layer_norm(Graph& g, Var x, const LayerNormLayer& l, double eps = 1e-6);
Var mlp(Graph& g, Var x, const MlpLayer& l);

// Generic scaled dot-product attention. q_in / k_in may differ from v_in so
// callers can fold positional terms into queries and keys only. The additive
// mask (rows = queries of q_in, cols = keys) may contain -inf.
Var attention(Graph& g, Var q_in, Var k_in, Var v_in, const AttentionLayer& l,
              const Mat* additive_mask = nullptr, AttentionRecord* capture = nullptr);

Var self_attention(Graph& g, Var x, const AttentionLayer& l,
                   const Mat* additive_mask = nullptr, AttentionRecord* capture = nullptr);

Var transformer_block(Graph& g, Var x, const TransformerBlock& blk,
                      const Mat* additive_mask = nullptr,
                      AttentionRecord* capture = nullptr);

// 2-D sine positional encoding over a grid, DETR-style: dim/2 features per
// axis, row features first. dim must be divisible by 4.
Mat sine_position_encoding(int grid_rows, int grid_cols, int dim, double temperature = 10000.0);

}  // namespace slhoi
