#include "slhoi/transformer.hpp"

#include <cassert>
#include <cmath>

#include "slhoi/errors.hpp"

namespace slhoi {

Mat AttentionRecord::head_mean() const {
  assert(!per_head.empty());
  Mat out = per_head[0];
  for (std::size_t h = 1; h < per_head.size(); ++h)
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += per_head[h].data()[i];
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] /= static_cast<double>(per_head.size());
  return out;
}

LinearLayer make_linear(ParamStore& store, const std::string& name, int in, int out,
                        Rng& rng, double init_std, bool frozen) {
  LinearLayer l;
  l.w = &store.create(name + ".w", in, out, frozen);
  l.w->value = rng.normal_mat(in, out, init_std);
  l.b = &store.create(name + ".b", 1, out, frozen);
  return l;
}

LayerNormLayer make_layer_norm(ParamStore& store, const std::string& name, int dim,
                               bool frozen) {
  LayerNormLayer l;
  l.gain = &store.create(name + ".gain", 1, dim, frozen);
  l.gain->value.fill(1.0);
  l.bias = &store.create(name + ".bias", 1, dim, frozen);
  return l;
}

AttentionLayer make_attention(ParamStore& store, const std::string& name, int dim,
                              int num_heads, Rng& rng, bool frozen) {
  if (dim % num_heads != 0)
    throw ConfigError("attention dim " + std::to_string(dim) +
                      " not divisible by heads " + std::to_string(num_heads));
  // Xavier-scale init keeps attention logits O(1) so the softmax is
  // informative from the first step instead of starting uniform.
  const double s = std::sqrt(1.0 / dim);
  AttentionLayer l;
  l.q = make_linear(store, name + ".wq", dim, dim, rng, s, frozen);
  l.k = make_linear(store, name + ".wk", dim, dim, rng, s, frozen);
  l.v = make_linear(store, name + ".wv", dim, dim, rng, s, frozen);
  l.o = make_linear(store, name + ".wo", dim, dim, rng, s, frozen);
  l.num_heads = num_heads;
  return l;
}

MlpLayer make_mlp(ParamStore& store, const std::string& name, int dim, int hidden,
                  Rng& rng, bool use_gelu, bool frozen) {
  const double s = std::sqrt(2.0 / (dim + hidden));
  MlpLayer l;
  l.fc1 = make_linear(store, name + ".fc1", dim, hidden, rng, s, frozen);
  l.fc2 = make_linear(store, name + ".fc2", hidden, dim, rng, s, frozen);
  l.use_gelu = use_gelu;
  return l;
}

TransformerBlock make_block(ParamStore& store, const std::string& name, int dim,
                            int num_heads, int mlp_hidden, Rng& rng, bool frozen) {
  TransformerBlock b;
  b.ln1 = make_layer_norm(store, name + ".ln1", dim, frozen);
  b.ln2 = make_layer_norm(store, name + ".ln2", dim, frozen);
  b.attn = make_attention(store, name + ".attn", dim, num_heads, rng, frozen);
  b.mlp = make_mlp(store, name + ".mlp", dim, mlp_hidden, rng, true, frozen);
  return b;
}

Var linear(Graph& g, Var x, const LinearLayer& l) {
  return add_rowvec(matmul(std::move(x), g.param(*l.w)), g.param(*l.b));
}

Var layer_norm(Graph& g, Var x, const LayerNormLayer& l, double eps) {
  return layer_norm_rows(std::move(x), g.param(*l.gain), g.param(*l.bias), eps);
}

Var mlp(Graph& g, Var x, const MlpLayer& l) {
  Var h = linear(g, std::move(x), l.fc1);
  h = l.use_gelu ? gelu(std::move(h)) : relu(std::move(h));
  return linear(g, std::move(h), l.fc2);
}

Var attention(Graph& g, Var q_in, Var k_in, Var v_in, const AttentionLayer& l,
              const Mat* additive_mask, AttentionRecord* capture) {
  const int dim = l.q.w->value.cols();
  const int dh = dim / l.num_heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  Var q = linear(g, std::move(q_in), l.q);
  Var k = linear(g, std::move(k_in), l.k);
  Var v = linear(g, std::move(v_in), l.v);
  if (capture) capture->per_head.clear();
  std::vector<Var> head_outs;
  head_outs.reserve(l.num_heads);
  for (int h = 0; h < l.num_heads; ++h) {
    Var qh = slice_cols(q, h * dh, (h + 1) * dh);
    Var kh = slice_cols(k, h * dh, (h + 1) * dh);
    Var vh = slice_cols(v, h * dh, (h + 1) * dh);
    Var scores = scale(matmul(qh, transpose(kh)), inv_sqrt_dh);
    Var weights = additive_mask ? softmax_rows_masked(scores, *additive_mask)
                                : softmax_rows(scores);
    if (capture) capture->per_head.push_back(weights->value);
    head_outs.push_back(matmul(weights, vh));
  }
  Var merged = l.num_heads == 1 ? head_outs[0] : concat_cols(head_outs);
  return linear(g, std::move(merged), l.o);
}

Var self_attention(Graph& g, Var x, const AttentionLayer& l,
                   const Mat* additive_mask, AttentionRecord* capture) {
  return attention(g, x, x, x, l, additive_mask, capture);
}

Var transformer_block(Graph& g, Var x, const TransformerBlock& blk,
                      const Mat* additive_mask, AttentionRecord* capture) {
  Var h = layer_norm(g, x, blk.ln1);
  x = add(x, self_attention(g, std::move(h), blk.attn, additive_mask, capture));
  Var m = layer_norm(g, x, blk.ln2);
  return add(x, mlp(g, std::move(m), blk.mlp));
}

Mat sine_position_encoding(int grid_rows, int grid_cols, int dim, double temperature) {
  if (dim % 4 != 0)
    throw ConfigError("sine position encoding needs dim divisible by 4, got " +
                      std::to_string(dim));
  const int feats = dim / 2;        // per axis
  const int pairs = feats / 2;      // sin/cos pairs per axis
  Mat out(grid_rows * grid_cols, dim);
  const double two_pi = 2.0 * M_PI;
  for (int r = 0; r < grid_rows; ++r) {
    for (int c = 0; c < grid_cols; ++c) {
      const int idx = r * grid_cols + c;
      const double y = (r + 0.5) / grid_rows * two_pi;
      const double x = (c + 0.5) / grid_cols * two_pi;
      for (int i = 0; i < pairs; ++i) {
        const double div = std::pow(temperature, (2.0 * i) / feats);
        out(idx, 2 * i) = std::sin(y / div);
        out(idx, 2 * i + 1) = std::cos(y / div);
        out(idx, feats + 2 * i) = std::sin(x / div);
        out(idx, feats + 2 * i + 1) = std::cos(x / div);
      }
    }
  }
  return out;
}

}  // namespace slhoi
