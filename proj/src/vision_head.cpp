#include "slhoi/vision_head.hpp"

#include <limits>
#include <string>

#include "slhoi/errors.hpp"

namespace slhoi {

void HeadConfig::validate() const {
  if (num_blocks <= 0) throw ConfigError("head num_blocks must be positive");
  if (dim <= 0 || num_heads <= 0 || dim % num_heads != 0)
    throw ConfigError("head dim must be positive and divisible by num_heads");
}

VisionHead::VisionHead(ParamStore& store, const HeadConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  for (int i = 0; i < cfg.num_blocks; ++i)
    blocks_.push_back(make_block(store, "head.block" + std::to_string(i), cfg.dim,
                                 cfg.num_heads, 4 * cfg.dim, rng, true));
  if (cfg.final_projection)
    out_proj_ = make_linear(store, "head.out_proj", cfg.dim, cfg.dim, rng, 0.02, true);
}

Mat VisionHead::attention_mask(const TokenLayout& layout, MaskMode mode) {
  const int t = layout.total();
  Mat mask(t, t, 0.0);
  if (mode == MaskMode::none || !layout.has(Segment::Query)) return mask;
  const SegmentSpan q = layout.span(Segment::Query);
  const double minus_inf = -std::numeric_limits<double>::infinity();
  for (const auto& span : layout.spans) {
    if (span.kind == Segment::Query) continue;  // query rows stay unrestricted
    for (int i = span.begin; i < span.end; ++i)
      for (int j = q.begin; j < q.end; ++j) mask(i, j) = minus_inf;
  }
  return mask;
}

Var VisionHead::run_blocks(Graph& g, Var tokens, const TokenLayout& layout, MaskMode mask,
                           std::vector<AttentionRecord>* capture) const {
  Mat mask_mat;
  const bool masked = mask == MaskMode::block_query_to_image && layout.has(Segment::Query) &&
                      layout.count(Segment::Query) > 0;
  if (masked) mask_mat = attention_mask(layout, mask);
  if (capture) capture->assign(blocks_.size(), AttentionRecord{});
  Var x = std::move(tokens);
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    x = transformer_block(g, x, blocks_[i], masked ? &mask_mat : nullptr,
                          capture ? &(*capture)[i] : nullptr);
  if (out_proj_) x = linear(g, std::move(x), *out_proj_);
  return x;
}

TokenSequence VisionHead::forward_plain(const TokenSequence& xb,
                                        std::vector<AttentionRecord>* capture) const {
  if (xb.layout.has(Segment::Query) && xb.layout.count(Segment::Query) > 0)
    throw DataError("forward_plain rejects sequences with query tokens; use forward_bootstrapped");
  if (xb.dim() != cfg_.dim)
    throw DataError("head expects token width " + std::to_string(cfg_.dim) + ", got " +
                    std::to_string(xb.dim()));
  Graph g;
  Var out = run_blocks(g, g.input(xb.tokens), xb.layout, MaskMode::none, capture);
  TokenSequence res;
  res.tokens = out->value;
  res.layout = xb.layout;
  return res;
}

BootstrapOutput VisionHead::forward_bootstrapped(Graph& g, Var queries,
                                                 const TokenSequence& xb, MaskMode mask,
                                                 bool capture_attention) const {
  if (queries->value.cols() != cfg_.dim)
    throw DataError("query width " + std::to_string(queries->value.cols()) +
                    " does not match head dim " + std::to_string(cfg_.dim));
  const int num_queries = queries->value.rows();
  const SegmentSpan reg = xb.layout.span(Segment::Register);
  const SegmentSpan patch = xb.layout.span(Segment::Patch);

  // Appendix-style ordering: [CLS, Reg_1..Reg_k, Q_1..Q_Nq, P_1..P_N].
  Var base = g.input(xb.tokens);
  Var cls = slice_rows(base, 0, 1);
  Var regs = slice_rows(base, reg.begin, reg.end);
  Var patches = slice_rows(base, patch.begin, patch.end);
  Var assembled = concat_rows({cls, regs, queries, patches});

  BootstrapOutput out;
  out.layout = bootstrap_layout(reg.size(), num_queries, xb.layout.grid_rows,
                                xb.layout.grid_cols);
  Var y = run_blocks(g, assembled, out.layout, mask,
                     capture_attention ? &out.block_attention : nullptr);
  const SegmentSpan oq = out.layout.span(Segment::Query);
  const SegmentSpan op = out.layout.span(Segment::Patch);
  out.class_out = slice_rows(y, 0, 1);
  out.registers_out = slice_rows(y, 1, 1 + reg.size());
  out.queries_out = slice_rows(y, oq.begin, oq.end);
  out.patches_out = slice_rows(y, op.begin, op.end);
  return out;
}

Var VisionHead::build_kv(const BootstrapOutput& b) {
  if (b.patches_out->value.rows() == 0)
    throw DataError("build_kv requires a non-empty patch segment");
  Var mean_patch = col_mean(b.patches_out);  // 1 x D
  return concat_rows({b.class_out, mean_patch, b.patches_out});
}

std::vector<Mat> VisionHead::attention_maps(const TokenSequence& seq, int block_index,
                                            int query_position) const {
  if (block_index < 0 || block_index >= static_cast<int>(blocks_.size()))
    throw DataError("attention block index " + std::to_string(block_index) +
                    " out of range (head has " + std::to_string(blocks_.size()) + " blocks)");
  if (query_position < 0 || query_position >= seq.tokens.rows())
    throw DataError("attention query position " + std::to_string(query_position) +
                    " out of range");
  std::vector<AttentionRecord> records;
  forward_plain(seq, &records);
  const AttentionRecord& rec = records[block_index];
  std::vector<Mat> rows;
  for (const Mat& head : rec.per_head) {
    Mat row(1, head.cols());
    for (int j = 0; j < head.cols(); ++j) row(0, j) = head(query_position, j);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace slhoi
