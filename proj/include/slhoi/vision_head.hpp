#pragma once

#include <optional>
#include <vector>

#include "slhoi/graph.hpp"
#include "slhoi/tokens.hpp"
#include "slhoi/transformer.hpp"

namespace slhoi {

struct HeadConfig {
  int num_blocks = 2;  // reference head has two self-attention blocks
  int dim = 64;        // must equal backbone dim
  int num_heads = 4;
  bool final_projection = false;  // optional terminal linear, identity when off

  void validate() const;
};

enum class MaskMode { none, block_query_to_image };

// Tape-level outputs of a bootstrapped head pass, split back by segment.
struct BootstrapOutput {
  Var class_out;      // 1 x D
  Var registers_out;  // auxiliary only; excluded from every downstream head
  Var queries_out;    // N_q x D
  Var patches_out;    // N x D
  TokenLayout layout; // of the assembled sequence
  std::vector<AttentionRecord> block_attention;  // filled when capture enabled
};

// Frozen two-block self-attention head projecting tokens into the text-aligned
// space. Runs on the tape so gradients flow through it into the interaction
// queries while its own parameters stay constant.
class VisionHead {
 public:
  VisionHead(ParamStore& store, const HeadConfig& cfg, Rng& rng);

  const HeadConfig& config() const { return cfg_; }

  // Query-free path. Rejects sequences that carry a query segment.
  TokenSequence forward_plain(const TokenSequence& xb,
                              std::vector<AttentionRecord>* capture = nullptr) const;

  // Semantic bootstrapping: assembles [CLS, Reg.., Q.., P..], applies both
  // blocks, splits the result. With MaskMode::block_query_to_image the
  // class/register/patch rows never read query columns.
  BootstrapOutput forward_bootstrapped(Graph& g, Var queries, const TokenSequence& xb,
                                       MaskMode mask = MaskMode::none,
                                       bool capture_attention = false) const;

  // KV sequence for hierarchical refinement: [CLS', mean(P'), P'_1..P'_N].
  static Var build_kv(const BootstrapOutput& b);

  // Row-stochastic per-head attention weights for one position of a
  // query-free pass.
  std::vector<Mat> attention_maps(const TokenSequence& seq, int block_index,
                                  int query_position) const;

  // Additive mask for an assembled layout under the given mode.
  static Mat attention_mask(const TokenLayout& layout, MaskMode mode);

 private:
  Var run_blocks(Graph& g, Var tokens, const TokenLayout& layout, MaskMode mask,
                 std::vector<AttentionRecord>* capture) const;

  HeadConfig cfg_;
  std::vector<TransformerBlock> blocks_;
  std::optional<LinearLayer> out_proj_;
};

}  // namespace slhoi
