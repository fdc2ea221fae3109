#pragma once

#include <string>
#include <vector>

#include "slhoi/mat.hpp"

namespace slhoi {

enum class Segment { Class, Register, Query, Patch };

const char* segment_name(Segment s);

struct SegmentSpan {
  Segment kind;
  int begin = 0;  // inclusive
  int end = 0;    // exclusive
  int size() const { return end - begin; }
};

// Layout metadata shared by value- and tape-level token sequences. Spans are
// contiguous, disjoint, and cover [0, total).
struct TokenLayout {
  std::vector<SegmentSpan> spans;
  int grid_rows = 0;
  int grid_cols = 0;

  int total() const { return spans.empty() ? 0 : spans.back().end; }
  bool has(Segment kind) const;
  SegmentSpan span(Segment kind) const;  // throws if absent
  int count(Segment kind) const { return has(kind) ? span(kind).size() : 0; }
  void validate(int token_rows) const;   // throws DataError on violation
};

// Ordered embeddings with segment bookkeeping: the carrier between backbone,
// head, and decoders.
struct TokenSequence {
  Mat tokens;  // total x dim
  TokenLayout layout;

  int dim() const { return tokens.cols(); }
  Mat segment_values(Segment kind) const;
  void validate() const { layout.validate(tokens.rows()); }
};

// Standard layouts.
TokenLayout image_layout(int num_registers, int grid_rows, int grid_cols);
// Bootstrapping order: [CLS, Reg.., Q.., P..].
TokenLayout bootstrap_layout(int num_registers, int num_queries, int grid_rows, int grid_cols);

}  // namespace slhoi
