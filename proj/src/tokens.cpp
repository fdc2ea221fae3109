#include "slhoi/tokens.hpp"

#include "slhoi/errors.hpp"

namespace slhoi {

const char* segment_name(Segment s) {
  switch (s) {
    case Segment::Class: return "class";
    case Segment::Register: return "register";
    case Segment::Query: return "query";
    case Segment::Patch: return "patch";
  }
  return "?";
}

bool TokenLayout::has(Segment kind) const {
  for (const auto& s : spans)
    if (s.kind == kind) return true;
  return false;
}

SegmentSpan TokenLayout::span(Segment kind) const {
  for (const auto& s : spans)
    if (s.kind == kind) return s;
  throw DataError(std::string("token sequence has no ") + segment_name(kind) + " segment");
}

void TokenLayout::validate(int token_rows) const {
  int cursor = 0;
  int class_count = 0, patch_count = 0;
  bool seen[4] = {false, false, false, false};
  for (const auto& s : spans) {
    if (s.begin != cursor)
      throw DataError("segment spans are not contiguous");
    if (s.end < s.begin)
      throw DataError("segment span has negative size");
    if (seen[static_cast<int>(s.kind)])
      throw DataError(std::string("duplicate segment: ") + segment_name(s.kind));
    seen[static_cast<int>(s.kind)] = true;
    if (s.kind == Segment::Class) {
      class_count = s.size();
      if (s.begin != 0)
        throw DataError("class token must be at position 0");
    }
    if (s.kind == Segment::Patch) patch_count = s.size();
    cursor = s.end;
  }
  if (cursor != token_rows)
    throw DataError("segment spans do not cover the token sequence");
  if (class_count != 1)
    throw DataError("sequence must contain exactly one class token");
  if (grid_rows * grid_cols != patch_count)
    throw DataError("patch grid " + std::to_string(grid_rows) + "x" +
                    std::to_string(grid_cols) + " does not match " +
                    std::to_string(patch_count) + " patch tokens");
}

Mat TokenSequence::segment_values(Segment kind) const {
  const SegmentSpan s = layout.span(kind);
  Mat out(s.size(), tokens.cols());
  for (int i = 0; i < s.size(); ++i)
    for (int j = 0; j < tokens.cols(); ++j) out(i, j) = tokens(s.begin + i, j);
  return out;
}

TokenLayout image_layout(int num_registers, int grid_rows, int grid_cols) {
  TokenLayout l;
  const int n = grid_rows * grid_cols;
  l.spans = {{Segment::Class, 0, 1},
             {Segment::Register, 1, 1 + num_registers},
             {Segment::Patch, 1 + num_registers, 1 + num_registers + n}};
  l.grid_rows = grid_rows;
  l.grid_cols = grid_cols;
  return l;
}

TokenLayout bootstrap_layout(int num_registers, int num_queries, int grid_rows, int grid_cols) {
  TokenLayout l;
  const int n = grid_rows * grid_cols;
  const int q0 = 1 + num_registers;
  l.spans = {{Segment::Class, 0, 1},
             {Segment::Register, 1, q0},
             {Segment::Query, q0, q0 + num_queries},
             {Segment::Patch, q0 + num_queries, q0 + num_queries + n}};
  l.grid_rows = grid_rows;
  l.grid_cols = grid_cols;
  return l;
}

}  // namespace slhoi
