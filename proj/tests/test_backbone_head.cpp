#include <doctest.h>

#include <cmath>
#include <vector>

#include "slhoi/backbone.hpp"
#include "slhoi/errors.hpp"
#include "slhoi/graph.hpp"
#include "slhoi/image_io.hpp"
#include "slhoi/params.hpp"
#include "slhoi/rng.hpp"
#include "slhoi/tokens.hpp"
#include "slhoi/vision_head.hpp"

using namespace slhoi;

namespace {

BackboneConfig tiny_backbone() {
  BackboneConfig cfg;
  cfg.patch_size = 4;
  cfg.depth = 2;
  cfg.dim = 16;
  cfg.num_heads = 2;
  cfg.num_registers = 3;
  cfg.pos_rows = 2;
  cfg.pos_cols = 2;
  return cfg;
}

Image ramp_image(int h, int w) {
  Image img;
  img.height = h;
  img.width = w;
  img.pixels.assign(static_cast<std::size_t>(h) * w * 3, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.pixels[(static_cast<std::size_t>(y) * w + x) * 3 + c] =
            (y * 100.0 + x + c * 0.25) / 1000.0;
  return img;
}

}  // namespace

TEST_CASE("token layouts order class, registers, queries, patches") {
  TokenLayout img = image_layout(4, 3, 5);
  REQUIRE(img.spans.size() == 3);
  CHECK(img.spans[0].kind == Segment::Class);
  CHECK(img.spans[0].size() == 1);
  CHECK(img.spans[1].kind == Segment::Register);
  CHECK(img.spans[1].size() == 4);
  CHECK(img.spans[2].kind == Segment::Patch);
  CHECK(img.spans[2].size() == 15);
  CHECK(img.total() == 20);
  CHECK(!img.has(Segment::Query));

  TokenLayout boot = bootstrap_layout(4, 6, 3, 5);
  REQUIRE(boot.spans.size() == 4);
  CHECK(boot.spans[2].kind == Segment::Query);
  CHECK(boot.spans[2].begin == 5);
  CHECK(boot.spans[2].end == 11);
  CHECK(boot.spans[3].kind == Segment::Patch);
  CHECK(boot.spans[3].begin == 11);
  CHECK(boot.total() == 26);

  // Degenerate query counts keep the span bookkeeping consistent.
  for (int nq : {0, 1, 64}) {
    TokenLayout l = bootstrap_layout(2, nq, 4, 4);
    CHECK(l.count(Segment::Query) == nq);
    CHECK(l.count(Segment::Patch) == 16);
    CHECK(l.total() == 1 + 2 + nq + 16);
    l.validate(l.total());
  }
}

TEST_CASE("layout validation rejects row count mismatches") {
  TokenLayout l = image_layout(2, 2, 2);
  CHECK_THROWS_AS(l.validate(l.total() + 1), DataError);
}

TEST_CASE("patchify embeds 16x16x3 patches row-major with channels innermost") {
  BackboneConfig cfg = tiny_backbone();
  ParamStore store;
  Rng rng(3);
  Backbone bb(store, cfg, rng);

  Image img = ramp_image(8, 12);  // 2x3 patch grid
  TokenSequence seq = bb.patchify(img);

  REQUIRE(seq.layout.grid_rows == 2);
  REQUIRE(seq.layout.grid_cols == 3);
  REQUIRE(seq.tokens.rows() == 1 + cfg.num_registers + 6);
  REQUIRE(seq.tokens.cols() == cfg.dim);

  // Straight-line oracle for patch (row 1, col 2): flatten y, x, channel
  // order, apply the embedding weights and bias, add the interpolated
  // positional code.
  const Parameter& w = store.get("backbone.patch_embed.w");
  const Parameter& b = store.get("backbone.patch_embed.b");
  Mat pos = bb.interpolated_positions(2, 3);
  const int pr = 1, pc = 2;
  const int P = cfg.patch_size;
  std::vector<double> flat;
  for (int y = 0; y < P; ++y)
    for (int x = 0; x < P; ++x)
      for (int c = 0; c < 3; ++c)
        flat.push_back(
            img.pixels[(static_cast<std::size_t>(pr * P + y) * img.width + pc * P + x) * 3 + c]);
  REQUIRE(static_cast<int>(flat.size()) == w.value.rows());
  const int patch_index = pr * 3 + pc;
  const int token_row = seq.layout.span(Segment::Patch).begin + patch_index;
  for (int d = 0; d < cfg.dim; ++d) {
    double want = b.value(0, d) + pos(patch_index, d);
    for (int i = 0; i < w.value.rows(); ++i) want += flat[i] * w.value(i, d);
    CHECK(seq.tokens(token_row, d) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("patchify rejects images not divisible by the patch size") {
  BackboneConfig cfg = tiny_backbone();
  ParamStore store;
  Rng rng(3);
  Backbone bb(store, cfg, rng);
  CHECK_THROWS_AS(bb.patchify(ramp_image(8, 10)), DataError);
  CHECK_THROWS_AS(bb.patchify(ramp_image(9, 12)), DataError);
}

TEST_CASE("positional interpolation is exact on the native grid and averages between") {
  BackboneConfig cfg = tiny_backbone();  // 2x2 table
  ParamStore store;
  Rng rng(5);
  Backbone bb(store, cfg, rng);
  const Mat& table = store.get("backbone.pos_table").value;

  Mat native = bb.interpolated_positions(2, 2);
  CHECK(max_abs_diff(native, table) == 0.0);

  // A 1x1 target sits at the patch-center midpoint of the table: the
  // bilinear blend of all four cells with equal weight.
  Mat mid = bb.interpolated_positions(1, 1);
  for (int d = 0; d < cfg.dim; ++d) {
    const double want =
        0.25 * (table(0, d) + table(1, d) + table(2, d) + table(3, d));
    CHECK(mid(0, d) == doctest::Approx(want).epsilon(1e-9));
  }
}

TEST_CASE("backbone parameters are all frozen and encode is deterministic") {
  BackboneConfig cfg = tiny_backbone();
  ParamStore store;
  Rng rng(7);
  Backbone bb(store, cfg, rng);

  for (const Parameter* p : static_cast<const ParamStore&>(store).with_prefix("backbone."))
    CHECK(p->frozen);

  Image img = ramp_image(8, 8);
  TokenSequence a = bb.encode(img);
  TokenSequence b = bb.encode(img);
  CHECK(max_abs_diff(a.tokens, b.tokens) == 0.0);
  a.validate();
}

TEST_CASE("vision head plain pass preserves shape and rejects query segments") {
  BackboneConfig bcfg = tiny_backbone();
  HeadConfig hcfg;
  hcfg.num_blocks = 2;
  hcfg.dim = bcfg.dim;
  hcfg.num_heads = 2;
  hcfg.final_projection = true;

  ParamStore store;
  Rng rng(11);
  Backbone bb(store, bcfg, rng);
  VisionHead head(store, hcfg, rng);

  TokenSequence xb = bb.encode(ramp_image(8, 8));
  TokenSequence out = head.forward_plain(xb);
  CHECK(out.tokens.rows() == xb.tokens.rows());
  CHECK(out.tokens.cols() == hcfg.dim);
  out.validate();

  for (const Parameter* p : static_cast<const ParamStore&>(store).with_prefix("head."))
    CHECK(p->frozen);

  // A sequence that already contains queries is not a valid plain input.
  TokenSequence bad = xb;
  bad.layout = bootstrap_layout(bcfg.num_registers, 1, xb.layout.grid_rows,
                                xb.layout.grid_cols);
  CHECK_THROWS_AS(head.forward_plain(bad), DataError);
}

TEST_CASE("bootstrap mask blocks image rows from reading query columns") {
  TokenLayout layout = bootstrap_layout(2, 3, 2, 2);  // 1+2+3+4 = 10 tokens
  Mat mask = VisionHead::attention_mask(layout, MaskMode::block_query_to_image);
  REQUIRE(mask.rows() == 10);
  REQUIRE(mask.cols() == 10);
  const SegmentSpan q = layout.span(Segment::Query);
  const double ninf = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < 10; ++r) {
    const bool query_row = r >= q.begin && r < q.end;
    for (int c = 0; c < 10; ++c) {
      const bool query_col = c >= q.begin && c < q.end;
      if (!query_row && query_col)
        CHECK(mask(r, c) == ninf);
      else
        CHECK(mask(r, c) == 0.0);
    }
  }
  Mat open = VisionHead::attention_mask(layout, MaskMode::none);
  CHECK(max_abs_diff(open, Mat(10, 10, 0.0)) == 0.0);
}

TEST_CASE("masked bootstrapping leaves the frozen stream untouched") {
  BackboneConfig bcfg = tiny_backbone();
  HeadConfig hcfg;
  hcfg.num_blocks = 2;
  hcfg.dim = bcfg.dim;
  hcfg.num_heads = 2;
  hcfg.final_projection = true;

  ParamStore store;
  Rng rng(13);
  Backbone bb(store, bcfg, rng);
  VisionHead head(store, hcfg, rng);

  TokenSequence xb = bb.encode(ramp_image(8, 8));
  TokenSequence plain = head.forward_plain(xb);
  const Mat plain_cls = plain.segment_values(Segment::Class);
  const Mat plain_patches = plain.segment_values(Segment::Patch);

  Rng qrng(17);
  for (int trial = 0; trial < 5; ++trial) {
    Graph g;
    Var q = g.input(qrng.normal_mat(4, bcfg.dim));
    BootstrapOutput out =
        head.forward_bootstrapped(g, q, xb, MaskMode::block_query_to_image);
    CHECK(max_abs_diff(out.class_out->value, plain_cls) < 1e-10);
    CHECK(max_abs_diff(out.patches_out->value, plain_patches) < 1e-10);
  }

  // Unmasked bootstrapping must perturb the image stream; otherwise the mask
  // test above is vacuous.
  Graph g;
  Var q = g.input(qrng.normal_mat(4, bcfg.dim));
  BootstrapOutput out = head.forward_bootstrapped(g, q, xb, MaskMode::none);
  CHECK(max_abs_diff(out.patches_out->value, plain_patches) > 1e-8);
}

TEST_CASE("refinement key-value sequence is class, patch mean, then patches") {
  BackboneConfig bcfg = tiny_backbone();
  HeadConfig hcfg;
  hcfg.dim = bcfg.dim;
  hcfg.num_heads = 2;

  ParamStore store;
  Rng rng(19);
  Backbone bb(store, bcfg, rng);
  VisionHead head(store, hcfg, rng);

  TokenSequence xb = bb.encode(ramp_image(8, 8));
  Graph g;
  BootstrapOutput out = head.forward_bootstrapped(
      g, g.input(rng.normal_mat(2, bcfg.dim)), xb, MaskMode::block_query_to_image);
  Var kv = VisionHead::build_kv(out);

  const int n = out.patches_out->value.rows();
  REQUIRE(kv->value.rows() == n + 2);
  CHECK(max_abs_diff(kv->value, kv->value) == 0.0);

  for (int d = 0; d < bcfg.dim; ++d) {
    CHECK(kv->value(0, d) == out.class_out->value(0, d));
    double mean = 0.0;
    for (int r = 0; r < n; ++r) mean += out.patches_out->value(r, d);
    mean /= n;
    CHECK(kv->value(1, d) == doctest::Approx(mean).epsilon(1e-12));
    for (int r = 0; r < n; ++r) CHECK(kv->value(2 + r, d) == out.patches_out->value(r, d));
  }

  // Registers are bookkeeping only: they never enter the KV sequence.
  CHECK(kv->value.rows() == n + 2);
}

TEST_CASE("gradients flow through the frozen head into the queries") {
  BackboneConfig bcfg = tiny_backbone();
  HeadConfig hcfg;
  hcfg.dim = bcfg.dim;
  hcfg.num_heads = 2;

  ParamStore store;
  Rng rng(23);
  Backbone bb(store, bcfg, rng);
  VisionHead head(store, hcfg, rng);
  TokenSequence xb = bb.encode(ramp_image(8, 8));

  Parameter& q = store.create("probe.q", 2, bcfg.dim, false);
  q.value = rng.normal_mat(2, bcfg.dim, 0.5);
  q.grad = Mat(2, bcfg.dim);

  Graph g;
  BootstrapOutput out =
      head.forward_bootstrapped(g, g.param(q), xb, MaskMode::block_query_to_image);
  g.backward_and_flush(sum_all(mul(out.queries_out, out.queries_out)));

  double norm = 0.0;
  for (std::size_t i = 0; i < q.grad.size(); ++i) norm += q.grad.data()[i] * q.grad.data()[i];
  CHECK(norm > 1e-8);

  // The frozen head itself accumulated nothing.
  for (const Parameter* p : static_cast<const ParamStore&>(store).with_prefix("head."))
    CHECK((p->grad.empty() || max_abs_diff(p->grad, Mat(p->grad.rows(), p->grad.cols())) == 0.0));
}
