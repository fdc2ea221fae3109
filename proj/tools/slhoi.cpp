// slhoi: open-vocabulary human-object-interaction detection on frozen
// self-supervised features. Subcommands cover training, evaluation, attention
// probing, text-bank construction, and synthetic data generation.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "slhoi/config_file.hpp"
#include "slhoi/dataset.hpp"
#include "slhoi/errors.hpp"
#include "slhoi/heatmap.hpp"
#include "slhoi/inference.hpp"
#include "slhoi/map_eval.hpp"
#include "slhoi/model.hpp"
#include "slhoi/synthetic.hpp"
#include "slhoi/text_bank.hpp"
#include "slhoi/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace slhoi;

namespace {

// A run directory holds epoch_NNNN checkpoints plus a `latest` marker; a
// checkpoint directory holds manifest.json directly. Accept either.
fs::path resolve_checkpoint(const fs::path& given) {
  if (fs::exists(given / "manifest.json")) return given;
  const fs::path marker = given / "latest";
  if (fs::exists(marker)) {
    std::ifstream in(marker);
    std::string name;
    std::getline(in, name);
    const fs::path resolved = given / name;
    if (!fs::exists(resolved / "manifest.json")) {
      throw DataError("latest marker in " + given.string() + " points at " + name +
                      ", which is not a checkpoint directory");
    }
    return resolved;
  }
  throw DataError(given.string() +
                  " is neither a checkpoint (no manifest.json) nor a run directory (no latest marker)");
}

void load_model_params(Model& model, const fs::path& checkpoint) {
  ArchiveReader reader(checkpoint);
  for (Parameter* p : model.params().with_prefix("")) {
    p->value = reader.read(p->name, p->value.rows(), p->value.cols());
  }
}

struct CommonFlags {
  std::string config;
  std::string checkpoint;
  std::string out;
  std::string variant;
  std::string protocol;
  std::optional<std::uint64_t> seed;
};

RunConfig load_run_config(const CommonFlags& f, bool config_required) {
  fs::path cfg_path;
  if (!f.config.empty()) {
    cfg_path = f.config;
  } else if (!f.checkpoint.empty()) {
    cfg_path = resolve_checkpoint(f.checkpoint) / "config.toml";
  } else if (config_required) {
    throw ConfigError("no --config given and no --checkpoint to take one from");
  }
  RunConfig rc = RunConfig::load(cfg_path);
  if (f.seed) rc.seed = *f.seed;
  if (!f.out.empty()) rc.output_dir = f.out;
  if (!f.variant.empty()) rc.model.inter.variant = parse_variant(f.variant);
  if (!f.protocol.empty()) rc.model.protocol = parse_protocol(f.protocol);
  rc.model.validate();
  return rc;
}

TextBank load_bank_checked(const fs::path& dir, const InteractionConfig& inter) {
  TextBank bank = load_bank(dir);
  if (bank.dim() != 2 * inter.D) {
    throw ConfigError("text bank " + dir.string() + " has width " + std::to_string(bank.dim()) +
                      " but the configured text space is 2D = " + std::to_string(2 * inter.D));
  }
  return bank;
}

int cmd_train(const CommonFlags& flags) {
  RunConfig rc = load_run_config(flags, /*config_required=*/true);
  TextBank bank = load_bank_checked(rc.bank_dir, rc.model.inter);
  Dataset data = load_dataset(rc.annotations, bank);

  Model model(rc.model, rc.seed);
  Trainer trainer(model, data, bank, rc);
  if (!flags.checkpoint.empty()) {
    const fs::path ckpt = resolve_checkpoint(flags.checkpoint);
    trainer.resume(ckpt);
    std::cout << "resumed from " << ckpt.string() << " at iteration " << trainer.iteration()
              << "\n";
  }

  trainer.run();
  if (!trainer.log().empty()) {
    const IterationRecord& last = trainer.log().back();
    std::cout << format_record(last) << "\n";
  }
  std::cout << "trained " << trainer.iteration() << " iterations -> " << rc.output_dir << "\n";
  return 0;
}

int cmd_eval(const CommonFlags& flags, const std::string& annotations_flag,
             const std::string& bank_flag, int top_k) {
  if (flags.checkpoint.empty()) throw ConfigError("eval requires --checkpoint");
  const fs::path ckpt = resolve_checkpoint(flags.checkpoint);

  CommonFlags cfg_only = flags;
  cfg_only.out.clear();  // --out names the report directory, not output_dir
  RunConfig rc = load_run_config(cfg_only, /*config_required=*/true);
  if (!annotations_flag.empty()) rc.annotations = annotations_flag;
  if (!bank_flag.empty()) rc.bank_dir = bank_flag;

  TextBank bank = load_bank_checked(rc.bank_dir, rc.model.inter);
  Dataset data = load_dataset(rc.annotations, bank);

  Model model(rc.model, rc.seed);
  load_model_params(model, ckpt);

  InferenceOptions opts;
  opts.top_k = top_k;
  const std::vector<ImageEval> evals = run_inference(model, data, bank, opts);
  const std::map<std::string, std::optional<double>> report = evaluate_map(evals, bank);

  json out;
  out["checkpoint"] = ckpt.string();
  out["annotations"] = rc.annotations.string();
  out["images"] = data.images.size();
  json map_json;
  for (const auto& [split, value] : report) {
    if (value) {
      std::printf("mAP[%s] = %.6f\n", split.c_str(), *value);
      map_json[split] = *value;
    } else {
      std::printf("mAP[%s] = undefined (no ground truth)\n", split.c_str());
      map_json[split] = nullptr;
    }
  }
  out["map"] = map_json;

  const fs::path report_dir = flags.out.empty() ? ckpt : fs::path(flags.out);
  fs::create_directories(report_dir);
  const fs::path report_file = report_dir / "eval_metrics.json";
  std::ofstream of(report_file);
  of << out.dump(2) << "\n";
  if (!of) throw DataError("cannot write " + report_file.string());
  std::cout << "wrote " << report_file.string() << "\n";
  return 0;
}

int cmd_probe(const CommonFlags& flags, const std::string& image_path, int row, int col,
              const std::string& stage, bool per_head) {
  if (flags.checkpoint.empty()) throw ConfigError("probe-attention requires --checkpoint");
  const fs::path ckpt = resolve_checkpoint(flags.checkpoint);
  RunConfig rc = load_run_config(flags, /*config_required=*/true);

  Model model(rc.model, rc.seed);
  load_model_params(model, ckpt);

  const Image base = read_ppm(image_path);
  Image normalized = base;
  normalize(normalized, rc.model.backbone.norm_mean, rc.model.backbone.norm_std);

  const int patch = rc.model.backbone.patch_size;
  if (base.height % patch != 0 || base.width % patch != 0) {
    throw DataError("image " + image_path + " (" + std::to_string(base.width) + "x" +
                    std::to_string(base.height) + ") is not divisible by patch size " +
                    std::to_string(patch));
  }
  const int gr = base.height / patch;
  const int gc = base.width / patch;
  const bool needs_patch = stage != "refine_cross";
  if (needs_patch && (row < 0 || row >= gr || col < 0 || col >= gc)) {
    throw ConfigError("patch (" + std::to_string(row) + "," + std::to_string(col) +
                      ") is off the " + std::to_string(gr) + "x" + std::to_string(gc) + " grid");
  }

  const fs::path out_dir = flags.out.empty() ? fs::path("probe") : fs::path(flags.out);
  fs::create_directories(out_dir);

  // Writes prefix_raw.ppm / prefix_overlay.ppm (and _headH variants).
  auto emit = [&](const std::string& name, const AttentionRecord& rec, int query_row,
                  int patch_begin, int patch_end, int mark_r, int mark_c) {
    auto one = [&](const Mat& matrix, const std::string& suffix) {
      Mat attn_row(1, matrix.cols());
      for (int c = 0; c < matrix.cols(); ++c) attn_row(0, c) = matrix(query_row, c);
      const Mat grid = attention_to_grid(attn_row, patch_begin, patch_end, gr, gc);
      save_heatmap_files(out_dir / (name + suffix), grid, base, mark_r, mark_c, patch);
    };
    one(rec.head_mean(), "");
    if (per_head) {
      for (std::size_t h = 0; h < rec.per_head.size(); ++h)
        one(rec.per_head[h], "_head" + std::to_string(h));
    }
  };

  if (stage == "backbone_last") {
    AttentionRecord rec;
    const TokenSequence seq = model.backbone().encode(normalized, &rec);
    const SegmentSpan patches = seq.layout.span(Segment::Patch);
    emit(stage, rec, patches.begin + row * gc + col, patches.begin, patches.end, row, col);
  } else if (stage == "head_block_1" || stage == "head_block_2") {
    const int block = stage == "head_block_1" ? 0 : 1;
    const TokenSequence xb = model.backbone().encode(normalized);
    std::vector<AttentionRecord> blocks;
    model.head().forward_plain(xb, &blocks);
    if (block >= static_cast<int>(blocks.size())) {
      throw ConfigError(stage + " requested but the head has only " +
                        std::to_string(blocks.size()) + " blocks");
    }
    const SegmentSpan patches = xb.layout.span(Segment::Patch);
    emit(stage, blocks[block], patches.begin + row * gc + col, patches.begin, patches.end, row,
         col);
  } else if (stage == "refine_cross") {
    TextBank bank = load_bank_checked(rc.bank_dir, rc.model.inter);
    const ImageContext ctx = model.encode_image(normalized);
    Graph g;
    ForwardCaptures captures;
    captures.want_refine = true;
    model.forward(g, ctx, bank.embeddings, bank.all_rows(), &captures);
    const AttentionRecord& rec = captures.refine_cross;
    // KV sequence is [class', mean(patches'), patches'...]: patch keys start
    // at column 2.
    const int kv_cols = rec.head_mean().cols();
    for (int q = 0; q < rec.head_mean().rows(); ++q) {
      emit(stage + "_q" + std::to_string(q), rec, q, 2, kv_cols, row, col);
    }
  } else {
    throw ConfigError("unknown probe stage '" + stage +
                      "' (expected backbone_last, head_block_1, head_block_2, refine_cross)");
  }
  std::cout << "wrote heatmaps under " << out_dir.string() << "\n";
  return 0;
}

int cmd_build_bank(const std::string& categories, const std::string& encoder,
                   const std::string& embeddings_path, int dim, std::uint64_t seed,
                   const std::string& overrides_path, const std::string& out) {
  if (out.empty()) throw ConfigError("build-text-bank requires --out");
  const std::vector<CategoryEntry> entries = load_categories_csv(categories);

  TextBank bank;
  if (encoder == "stub") {
    InflectionOverrides ov;
    if (!overrides_path.empty()) ov = load_overrides(overrides_path);
    bank = build_stub_bank(entries, dim, seed, ov);
  } else if (encoder == "file") {
    if (embeddings_path.empty())
      throw ConfigError("--encoder file requires --embeddings <raw f32 file>");
    std::ifstream in(embeddings_path, std::ios::binary);
    if (!in) throw DataError("cannot open embeddings file " + embeddings_path);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    const std::size_t expected = entries.size() * static_cast<std::size_t>(dim) * sizeof(float);
    if (bytes.size() != expected) {
      throw DataError("embeddings file holds " + std::to_string(bytes.size()) +
                      " bytes; expected " + std::to_string(expected) + " (" +
                      std::to_string(entries.size()) + " x " + std::to_string(dim) + " f32)");
    }
    bank.entries = entries;
    bank.embeddings = Mat(static_cast<int>(entries.size()), dim);
    const float* f = reinterpret_cast<const float*>(bytes.data());
    for (int r = 0; r < bank.embeddings.rows(); ++r)
      for (int c = 0; c < dim; ++c) bank.embeddings(r, c) = static_cast<double>(*f++);
    bank.provenance = "file:" + fs::path(embeddings_path).filename().string();
  } else {
    throw ConfigError("unknown encoder '" + encoder + "' (expected stub or file)");
  }

  bank.validate();
  save_bank(bank, out);
  std::cout << "wrote bank with " << bank.size() << " categories (dim " << bank.dim() << ") to "
            << out << "\n";
  return 0;
}

int cmd_gen_synthetic(const std::string& out, int images, const std::string& objects,
                      const std::string& relations, int canvas, int shape, std::uint64_t seed) {
  if (out.empty()) throw ConfigError("gen-synthetic requires --out");
  auto split_list = [](const std::string& csv) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : csv) {
      if (ch == ',') {
        if (!cur.empty()) parts.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    if (!cur.empty()) parts.push_back(cur);
    return parts;
  };

  SyntheticSpec spec;
  spec.num_images = images;
  spec.canvas = canvas;
  spec.shape = shape;
  spec.seed = seed;
  if (!objects.empty()) spec.objects = split_list(objects);
  if (!relations.empty()) spec.relations = split_list(relations);
  spec.validate();

  generate_synthetic(spec, out);
  std::cout << "wrote " << spec.num_images << " scenes (" << spec.relations.size() << " relations x "
            << spec.objects.size() << " objects) to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"open-vocabulary HOI detection on frozen features"};
  app.require_subcommand(1);

  CommonFlags flags;

  CLI::App* train = app.add_subcommand("train", "train the detection and interaction stages");
  train->add_option("--config", flags.config, "run configuration file");
  train->add_option("--checkpoint", flags.checkpoint, "checkpoint to resume from");
  train->add_option("--seed", flags.seed, "override the configured seed");
  train->add_option("--out", flags.out, "override the configured output directory");
  train->add_option("--variant", flags.variant,
                    "override the interaction variant (full, masked_full, bootstrap_only, "
                    "late_fusion_head_only, late_fusion_multiscale)");
  train->add_option("--protocol", flags.protocol, "override the protocol (swig, hico)");

  std::string eval_annotations, eval_bank;
  int eval_top_k = 100;
  CLI::App* eval = app.add_subcommand("eval", "report per-split mAP for a checkpoint");
  eval->add_option("--checkpoint", flags.checkpoint, "checkpoint or run directory")->required();
  eval->add_option("--config", flags.config, "override the checkpoint's embedded config");
  eval->add_option("--annotations", eval_annotations, "override the evaluation annotations");
  eval->add_option("--bank", eval_bank, "override the text bank directory");
  eval->add_option("--out", flags.out, "directory for eval_metrics.json (default: checkpoint)");
  eval->add_option("--top-k", eval_top_k, "per-image prediction cap");

  std::string probe_image, probe_stage = "backbone_last";
  int probe_row = -1, probe_col = -1;
  bool probe_per_head = false;
  CLI::App* probe = app.add_subcommand("probe-attention", "emit attention heatmaps for a patch");
  probe->add_option("--checkpoint", flags.checkpoint, "checkpoint or run directory")->required();
  probe->add_option("--config", flags.config, "override the checkpoint's embedded config");
  probe->add_option("--image", probe_image, "input PPM image")->required();
  probe->add_option("--row", probe_row, "queried patch row");
  probe->add_option("--col", probe_col, "queried patch column");
  probe->add_option("--stage", probe_stage,
                    "backbone_last, head_block_1, head_block_2, or refine_cross");
  probe->add_option("--out", flags.out, "output directory (default: probe/)");
  probe->add_flag("--per-head", probe_per_head, "also emit one heatmap per attention head");

  std::string bank_categories, bank_encoder = "stub", bank_embeddings, bank_overrides;
  int bank_dim = 2048;
  std::uint64_t bank_seed = 0;
  CLI::App* bank = app.add_subcommand("build-text-bank", "encode category prompts into a bank");
  bank->add_option("--categories", bank_categories, "categories CSV (action,object[,seen[,rarity]])")
      ->required();
  bank->add_option("--encoder", bank_encoder, "stub (hash-seeded) or file (raw f32 import)");
  bank->add_option("--embeddings", bank_embeddings, "raw f32 embedding block for --encoder file");
  bank->add_option("--dim", bank_dim, "embedding width (2D)");
  bank->add_option("--seed", bank_seed, "stub encoder seed");
  bank->add_option("--overrides", bank_overrides, "inflection overrides JSON");
  bank->add_option("--out", flags.out, "output directory for bank.json + bank.bin")->required();

  std::string gen_objects, gen_relations;
  int gen_images = 8, gen_canvas = 64, gen_shape = 16;
  std::uint64_t gen_seed = 0;
  CLI::App* gen = app.add_subcommand("gen-synthetic", "render a desk-scale synthetic dataset");
  gen->add_option("--out", flags.out, "output directory")->required();
  gen->add_option("--images", gen_images, "number of scenes");
  gen->add_option("--objects", gen_objects, "comma-separated object vocabulary");
  gen->add_option("--relations", gen_relations, "comma-separated relation vocabulary");
  gen->add_option("--canvas", gen_canvas, "square canvas size in pixels");
  gen->add_option("--shape", gen_shape, "square shape size in pixels");
  gen->add_option("--seed", gen_seed, "layout seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;  // bad flags are config errors
  }

  try {
    if (train->parsed()) return cmd_train(flags);
    if (eval->parsed()) return cmd_eval(flags, eval_annotations, eval_bank, eval_top_k);
    if (probe->parsed())
      return cmd_probe(flags, probe_image, probe_row, probe_col, probe_stage, probe_per_head);
    if (bank->parsed())
      return cmd_build_bank(bank_categories, bank_encoder, bank_embeddings, bank_dim, bank_seed,
                            bank_overrides, flags.out);
    if (gen->parsed())
      return cmd_gen_synthetic(flags.out, gen_images, gen_objects, gen_relations, gen_canvas,
                               gen_shape, gen_seed);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
