#include "slhoi/config_file.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "slhoi/errors.hpp"

namespace slhoi {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Strips a trailing comment, honoring double-quoted strings.
std::string strip_comment(const std::string& line) {
  bool in_quote = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_quote = !in_quote;
    if (line[i] == '#' && !in_quote) return line.substr(0, i);
  }
  return line;
}

}  // namespace

ConfigFile ConfigFile::parse_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str(), file.string());
}

ConfigFile ConfigFile::parse_string(const std::string& text, const std::string& origin) {
  ConfigFile cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": unterminated section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) {
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty section name");
      }
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    }
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    const std::string full = section.empty() ? key : section + "." + key;
    if (cfg.values_.count(full)) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + full + "'");
    }
    cfg.values_[full] = value;
  }
  return cfg;
}

std::string ConfigFile::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

int ConfigFile::get_int(const std::string& key, int fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t pos = 0;
    const int v = std::stoi(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects an integer, got '" + it->second + "'");
  }
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects a number, got '" + it->second + "'");
  }
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true") return true;
  if (it->second == "false") return false;
  throw ConfigError("config key '" + key + "' expects true or false, got '" + it->second + "'");
}

std::uint64_t ConfigFile::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return static_cast<std::uint64_t>(v);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects an unsigned integer, got '" +
                      it->second + "'");
  }
}

RunConfig RunConfig::load(const std::filesystem::path& file) {
  return from_config(ConfigFile::parse_file(file), file.parent_path());
}

RunConfig RunConfig::from_config(const ConfigFile& cfg, const std::filesystem::path& base_dir) {
  RunConfig rc;
  rc.seed = cfg.get_u64("run.seed", 0);
  rc.model.protocol = parse_protocol(cfg.get_string("run.protocol", "swig"));
  rc.model.inter.variant = parse_variant(cfg.get_string("run.variant", "full"));
  rc.output_dir = cfg.get_string("run.output_dir", rc.output_dir);

  BackboneConfig& b = rc.model.backbone;
  b.patch_size = cfg.get_int("backbone.patch_size", b.patch_size);
  b.depth = cfg.get_int("backbone.depth", b.depth);
  b.dim = cfg.get_int("backbone.dim", b.dim);
  b.num_heads = cfg.get_int("backbone.num_heads", b.num_heads);
  b.num_registers = cfg.get_int("backbone.num_registers", b.num_registers);
  b.pos_rows = cfg.get_int("backbone.pos_rows", b.pos_rows);
  b.pos_cols = cfg.get_int("backbone.pos_cols", b.pos_cols);

  HeadConfig& h = rc.model.head;
  h.num_blocks = cfg.get_int("head.num_blocks", h.num_blocks);
  h.num_heads = cfg.get_int("head.num_heads", h.num_heads);
  h.final_projection = cfg.get_bool("head.final_projection", h.final_projection);
  h.dim = b.dim;

  DetectionConfig& d = rc.model.det;
  d.d = cfg.get_int("detector.d", d.d);
  d.num_heads = cfg.get_int("detector.num_heads", d.num_heads);
  d.adapter_layers = cfg.get_int("detector.adapter_layers", d.adapter_layers);
  d.decoder_layers = cfg.get_int("detector.decoder_layers", d.decoder_layers);
  d.num_queries = cfg.get_int("detector.num_queries", d.num_queries);
  d.num_object_classes = cfg.get_int("detector.num_object_classes", d.num_object_classes);

  InteractionConfig& i = rc.model.inter;
  i.D = b.dim;
  i.num_heads = cfg.get_int("interaction.num_heads", i.num_heads);
  i.refine_layers = cfg.get_int("interaction.refine_layers", i.refine_layers);
  i.late_fusion_layers = cfg.get_int("interaction.late_fusion_layers", i.late_fusion_layers);

  rc.iterations = cfg.get_int("train.iterations", rc.iterations);
  rc.batch_size = cfg.get_int("train.batch_size", rc.batch_size);
  rc.epoch_size = cfg.get_int("train.epoch_size", rc.epoch_size);
  rc.lr_override = cfg.get_double("train.lr", rc.lr_override);
  rc.warmup = cfg.get_int("train.warmup", rc.warmup);
  rc.clip_norm = cfg.get_double("train.clip_norm", rc.clip_norm);
  rc.save_checkpoints = cfg.get_bool("train.save_checkpoints", rc.save_checkpoints);
  if (rc.iterations <= 0) throw ConfigError("config: [train] iterations must be >= 1");
  if (rc.batch_size <= 0) throw ConfigError("config: [train] batch_size must be >= 1");
  if (rc.epoch_size < 0) throw ConfigError("config: [train] epoch_size must be >= 0");
  if (rc.warmup < 0) throw ConfigError("config: [train] warmup must be >= 0");
  if (rc.clip_norm < 0) throw ConfigError("config: [train] clip_norm must be >= 0");

  auto resolve = [&base_dir](const std::string& p) -> std::filesystem::path {
    if (p.empty()) return {};
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  rc.annotations = resolve(cfg.get_string("data.annotations", ""));
  rc.bank_dir = resolve(cfg.get_string("data.bank", ""));

  rc.model.validate();
  return rc;
}

std::string RunConfig::emit() const {
  std::ostringstream os;
  os << "[run]\n";
  os << "seed = " << seed << "\n";
  os << "protocol = \"" << protocol_name(model.protocol) << "\"\n";
  os << "variant = \"" << variant_name(model.inter.variant) << "\"\n";
  os << "output_dir = \"" << output_dir << "\"\n\n";

  os << "[backbone]\n";
  os << "patch_size = " << model.backbone.patch_size << "\n";
  os << "depth = " << model.backbone.depth << "\n";
  os << "dim = " << model.backbone.dim << "\n";
  os << "num_heads = " << model.backbone.num_heads << "\n";
  os << "num_registers = " << model.backbone.num_registers << "\n";
  os << "pos_rows = " << model.backbone.pos_rows << "\n";
  os << "pos_cols = " << model.backbone.pos_cols << "\n\n";

  os << "[head]\n";
  os << "num_blocks = " << model.head.num_blocks << "\n";
  os << "num_heads = " << model.head.num_heads << "\n";
  os << "final_projection = " << (model.head.final_projection ? "true" : "false") << "\n\n";

  os << "[detector]\n";
  os << "d = " << model.det.d << "\n";
  os << "num_heads = " << model.det.num_heads << "\n";
  os << "adapter_layers = " << model.det.adapter_layers << "\n";
  os << "decoder_layers = " << model.det.decoder_layers << "\n";
  os << "num_queries = " << model.det.num_queries << "\n";
  os << "num_object_classes = " << model.det.num_object_classes << "\n\n";

  os << "[interaction]\n";
  os << "num_heads = " << model.inter.num_heads << "\n";
  os << "refine_layers = " << model.inter.refine_layers << "\n";
  os << "late_fusion_layers = " << model.inter.late_fusion_layers << "\n\n";

  os << "[train]\n";
  os << "iterations = " << iterations << "\n";
  os << "batch_size = " << batch_size << "\n";
  os << "epoch_size = " << epoch_size << "\n";
  char lr_buf[32];
  std::snprintf(lr_buf, sizeof(lr_buf), "%.17g", lr_override);
  os << "lr = " << lr_buf << "\n";
  os << "warmup = " << warmup << "\n";
  char clip_buf[32];
  std::snprintf(clip_buf, sizeof(clip_buf), "%.17g", clip_norm);
  os << "clip_norm = " << clip_buf << "\n";
  os << "save_checkpoints = " << (save_checkpoints ? "true" : "false") << "\n\n";

  os << "[data]\n";
  os << "annotations = \"" << annotations.string() << "\"\n";
  os << "bank = \"" << bank_dir.string() << "\"\n";
  return os.str();
}

}  // namespace slhoi
