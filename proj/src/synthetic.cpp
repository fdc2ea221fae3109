#include "slhoi/synthetic.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "slhoi/errors.hpp"
#include "slhoi/rng.hpp"

namespace slhoi {

using nlohmann::json;

void SyntheticSpec::validate() const {
  if (num_images <= 0) throw ConfigError("synthetic spec needs num_images >= 1");
  if (objects.empty() || relations.empty()) {
    throw ConfigError("synthetic spec needs at least one object and one relation category");
  }
  if (shape <= 0 || canvas <= 0 || canvas % shape != 0) {
    throw ConfigError("synthetic canvas must be a positive multiple of the shape size");
  }
  if (canvas / shape < 2) {
    throw ConfigError("synthetic canvas must fit at least two shapes per axis");
  }
}

std::array<double, 3> human_color() { return {0.85, 0.15, 0.15}; }

std::array<double, 3> object_color(int object_id) {
  static const std::array<std::array<double, 3>, 8> palette = {{
      {0.15, 0.35, 0.85},
      {0.15, 0.75, 0.30},
      {0.90, 0.75, 0.10},
      {0.60, 0.20, 0.80},
      {0.10, 0.75, 0.75},
      {0.95, 0.50, 0.15},
      {0.55, 0.35, 0.15},
      {0.80, 0.40, 0.60},
  }};
  if (object_id < 0 || object_id >= static_cast<int>(palette.size())) {
    throw ConfigError("synthetic object palette supports at most " +
                      std::to_string(palette.size()) + " classes");
  }
  return palette[object_id];
}

namespace {

void fill_rect(Image& img, int x, int y, int side, const std::array<double, 3>& rgb) {
  for (int yy = y; yy < y + side; ++yy) {
    for (int xx = x; xx < x + side; ++xx) {
      for (int c = 0; c < 3; ++c) img.at(yy, xx, c) = rgb[c];
    }
  }
}

// Object cell offset per relation index: right, above, left, below.
void relation_offset(int action_id, int& dx, int& dy) {
  switch (action_id % 4) {
    case 0: dx = 1; dy = 0; break;
    case 1: dx = 0; dy = -1; break;
    case 2: dx = -1; dy = 0; break;
    default: dx = 0; dy = 1; break;
  }
}

}  // namespace

Image render_scene(const SyntheticSpec& spec, const SyntheticTriplet& t) {
  Image img(spec.canvas, spec.canvas);
  for (double& v : img.pixels) v = 0.92;  // light background
  fill_rect(img, t.x_h, t.y_h, spec.shape, human_color());
  fill_rect(img, t.x_o, t.y_o, spec.shape, object_color(t.object_id));
  return img;
}

std::vector<SyntheticScene> plan_scenes(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const int cells = spec.canvas / spec.shape;
  std::vector<SyntheticScene> scenes;
  for (int i = 0; i < spec.num_images; ++i) {
    SyntheticScene s;
    s.id = i;
    char name[64];
    std::snprintf(name, sizeof(name), "images/img_%04d.ppm", i);
    s.file = name;
    // Cycle the category grid so every (relation, object) pair appears evenly.
    const int category = i % (static_cast<int>(spec.relations.size()) *
                              static_cast<int>(spec.objects.size()));
    s.triplet.action_id = category / static_cast<int>(spec.objects.size());
    s.triplet.object_id = category % static_cast<int>(spec.objects.size());
    int dx = 0, dy = 0;
    relation_offset(s.triplet.action_id, dx, dy);
    const int hx = rng.uniform_int(std::max(0, -dx), cells - 1 - std::max(0, dx));
    const int hy = rng.uniform_int(std::max(0, -dy), cells - 1 - std::max(0, dy));
    s.triplet.x_h = hx * spec.shape;
    s.triplet.y_h = hy * spec.shape;
    s.triplet.x_o = (hx + dx) * spec.shape;
    s.triplet.y_o = (hy + dy) * spec.shape;
    scenes.push_back(s);
  }
  return scenes;
}

void generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_dir) {
  const std::vector<SyntheticScene> scenes = plan_scenes(spec);
  std::filesystem::create_directories(out_dir / "images");

  json root;
  root["actions"] = spec.relations;
  root["objects"] = spec.objects;
  json images = json::array();
  for (const SyntheticScene& s : scenes) {
    write_ppm(out_dir / s.file, render_scene(spec, s.triplet));
    json ann;
    ann["human_box"] = {s.triplet.x_h, s.triplet.y_h, s.triplet.x_h + spec.shape,
                        s.triplet.y_h + spec.shape};
    ann["object_box"] = {s.triplet.x_o, s.triplet.y_o, s.triplet.x_o + spec.shape,
                         s.triplet.y_o + spec.shape};
    ann["action_id"] = s.triplet.action_id;
    ann["object_id"] = s.triplet.object_id;
    json im;
    im["id"] = s.id;
    im["file"] = s.file;
    im["width"] = spec.canvas;
    im["height"] = spec.canvas;
    im["annotations"] = json::array({ann});
    images.push_back(im);
  }
  root["images"] = images;
  std::ofstream af(out_dir / "annotations.json");
  if (!af) throw DataError("cannot write " + (out_dir / "annotations.json").string());
  af << root.dump(2) << "\n";

  std::ofstream cf(out_dir / "categories.csv");
  if (!cf) throw DataError("cannot write " + (out_dir / "categories.csv").string());
  cf << "action,object,seen,rarity\n";
  for (const std::string& rel : spec.relations) {
    for (const std::string& obj : spec.objects) {
      cf << rel << "," << obj << ",seen,n/a\n";
    }
  }
}

}  // namespace slhoi
