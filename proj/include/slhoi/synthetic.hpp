#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "slhoi/image_io.hpp"

namespace slhoi {

// Desk-scale scene spec: one "human" square (fixed color) and one object
// square (per-class color) per image, placed on the patch grid; the relation
// verb determines which side of the human the object lands on.
struct SyntheticSpec {
  int num_images = 8;
  int canvas = 64;      // square canvas, pixels
  int shape = 16;       // square side, aligned to the patch grid
  std::vector<std::string> objects = {"ball", "box"};
  std::vector<std::string> relations = {"push", "lift"};
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

struct SyntheticTriplet {
  int x_h = 0, y_h = 0;  // human top-left, pixels
  int x_o = 0, y_o = 0;  // object top-left
  int action_id = 0;
  int object_id = 0;
};

struct SyntheticScene {
  int id = 0;
  std::string file;
  SyntheticTriplet triplet;
};

std::array<double, 3> human_color();
std::array<double, 3> object_color(int object_id);  // distinct per class

// Renders a scene onto a fresh canvas; boxes in the annotation are exactly
// the painted rectangles.
Image render_scene(const SyntheticSpec& spec, const SyntheticTriplet& t);

// Deterministic layout of all scenes for a spec (no files written).
std::vector<SyntheticScene> plan_scenes(const SyntheticSpec& spec);

// Writes images/, annotations.json, and categories.csv under out_dir.
// Identical specs produce byte-identical annotation files.
void generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

}  // namespace slhoi
