#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "slhoi/boxes.hpp"
#include "slhoi/text_bank.hpp"

namespace slhoi {

struct GroundTruth {
  Box human;         // normalized center-size
  Box object;
  int category = 0;      // text bank row of the (action, object) pair
  int object_class = 0;  // object vocabulary index
};

struct SampleImage {
  int id = 0;
  std::string file;  // relative to the annotation file's directory
  int width = 0;
  int height = 0;
  std::vector<GroundTruth> triplets;
};

struct Dataset {
  std::vector<SampleImage> images;
  std::vector<std::string> actions;  // vocabularies referenced by action_id/object_id
  std::vector<std::string> objects;
  std::filesystem::path root;

  std::filesystem::path image_path(const SampleImage& s) const { return root / s.file; }
};

// Absolute corner pixels -> normalized center-size, clamped to the canvas.
Box normalize_box(double x1, double y1, double x2, double y2, int width, int height);

// Annotation JSON: {actions, objects, images[{id, file, width, height,
// annotations[{human_box, object_box, action_id, object_id}]}]} with boxes in
// absolute xyxy pixels. Every (action, object) pair must resolve in the bank.
Dataset load_dataset(const std::filesystem::path& annotations, const TextBank& bank);

}  // namespace slhoi
