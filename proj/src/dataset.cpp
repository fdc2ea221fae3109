#include "slhoi/dataset.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "slhoi/errors.hpp"

namespace slhoi {

using nlohmann::json;

Box normalize_box(double x1, double y1, double x2, double y2, int width, int height) {
  if (width <= 0 || height <= 0) throw DataError("image with non-positive size in annotations");
  if (x2 < x1 || y2 < y1) throw DataError("box with negative extent in annotations");
  x1 = std::clamp(x1, 0.0, static_cast<double>(width));
  x2 = std::clamp(x2, 0.0, static_cast<double>(width));
  y1 = std::clamp(y1, 0.0, static_cast<double>(height));
  y2 = std::clamp(y2, 0.0, static_cast<double>(height));
  CornerBox c{x1 / width, y1 / height, x2 / width, y2 / height};
  return to_center_size(c);
}

namespace {

Box read_box(const json& arr, int width, int height, const std::string& what, int image_id) {
  if (!arr.is_array() || arr.size() != 4) {
    throw DataError("image " + std::to_string(image_id) + ": " + what +
                    " must be [x1, y1, x2, y2]");
  }
  return normalize_box(arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>(),
                       arr[3].get<double>(), width, height);
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& annotations, const TextBank& bank) {
  std::ifstream in(annotations);
  if (!in) throw DataError("cannot open annotations " + annotations.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("annotations " + annotations.string() + " are not valid JSON: " + e.what());
  }

  Dataset ds;
  ds.root = annotations.parent_path();
  for (const json& a : j.value("actions", json::array())) ds.actions.push_back(a.get<std::string>());
  for (const json& o : j.value("objects", json::array())) ds.objects.push_back(o.get<std::string>());
  if (ds.actions.empty() || ds.objects.empty()) {
    throw DataError("annotations must list non-empty 'actions' and 'objects' vocabularies");
  }

  if (!j.contains("images")) throw DataError("annotations have no 'images' array");
  for (const json& im : j.at("images")) {
    SampleImage s;
    s.id = im.at("id").get<int>();
    s.file = im.value("file", "");
    s.width = im.at("width").get<int>();
    s.height = im.at("height").get<int>();
    for (const json& ann : im.value("annotations", json::array())) {
      GroundTruth gt;
      gt.human = read_box(ann.at("human_box"), s.width, s.height, "human_box", s.id);
      gt.object = read_box(ann.at("object_box"), s.width, s.height, "object_box", s.id);
      const int action_id = ann.at("action_id").get<int>();
      const int object_id = ann.at("object_id").get<int>();
      if (action_id < 0 || action_id >= static_cast<int>(ds.actions.size())) {
        throw DataError("image " + std::to_string(s.id) + ": action_id " +
                        std::to_string(action_id) + " outside the action vocabulary");
      }
      if (object_id < 0 || object_id >= static_cast<int>(ds.objects.size())) {
        throw DataError("image " + std::to_string(s.id) + ": object_id " +
                        std::to_string(object_id) + " outside the object vocabulary");
      }
      gt.object_class = object_id;
      gt.category = bank.find(ds.actions[action_id], ds.objects[object_id]);
      if (gt.category < 0) {
        throw DataError("category (" + ds.actions[action_id] + ", " + ds.objects[object_id] +
                        ") from image " + std::to_string(s.id) + " is missing from the text bank");
      }
      s.triplets.push_back(gt);
    }
    ds.images.push_back(s);
  }
  return ds;
}

}  // namespace slhoi
