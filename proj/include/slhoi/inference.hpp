#pragma once

#include <filesystem>
#include <vector>

#include "slhoi/dataset.hpp"
#include "slhoi/map_eval.hpp"
#include "slhoi/model.hpp"

namespace slhoi {

// Reads a PPM and applies the backbone's channel statistics.
Image load_normalized_image(const std::filesystem::path& file, const BackboneConfig& cfg);

struct InferenceOptions {
  int top_k = 100;  // per-image cap after score ranking; <= 0 keeps everything
};

// Scores every (query, category) pair in every image and pairs the ranked
// triplets with ground truth, ready for mAP evaluation. Triplet scores:
//   swig: confidence * p(category)
//   hico: (1 - p(background)) * p(category)
std::vector<ImageEval> run_inference(const Model& model, const Dataset& data,
                                     const TextBank& bank, const InferenceOptions& opts = {});

}  // namespace slhoi
