#include "slhoi/inference.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "slhoi/image_io.hpp"

namespace slhoi {

Image load_normalized_image(const std::filesystem::path& file, const BackboneConfig& cfg) {
  Image img = read_ppm(file);
  normalize(img, cfg.norm_mean, cfg.norm_std);
  return img;
}

namespace {

struct Candidate {
  double score;
  int query;
  int category;
};

Box box_from_row(const Mat& m, int row) {
  return Box{m(row, 0), m(row, 1), m(row, 2), m(row, 3)};
}

// Probability that a query's object head picks the trailing background column.
double background_prob(const Mat& logits, int row) {
  double mx = logits(row, 0);
  for (int c = 1; c < logits.cols(); ++c) mx = std::max(mx, logits(row, c));
  double denom = 0.0;
  for (int c = 0; c < logits.cols(); ++c) denom += std::exp(logits(row, c) - mx);
  return std::exp(logits(row, logits.cols() - 1) - mx) / denom;
}

}  // namespace

std::vector<ImageEval> run_inference(const Model& model, const Dataset& data,
                                     const TextBank& bank, const InferenceOptions& opts) {
  const std::vector<int> rows = bank.all_rows();
  std::vector<ImageEval> out;
  out.reserve(data.images.size());

  for (const SampleImage& sample : data.images) {
    Image img = load_normalized_image(data.image_path(sample), model.config().backbone);
    ImageContext ctx = model.encode_image(img);

    Graph g;
    ModelForward fwd = model.forward(g, ctx, bank.embeddings, rows);

    const Mat& human = fwd.human_boxes->value;
    const Mat& object = fwd.object_boxes->value;
    const Mat& probs = fwd.cls.probs->value;  // N_q x |R|

    const int nq = probs.rows();
    std::vector<double> gate(nq, 1.0);
    if (model.config().protocol == ProtocolKind::swig) {
      for (int i = 0; i < nq; ++i) gate[i] = fwd.confidence->probs->value(i, 0);
    } else {
      for (int i = 0; i < nq; ++i) gate[i] = 1.0 - background_prob(fwd.object_logits->value, i);
    }

    std::vector<Candidate> cands;
    cands.reserve(static_cast<std::size_t>(nq) * rows.size());
    for (int i = 0; i < nq; ++i) {
      for (std::size_t r = 0; r < rows.size(); ++r) {
        cands.push_back({gate[i] * probs(i, static_cast<int>(r)), i, rows[r]});
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      return std::tie(b.score, a.query, a.category) < std::tie(a.score, b.query, b.category);
    });
    if (opts.top_k > 0 && cands.size() > static_cast<std::size_t>(opts.top_k)) {
      cands.resize(static_cast<std::size_t>(opts.top_k));
    }

    ImageEval ev;
    ev.predictions.reserve(cands.size());
    for (const Candidate& c : cands) {
      ev.predictions.push_back(
          {box_from_row(human, c.query), box_from_row(object, c.query), c.category, c.score});
    }
    ev.ground_truth.reserve(sample.triplets.size());
    for (const GroundTruth& gt : sample.triplets) {
      ev.ground_truth.push_back({gt.human, gt.object, gt.category, 0.0});
    }
    out.push_back(std::move(ev));
  }
  return out;
}

}  // namespace slhoi
