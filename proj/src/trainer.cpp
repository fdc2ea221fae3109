#include "slhoi/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "slhoi/errors.hpp"
#include "slhoi/image_io.hpp"

namespace slhoi {

using nlohmann::json;
namespace fs = std::filesystem;

std::string format_record(const IterationRecord& rec) {
  char buf[64];
  std::string line = "iter=" + std::to_string(rec.iteration);
  std::snprintf(buf, sizeof(buf), " lr=%.17g", rec.lr);
  line += buf;
  std::snprintf(buf, sizeof(buf), " total=%.17g", rec.total);
  line += buf;
  for (const auto& [name, value] : rec.terms) {
    std::snprintf(buf, sizeof(buf), " %s=%.17g", name.c_str(), value);
    line += buf;
  }
  return line;
}

Trainer::Trainer(Model& model, const Dataset& data, const TextBank& bank, const RunConfig& rc)
    : model_(model),
      data_(data),
      bank_(bank),
      rc_(rc),
      proto_(ProtocolSpec::reference(rc.model.protocol)),
      opt_(model.params(), AdamWConfig{1e-4, 0.9, 0.999, 1e-8, 1e-4, rc.clip_norm}),
      batch_rng_(rc.seed ^ 0x5eedb47c0ffee123ull) {
  if (data_.images.empty()) throw DataError("training dataset has no images");
  const int batch = std::min<int>(rc_.batch_size, static_cast<int>(data_.images.size()));
  epoch_size_ = rc_.epoch_size > 0
                    ? rc_.epoch_size
                    : (static_cast<int>(data_.images.size()) + batch - 1) / batch;

  // The frozen stages never see gradient updates, so their per-image work is
  // done exactly once.
  contexts_.reserve(data_.images.size());
  for (const SampleImage& s : data_.images) {
    Image img = read_ppm(data_.image_path(s));
    normalize(img, model_.config().backbone.norm_mean, model_.config().backbone.norm_std);
    contexts_.push_back(model_.encode_image(img));
  }

  for (int i = 0; i < static_cast<int>(data_.images.size()); ++i) order_.push_back(i);
  frozen_at_start_ = frozen_checksum();
}

std::uint64_t Trainer::frozen_checksum() const {
  return model_.params().checksum("backbone.") ^ (model_.params().checksum("head.") * 0x9e3779b9ull);
}

std::vector<const SampleImage*> Trainer::next_batch() {
  const int batch = std::min<int>(rc_.batch_size, static_cast<int>(data_.images.size()));
  std::vector<const SampleImage*> out;
  for (int k = 0; k < batch; ++k) {
    if (cursor_ == 0) {
      // Fisher-Yates reshuffle at the start of every pass over the data.
      for (int i = static_cast<int>(order_.size()) - 1; i > 0; --i) {
        const int j = batch_rng_.uniform_int(0, i);
        std::swap(order_[i], order_[j]);
      }
    }
    out.push_back(&data_.images[order_[cursor_]]);
    cursor_ = (cursor_ + 1) % order_.size();
  }
  return out;
}

IterationRecord Trainer::step() {
  const int epoch = iter_ / epoch_size_;
  ProtocolSpec sched = proto_;
  if (rc_.lr_override > 0.0) sched.base_lr = rc_.lr_override;
  double lr = lr_at(epoch, sched);
  if (iter_ < rc_.warmup) lr *= static_cast<double>(iter_ + 1) / rc_.warmup;
  opt_.set_lr(lr);

  const std::vector<const SampleImage*> batch = next_batch();
  const std::vector<int> category_rows = category_rows_for_batch(batch, bank_, proto_);
  std::map<int, int> category_cols;
  for (std::size_t c = 0; c < category_rows.size(); ++c)
    category_cols[category_rows[c]] = static_cast<int>(c);

  Graph g;
  std::vector<ModelForward> outputs;
  outputs.reserve(batch.size());
  for (const SampleImage* s : batch) {
    const std::size_t idx = static_cast<std::size_t>(s - data_.images.data());
    outputs.push_back(model_.forward(g, contexts_[idx], bank_.embeddings, category_rows));
  }

  const std::vector<MatchAssignment> assignments =
      match_batch(outputs, batch, category_cols, proto_);
  LossBreakdown loss = compute_batch_loss(g, outputs, batch, assignments, category_cols, proto_);
  if (!std::isfinite(loss.total)) {
    throw NumericalError("training step " + std::to_string(iter_ + 1) +
                         " produced a non-finite loss; aborting before the update");
  }

  g.backward_and_flush(loss.total_var);
  opt_.step();
  model_.params().zero_grads();

  ++iter_;
  IterationRecord rec;
  rec.iteration = iter_;
  rec.lr = lr;
  rec.total = loss.total;
  rec.terms = loss.terms;
  log_.push_back(rec);
  return rec;
}

void Trainer::run() {
  fs::create_directories(rc_.output_dir);
  std::ofstream log_file(fs::path(rc_.output_dir) / "loss_log.txt",
                         resumed_ ? std::ios::app : std::ios::trunc);
  if (!log_file) throw DataError("cannot write loss log under " + rc_.output_dir);

  while (iter_ < rc_.iterations) {
    const IterationRecord rec = step();
    log_file << format_record(rec) << "\n";
    const bool epoch_end = iter_ % epoch_size_ == 0 || iter_ == rc_.iterations;
    if (!epoch_end) continue;

    if (frozen_checksum() != frozen_at_start_) {
      throw std::runtime_error("frozen backbone/head parameters changed during training");
    }
    if (rc_.save_checkpoints) {
      const int epoch = (iter_ + epoch_size_ - 1) / epoch_size_;
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%04d", epoch);
      const fs::path dir = fs::path(rc_.output_dir) / name;
      save_checkpoint(dir);
      std::ofstream marker(fs::path(rc_.output_dir) / "latest");
      marker << name << "\n";
    }
  }
  log_file.flush();
}

void Trainer::save_checkpoint(const fs::path& dir) const {
  std::vector<std::pair<std::string, const Mat*>> arrays;
  for (const Parameter* p : model_.params().with_prefix(""))
    arrays.push_back({p->name, &p->value});
  for (const auto& entry : opt_.state_arrays()) arrays.push_back(entry);
  // f64 keeps the resumed trajectory bit-identical to an unbroken run.
  write_archive(dir, arrays, DType::f64);

  std::ofstream rng_file(dir / "rng_state.txt");
  rng_file << batch_rng_.serialize();
  std::ofstream cfg_file(dir / "config.toml");
  cfg_file << rc_.emit();

  json metrics;
  metrics["iteration"] = iter_;
  metrics["batch_order"] = order_;
  metrics["batch_cursor"] = cursor_;
  if (!log_.empty()) {
    metrics["lr"] = log_.back().lr;
    json terms;
    for (const auto& [name, v] : log_.back().terms) terms[name] = v;
    terms["total"] = log_.back().total;
    metrics["loss"] = terms;
  }
  std::ofstream mf(dir / "metrics.json");
  mf << metrics.dump(2) << "\n";
  if (!mf) throw DataError("cannot write metrics.json in " + dir.string());
}

void Trainer::resume(const fs::path& dir) {
  ArchiveReader reader(dir);
  for (Parameter* p : model_.params().with_prefix(""))
    p->value = reader.read(p->name, p->value.rows(), p->value.cols());
  opt_.load_state(reader);

  std::ifstream rng_file(dir / "rng_state.txt");
  if (!rng_file) throw DataError("checkpoint " + dir.string() + " is missing rng_state.txt");
  std::string state((std::istreambuf_iterator<char>(rng_file)), std::istreambuf_iterator<char>());
  batch_rng_ = Rng::deserialize(state);

  std::ifstream mf(dir / "metrics.json");
  if (!mf) throw DataError("checkpoint " + dir.string() + " is missing metrics.json");
  json metrics;
  mf >> metrics;
  iter_ = metrics.at("iteration").get<int>();
  const std::vector<int> saved_order = metrics.at("batch_order").get<std::vector<int>>();
  if (saved_order.size() != order_.size()) {
    throw DataError("checkpoint batch order covers " + std::to_string(saved_order.size()) +
                    " images but the dataset has " + std::to_string(order_.size()));
  }
  order_ = saved_order;
  cursor_ = metrics.at("batch_cursor").get<std::size_t>();
  frozen_at_start_ = frozen_checksum();
  resumed_ = true;
}

}  // namespace slhoi
