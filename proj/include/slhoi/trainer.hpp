#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "slhoi/config_file.hpp"
#include "slhoi/dataset.hpp"
#include "slhoi/losses.hpp"
#include "slhoi/model.hpp"
#include "slhoi/optimizer.hpp"
#include "slhoi/protocol.hpp"

namespace slhoi {

struct IterationRecord {
  int iteration = 0;  // 1-based after the step completes
  double lr = 0.0;
  double total = 0.0;
  std::map<std::string, double> terms;
};

// Formats one log line with full double precision so trajectory comparisons
// are exact.
std::string format_record(const IterationRecord& rec);

class Trainer {
 public:
  Trainer(Model& model, const Dataset& data, const TextBank& bank, const RunConfig& rc);

  int iteration() const { return iter_; }
  const std::vector<IterationRecord>& log() const { return log_; }
  const ProtocolSpec& protocol() const { return proto_; }

  // One matched, weighted, backpropagated optimizer step.
  IterationRecord step();

  // Full loop with per-epoch checkpoints, frozen-checksum assertions, and the
  // streaming loss log.
  void run();

  void save_checkpoint(const std::filesystem::path& dir) const;
  void resume(const std::filesystem::path& dir);

  std::uint64_t frozen_checksum() const;

 private:
  std::vector<const SampleImage*> next_batch();

  Model& model_;
  const Dataset& data_;
  const TextBank& bank_;
  RunConfig rc_;
  ProtocolSpec proto_;
  AdamW opt_;
  Rng batch_rng_;
  std::vector<ImageContext> contexts_;
  std::vector<int> order_;
  std::size_t cursor_ = 0;
  int iter_ = 0;
  int epoch_size_ = 1;
  std::uint64_t frozen_at_start_ = 0;
  std::vector<IterationRecord> log_;
  bool resumed_ = false;
};

}  // namespace slhoi
