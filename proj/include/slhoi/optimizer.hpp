#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "slhoi/params.hpp"

namespace slhoi {

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
  double clip_norm = 0.0;  // > 0: scale grads so their global L2 norm <= this
};

// Decoupled-weight-decay Adam over the store's learnable parameters. Moment
// state is keyed by parameter name and round-trips through checkpoints so a
// resumed run continues the exact trajectory.
class AdamW {
 public:
  AdamW(ParamStore& store, AdamWConfig cfg);

  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  long step_count() const { return t_; }

  // One update from the accumulated grads; callers zero grads afterwards.
  void step();

  // State arrays for checkpointing, named opt.m.<param> / opt.v.<param> plus
  // the 1x1 step counter opt.t.
  std::vector<std::pair<std::string, const Mat*>> state_arrays() const;
  void load_state(const ArchiveReader& reader);

 private:
  ParamStore& store_;
  AdamWConfig cfg_;
  long t_ = 0;
  Mat t_mat_;  // mirrors t_ for serialization
  std::map<std::string, Mat> m_, v_;
};

}  // namespace slhoi
