#pragma once

#include <string>
#include <vector>

#include "slhoi/detector.hpp"
#include "slhoi/matching.hpp"

namespace slhoi {

ProtocolKind parse_protocol(const std::string& name);  // throws ConfigError
const char* protocol_name(ProtocolKind kind);

// Dataset-protocol recipe: loss weights plus the reference schedule.
struct ProtocolSpec {
  ProtocolKind kind = ProtocolKind::swig;
  double w_l1 = 5.0;
  double w_giou = 2.0;
  double w_interaction = 5.0;
  double w_confidence = 10.0;  // swig only
  double w_object = 0.0;       // hico only
  double base_lr = 1e-4;
  std::vector<int> decay_epochs = {60, 90};
  int epochs = 100;

  static ProtocolSpec reference(ProtocolKind kind);
  // The bipartite matching cost reuses the loss weights; the classification
  // component is weighted like the interaction term.
  MatchWeights match_weights() const { return MatchWeights{w_interaction, w_l1, w_giou}; }
};

// Piecewise-constant step decay: x0.1 at each configured epoch boundary.
double lr_at(int epoch, const ProtocolSpec& p);

}  // namespace slhoi
