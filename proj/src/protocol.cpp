#include "slhoi/protocol.hpp"

#include "slhoi/errors.hpp"

namespace slhoi {

ProtocolKind parse_protocol(const std::string& name) {
  if (name == "swig") return ProtocolKind::swig;
  if (name == "hico") return ProtocolKind::hico;
  throw ConfigError("unknown protocol '" + name + "' (expected swig or hico)");
}

const char* protocol_name(ProtocolKind kind) {
  return kind == ProtocolKind::swig ? "swig" : "hico";
}

ProtocolSpec ProtocolSpec::reference(ProtocolKind kind) {
  ProtocolSpec p;
  p.kind = kind;
  if (kind == ProtocolKind::swig) {
    p.w_l1 = 5.0;
    p.w_giou = 2.0;
    p.w_interaction = 5.0;
    p.w_confidence = 10.0;
    p.w_object = 0.0;
    p.decay_epochs = {60, 90};
    p.epochs = 100;
  } else {
    p.w_l1 = 2.5;
    p.w_giou = 1.0;
    p.w_interaction = 2.0;
    p.w_confidence = 0.0;
    p.w_object = 1.0;
    p.decay_epochs = {40};
    p.epochs = 60;
  }
  p.base_lr = 1e-4;
  return p;
}

double lr_at(int epoch, const ProtocolSpec& p) {
  double lr = p.base_lr;
  for (int boundary : p.decay_epochs) {
    if (epoch >= boundary) lr *= 0.1;
  }
  return lr;
}

}  // namespace slhoi
