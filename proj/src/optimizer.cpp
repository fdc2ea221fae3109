#include "slhoi/optimizer.hpp"

#include <cmath>

namespace slhoi {

AdamW::AdamW(ParamStore& store, AdamWConfig cfg) : store_(store), cfg_(cfg), t_mat_(1, 1) {
  for (Parameter* p : store_.all()) {
    if (p->frozen) continue;
    m_[p->name] = Mat(p->value.rows(), p->value.cols());
    v_[p->name] = Mat(p->value.rows(), p->value.cols());
  }
}

void AdamW::step() {
  if (cfg_.clip_norm > 0.0) {
    double sq = 0.0;
    for (Parameter* p : store_.all()) {
      if (p->frozen) continue;
      for (std::size_t i = 0; i < p->grad.size(); ++i) sq += p->grad.data()[i] * p->grad.data()[i];
    }
    const double norm = std::sqrt(sq);
    if (norm > cfg_.clip_norm) {
      const double s = cfg_.clip_norm / norm;
      for (Parameter* p : store_.all()) {
        if (p->frozen) continue;
        for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad.data()[i] *= s;
      }
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (Parameter* p : store_.all()) {
    if (p->frozen) continue;
    Mat& m = m_[p->name];
    Mat& v = v_[p->name];
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double grad = p->grad.data()[i];
      m.data()[i] = cfg_.beta1 * m.data()[i] + (1.0 - cfg_.beta1) * grad;
      v.data()[i] = cfg_.beta2 * v.data()[i] + (1.0 - cfg_.beta2) * grad * grad;
      const double mhat = m.data()[i] / bc1;
      const double vhat = v.data()[i] / bc2;
      double& value = p->value.data()[i];
      value -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * value);
    }
  }
  t_mat_(0, 0) = static_cast<double>(t_);
}

std::vector<std::pair<std::string, const Mat*>> AdamW::state_arrays() const {
  std::vector<std::pair<std::string, const Mat*>> out;
  for (const auto& [name, m] : m_) out.push_back({"opt.m." + name, &m});
  for (const auto& [name, v] : v_) out.push_back({"opt.v." + name, &v});
  out.push_back({"opt.t", &t_mat_});
  return out;
}

void AdamW::load_state(const ArchiveReader& reader) {
  for (auto& [name, m] : m_) m = reader.read("opt.m." + name, m.rows(), m.cols());
  for (auto& [name, v] : v_) v = reader.read("opt.v." + name, v.rows(), v.cols());
  t_mat_ = reader.read("opt.t", 1, 1);
  t_ = static_cast<long>(t_mat_(0, 0));
}

}  // namespace slhoi
