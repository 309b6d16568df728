#include "trimodal/nn/adam.hpp"

#include <cmath>

#include "trimodal/errors.hpp"

namespace trimodal::nn {

AdamOptimizer::AdamOptimizer(std::vector<Param*> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (auto* p : params_) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

void AdamOptimizer::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t pi = 0; pi < params_.size(); ++pi) {
    Param& p = *params_[pi];
    if (!p.grad.same_shape(p.value))
      throw DimensionError("adam: gradient shape " + p.grad.shape_str() +
                           " != parameter shape " + p.value.shape_str());
    Tensor& m = m_[pi];
    Tensor& v = v_[pi];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p.value[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.epsilon);
    }
    check_finite(p.value, "adam step");
  }
}

}  // namespace trimodal::nn
