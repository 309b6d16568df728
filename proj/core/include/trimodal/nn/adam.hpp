#pragma once

#include <cstddef>
#include <vector>

#include "trimodal/nn/layers.hpp"

namespace trimodal::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam over a fixed parameter list.
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<Param*> params, AdamConfig cfg = {});

  // One update from the gradients currently stored in the params.
  void step();
  std::size_t step_count() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  std::vector<Param*> params_;
  std::vector<Tensor> m_, v_;
  AdamConfig cfg_;
  std::size_t t_ = 0;
};

}  // namespace trimodal::nn
