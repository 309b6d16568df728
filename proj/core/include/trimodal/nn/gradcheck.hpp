#pragma once

#include <cstddef>
#include <vector>

#include "trimodal/nn/model.hpp"

namespace trimodal::nn {

// Central-difference check of the analytic gradients of the cross-entropy
// loss. Samples up to samples_per_tensor entries of each trainable tensor
// and returns the maximum relative error |a-n| / max(|a|,|n|,1e-8).
// Stochastic masks are frozen for the duration of the check.
double gradient_check(Model& model, const Tensor& x,
                      const std::vector<int>& labels, double eps = 1e-5,
                      std::size_t samples_per_tensor = 5,
                      std::uint64_t sample_seed = 0);

}  // namespace trimodal::nn
