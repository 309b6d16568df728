#include "trimodal/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "trimodal/rng.hpp"

namespace trimodal::nn {

double gradient_check(Model& model, const Tensor& x,
                      const std::vector<int>& labels, double eps,
                      std::size_t samples_per_tensor,
                      std::uint64_t sample_seed) {
  model.freeze_masks(true);
  Rng mask_rng(sample_seed ^ 0x5EEDULL);

  auto loss_of = [&](void) -> double {
    Tensor logits = model.forward(x, Mode::train, &mask_rng);
    return softmax_cross_entropy(logits, labels).loss;
  };

  // First pass samples the frozen masks and records analytic gradients.
  model.zero_grad();
  Tensor logits = model.forward(x, Mode::train, &mask_rng);
  auto lg = softmax_cross_entropy(logits, labels);
  model.backward(lg.dlogits);

  Rng pick(sample_seed + 1);
  double max_rel = 0.0;
  for (auto* p : model.trainable_parameters()) {
    const std::size_t n = p->value.size();
    const std::size_t count = std::min(samples_per_tensor, n);
    for (std::size_t s = 0; s < count; ++s) {
      const std::size_t idx =
          count == n ? s : static_cast<std::size_t>(pick.below(n));
      const double saved = p->value[idx];
      p->value[idx] = saved + eps;
      const double f_plus = loss_of();
      p->value[idx] = saved - eps;
      const double f_minus = loss_of();
      p->value[idx] = saved;
      const double numeric = (f_plus - f_minus) / (2.0 * eps);
      const double analytic = p->grad[idx];
      const double denom =
          std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
      max_rel = std::max(max_rel, std::fabs(analytic - numeric) / denom);
    }
  }
  model.freeze_masks(false);
  return max_rel;
}

}  // namespace trimodal::nn
