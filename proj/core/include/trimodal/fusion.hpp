#pragma once

#include <array>
#include <string>
#include <vector>

namespace trimodal::fusion {

// One modality's two-class probability output for a subject, or an
// explicit missing marker (modality unavailable / checkpoint dropped).
struct ModalityPrediction {
  std::string modality;
  bool present = false;
  std::array<double, 2> probs{0.0, 0.0};

  static ModalityPrediction missing(std::string name) {
    return {std::move(name), false, {0.0, 0.0}};
  }
  static ModalityPrediction of(std::string name, double p0, double p1) {
    return {std::move(name), true, {p0, p1}};
  }
};

// Per-modality weights, stored normalized to sum 1.
struct FusionWeights {
  std::array<double, 3> w{};
};

struct FusionResult {
  std::array<double, 2> probs{};
  int label = 0;  // argmax, tie resolved to 1
  std::string strategy;
  double confidence = 0.0;  // in (0,1]; 1 iff all modalities present
  std::vector<std::string> modalities_used;
};

struct StackerModel {
  std::array<double, 3> weights{};
  double bias = 0.0;
  int iterations = 0;
  double final_loss = 0.0;
  bool trained = false;
};

using Predictions = std::array<ModalityPrediction, 3>;

// weight_m = AUC_m / sum(AUC), no flooring.
FusionWeights derive_weights(const std::array<double, 3>& validation_aucs);
FusionWeights manual_weights(const std::array<double, 3>& raw);

FusionResult fuse_weighted_average(const Predictions& preds,
                                   const FusionWeights& weights);
// Argmax voting; vote ties fall back to the weighted average over the
// present modalities.
FusionResult fuse_majority_vote(const Predictions& preds,
                                const FusionWeights& weights);
// Independent-evidence log-odds pooling around a scalar prior.
FusionResult fuse_logit_pool(const Predictions& preds, double prior);

// Logistic regression on held-out positive-class probabilities.
// Missing modalities are imputed with 0.5 both here and at inference.
StackerModel train_stacker(const std::vector<std::array<double, 3>>& features,
                           const std::vector<int>& labels);
FusionResult fuse_stacked(const StackerModel& model, const Predictions& preds);

}  // namespace trimodal::fusion
