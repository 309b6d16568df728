#include "trimodal/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "trimodal/errors.hpp"

namespace trimodal::fusion {

namespace {

constexpr double kProbClamp = 1e-6;

double logit(double p) { return std::log(p / (1.0 - p)); }
double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

int label_of(const std::array<double, 2>& probs) {
  return probs[1] >= probs[0] ? 1 : 0;  // tie resolved to the positive class
}

std::vector<std::size_t> validate(const Predictions& preds) {
  std::vector<std::size_t> present;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& p = preds[i];
    if (!p.present) continue;
    if (p.probs[0] < 0.0 || p.probs[1] < 0.0 ||
        std::fabs(p.probs[0] + p.probs[1] - 1.0) > 1e-9)
      throw DataError("modality " + p.modality +
                      ": probabilities are not a valid 2-class vector");
    present.push_back(i);
  }
  if (present.empty()) throw DataError("all modalities missing");
  return present;
}

std::vector<std::string> used_names(const Predictions& preds,
                                    const std::vector<std::size_t>& present) {
  std::vector<std::string> names;
  for (std::size_t i : present) names.push_back(preds[i].modality);
  return names;
}

}  // namespace

FusionWeights derive_weights(const std::array<double, 3>& validation_aucs) {
  double sum = 0.0;
  for (double a : validation_aucs) {
    if (a < 0.0 || a > 1.0)
      throw ParameterError("AUC outside [0,1]: " + std::to_string(a));
    sum += a;
  }
  if (sum <= 0.0) throw DataError("all validation AUCs are zero");
  FusionWeights w;
  for (std::size_t i = 0; i < 3; ++i) w.w[i] = validation_aucs[i] / sum;
  return w;
}

FusionWeights manual_weights(const std::array<double, 3>& raw) {
  double sum = 0.0;
  for (double v : raw) {
    if (v < 0.0) throw ParameterError("fusion weights must be nonnegative");
    sum += v;
  }
  if (sum <= 0.0) throw ParameterError("at least one fusion weight must be positive");
  FusionWeights w;
  for (std::size_t i = 0; i < 3; ++i) w.w[i] = raw[i] / sum;
  return w;
}

FusionResult fuse_weighted_average(const Predictions& preds,
                                   const FusionWeights& weights) {
  const auto present = validate(preds);
  double mass = 0.0;
  for (std::size_t i : present) mass += weights.w[i];
  if (mass <= 0.0)
    throw DataError("present modalities carry zero fusion weight");
  FusionResult r;
  for (std::size_t i : present) {
    const double w = weights.w[i] / mass;
    r.probs[0] += w * preds[i].probs[0];
    r.probs[1] += w * preds[i].probs[1];
  }
  r.label = label_of(r.probs);
  r.strategy = "weighted_average";
  r.confidence = mass;  // weights are stored normalized to sum 1
  r.modalities_used = used_names(preds, present);
  return r;
}

FusionResult fuse_majority_vote(const Predictions& preds,
                                const FusionWeights& weights) {
  const auto present = validate(preds);
  std::size_t votes1 = 0;
  for (std::size_t i : present)
    if (label_of(preds[i].probs) == 1) ++votes1;
  const std::size_t votes0 = present.size() - votes1;

  if (votes1 == votes0) {
    FusionResult r = fuse_weighted_average(preds, weights);
    r.strategy = "majority_vote(weighted_fallback)";
    return r;
  }
  const int winner = votes1 > votes0 ? 1 : 0;
  FusionResult r;
  std::size_t n_win = 0;
  for (std::size_t i : present) {
    if (label_of(preds[i].probs) != winner) continue;
    r.probs[0] += preds[i].probs[0];
    r.probs[1] += preds[i].probs[1];
    ++n_win;
  }
  r.probs[0] /= n_win;
  r.probs[1] /= n_win;
  r.label = winner;
  r.strategy = "majority_vote";
  double mass = 0.0;
  for (std::size_t i : present) mass += weights.w[i];
  r.confidence = mass;
  r.modalities_used = used_names(preds, present);
  return r;
}

FusionResult fuse_logit_pool(const Predictions& preds, double prior) {
  if (prior <= 0.0 || prior >= 1.0)
    throw ParameterError("prior must lie strictly inside (0,1)");
  const auto present = validate(preds);
  double log_odds = logit(prior);
  for (std::size_t i : present) {
    const double p =
        std::clamp(preds[i].probs[1], kProbClamp, 1.0 - kProbClamp);
    log_odds += logit(p) - logit(prior);
  }
  FusionResult r;
  r.probs[1] = sigmoid(log_odds);
  r.probs[0] = 1.0 - r.probs[1];
  r.label = label_of(r.probs);
  r.strategy = "logit_pool";
  r.confidence = static_cast<double>(present.size()) / 3.0;
  r.modalities_used = used_names(preds, present);
  return r;
}

StackerModel train_stacker(const std::vector<std::array<double, 3>>& features,
                           const std::vector<int>& labels) {
  if (features.size() != labels.size() || features.empty())
    throw DataError("stacker: feature/label count mismatch");
  bool has0 = false, has1 = false;
  for (int y : labels) {
    if (y == 0) has0 = true;
    else if (y == 1) has1 = true;
    else throw DataError("stacker: label must be 0 or 1");
  }
  if (!has0 || !has1)
    throw DataError("stacker: training labels contain a single class");

  constexpr double kLr = 0.1;
  constexpr double kLambda = 1e-4;
  constexpr int kMaxIter = 5000;
  constexpr double kGradTol = 1e-6;
  const double n = static_cast<double>(features.size());

  StackerModel m;
  for (m.iterations = 0; m.iterations < kMaxIter; ++m.iterations) {
    std::array<double, 3> gw{};
    double gb = 0.0;
    double loss = 0.0;
    for (std::size_t s = 0; s < features.size(); ++s) {
      double z = m.bias;
      for (std::size_t j = 0; j < 3; ++j) z += m.weights[j] * features[s][j];
      const double p = sigmoid(z);
      const double err = p - labels[s];
      for (std::size_t j = 0; j < 3; ++j) gw[j] += err * features[s][j];
      gb += err;
      // log(1+exp(-|z|)) form avoids overflow
      loss += std::log1p(std::exp(-std::fabs(z))) +
              (labels[s] == 1 ? std::max(-z, 0.0) : std::max(z, 0.0));
    }
    double norm = std::fabs(gb / n);
    for (std::size_t j = 0; j < 3; ++j) {
      gw[j] = gw[j] / n + kLambda * m.weights[j];
      norm = std::max(norm, std::fabs(gw[j]));
      loss += 0.5 * kLambda * m.weights[j] * m.weights[j] * n;
    }
    m.final_loss = loss / n;
    if (norm < kGradTol) break;
    for (std::size_t j = 0; j < 3; ++j) m.weights[j] -= kLr * gw[j];
    m.bias -= kLr * gb / n;
  }
  m.trained = true;
  return m;
}

FusionResult fuse_stacked(const StackerModel& model, const Predictions& preds) {
  if (!model.trained) throw StateError("stacker has not been trained");
  const auto present = validate(preds);
  double z = model.bias;
  for (std::size_t i = 0; i < 3; ++i) {
    const double feature = preds[i].present ? preds[i].probs[1] : 0.5;
    z += model.weights[i] * feature;
  }
  FusionResult r;
  r.probs[1] = sigmoid(z);
  r.probs[0] = 1.0 - r.probs[1];
  r.label = label_of(r.probs);
  r.strategy = "stacked";
  r.confidence = static_cast<double>(present.size()) / 3.0;
  r.modalities_used = used_names(preds, present);
  return r;
}

}  // namespace trimodal::fusion
