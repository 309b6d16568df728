#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "trimodal/nn/model.hpp"

namespace trimodal {

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::size_t patience = 5;  // epochs without val-loss improvement
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> val_accuracy;
  std::size_t best_epoch = 0;  // zero-based index of the returned weights
};

struct LabeledSamples {
  std::vector<Tensor> x;
  std::vector<int> y;
  std::size_t size() const { return x.size(); }
};

// Image branch: three conv/BN/pool blocks (32, 64, 128 filters) followed
// by 256- and 128-neuron dense layers with 50% dropout and a 2-way head.
nn::Model build_mri_cnn(std::size_t side, std::size_t channels,
                        std::uint64_t seed);
// Sequence branches: LSTM(64, return sequences) -> LSTM(128) -> dense 128
// -> 2-way head, recurrent dropout 0.2 on both LSTM layers.
nn::Model build_cognitive_lstm(std::size_t timesteps, std::size_t feature_dim,
                               std::uint64_t seed);
nn::Model build_biomarker_lstm(std::size_t timesteps, std::size_t feature_dim,
                               std::uint64_t seed);

// Expected layer listing for a modality, for structural audits.
std::vector<nn::LayerDesc> expected_architecture(ModalityKind modality);

// Stack per-subject samples into one batch tensor.
Tensor stack_samples(const std::vector<Tensor>& samples,
                     const std::vector<std::size_t>& indices);

// Mini-batch Adam on cross-entropy with per-epoch shuffling, early
// stopping, and best-validation-loss weight selection.
TrainHistory train_modality(nn::Model& model, const LabeledSamples& train,
                            const LabeledSamples& val, const TrainConfig& cfg);

std::array<double, 2> predict_modality(nn::Model& model, const Tensor& sample);

// Positive-class probability per sample, inference mode, batched.
std::vector<double> predict_scores(nn::Model& model,
                                   const std::vector<Tensor>& samples);

}  // namespace trimodal
