#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "trimodal/nn/layers.hpp"

namespace trimodal {

enum class ModalityKind : std::uint8_t { image = 0, cognitive = 1, biomarker = 2 };

std::string modality_name(ModalityKind m);
ModalityKind modality_from_name(const std::string& name);

namespace nn {

// One entry of the structural layer listing, used for architecture audits
// and serialization-free comparison against the expected topology.
struct LayerDesc {
  std::string kind;
  std::size_t width = 0;       // units / filters / neurons, 0 if n/a
  std::string activation;      // "relu", "softmax" or ""
  double dropout = 0.0;
  bool return_sequences = false;

  bool operator==(const LayerDesc&) const = default;
};

// Checkpoint geometry: image (h, w, channels, 0, 0, 0);
// sequence (0, 0, 0, T, feature_dim, 0).
using Geometry6 = std::array<std::uint32_t, 6>;

class Model {
 public:
  Model(ModalityKind modality, Geometry6 geometry)
      : modality_(modality), geometry_(geometry) {}

  void add(std::unique_ptr<Layer> layer);
  // The architecture listing is recorded separately from the physical
  // layer objects (activations are standalone layers internally).
  void set_descriptors(std::vector<LayerDesc> descs) {
    descriptors_ = std::move(descs);
  }

  // Forward to logits. rng may be null in infer mode.
  Tensor forward(const Tensor& x, Mode mode, Rng* rng);
  // Backward from the loss gradient on the logits.
  Tensor backward(const Tensor& dlogits);
  void zero_grad();
  void freeze_masks(bool on);

  // Softmax probabilities in infer mode.
  Tensor predict_proba(const Tensor& x);

  std::vector<Param*> parameters();
  std::vector<Param*> trainable_parameters();
  // ("layer_name.role", param) pairs in a fixed order.
  std::vector<std::pair<std::string, Param*>> named_parameters();

  ModalityKind modality() const { return modality_; }
  const Geometry6& geometry() const { return geometry_; }
  const std::vector<LayerDesc>& descriptors() const { return descriptors_; }
  std::size_t layer_count() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_[i]; }

  // Deep copies / restores of parameter values (best-epoch snapshots).
  std::vector<Tensor> snapshot_params();
  void restore_params(const std::vector<Tensor>& snap);

 private:
  ModalityKind modality_;
  Geometry6 geometry_;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<LayerDesc> descriptors_;
};

}  // namespace nn
}  // namespace trimodal
