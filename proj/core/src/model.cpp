#include "trimodal/nn/model.hpp"

#include "trimodal/errors.hpp"

namespace trimodal {

std::string modality_name(ModalityKind m) {
  switch (m) {
    case ModalityKind::image: return "image";
    case ModalityKind::cognitive: return "cognitive";
    case ModalityKind::biomarker: return "biomarker";
  }
  throw ParameterError("unknown modality tag");
}

ModalityKind modality_from_name(const std::string& name) {
  if (name == "image" || name == "mri") return ModalityKind::image;
  if (name == "cognitive") return ModalityKind::cognitive;
  if (name == "biomarker") return ModalityKind::biomarker;
  throw ParameterError("unknown modality name: " + name);
}

namespace nn {

void Model::add(std::unique_ptr<Layer> layer) {
  layers_.push_back(std::move(layer));
}

Tensor Model::forward(const Tensor& x, Mode mode, Rng* rng) {
  Tensor h = x;
  for (auto& layer : layers_) h = layer->forward(h, mode, rng);
  return h;
}

Tensor Model::backward(const Tensor& dlogits) {
  Tensor g = dlogits;
  for (std::size_t i = layers_.size(); i-- > 0;) g = layers_[i]->backward(g);
  return g;
}

void Model::zero_grad() {
  for (auto* p : parameters()) p->grad.fill(0.0);
}

void Model::freeze_masks(bool on) {
  for (auto& layer : layers_) layer->freeze_masks(on);
}

Tensor Model::predict_proba(const Tensor& x) {
  return softmax(forward(x, Mode::infer, nullptr));
}

std::vector<Param*> Model::parameters() {
  std::vector<Param*> out;
  for (auto& layer : layers_)
    for (auto* p : layer->params()) out.push_back(p);
  return out;
}

std::vector<Param*> Model::trainable_parameters() {
  std::vector<Param*> out;
  for (auto* p : parameters())
    if (p->trainable) out.push_back(p);
  return out;
}

std::vector<std::pair<std::string, Param*>> Model::named_parameters() {
  std::vector<std::pair<std::string, Param*>> out;
  for (auto& layer : layers_)
    for (auto* p : layer->params())
      out.emplace_back(layer->name() + "." + p->role, p);
  return out;
}

std::vector<Tensor> Model::snapshot_params() {
  std::vector<Tensor> snap;
  for (auto* p : parameters()) snap.push_back(p->value);
  return snap;
}

void Model::restore_params(const std::vector<Tensor>& snap) {
  auto ps = parameters();
  if (snap.size() != ps.size())
    throw StateError("parameter snapshot size mismatch");
  for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->value = snap[i];
}

}  // namespace nn
}  // namespace trimodal
