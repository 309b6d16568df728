#include "trimodal/modalities.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <memory>
#include <numeric>
#include <set>

#include "trimodal/errors.hpp"
#include "trimodal/nn/adam.hpp"

namespace trimodal {

using nn::Conv2dLayer;
using nn::DenseLayer;
using nn::DropoutLayer;
using nn::FlattenLayer;
using nn::LayerDesc;
using nn::LstmLayer;
using nn::MaxPool2x2Layer;
using nn::Mode;
using nn::Model;
using nn::ReluLayer;

namespace {

void add_named(Model& m, std::unique_ptr<nn::Layer> layer, std::string name) {
  layer->set_name(std::move(name));
  m.add(std::move(layer));
}

Model build_sequence_lstm(ModalityKind modality, std::size_t timesteps,
                          std::size_t feature_dim, std::uint64_t seed) {
  if (timesteps < 1)
    throw ParameterError("sequence model needs at least one timestep");
  if (feature_dim < 1)
    throw ParameterError("sequence model needs at least one feature");
  Rng rng(seed);
  Model m(modality, {0, 0, 0, static_cast<std::uint32_t>(timesteps),
                     static_cast<std::uint32_t>(feature_dim), 0});

  auto lstm1 = std::make_unique<LstmLayer>(feature_dim, 64, true, 0.2);
  lstm1->init_weights(rng);
  add_named(m, std::move(lstm1), "lstm1");
  auto lstm2 = std::make_unique<LstmLayer>(64, 128, false, 0.2);
  lstm2->init_weights(rng);
  add_named(m, std::move(lstm2), "lstm2");
  auto dense1 = std::make_unique<DenseLayer>(128, 128);
  dense1->init_he_uniform(rng);
  add_named(m, std::move(dense1), "dense1");
  add_named(m, std::make_unique<ReluLayer>(), "relu1");
  auto dense2 = std::make_unique<DenseLayer>(128, 2);
  dense2->init_he_uniform(rng);
  add_named(m, std::move(dense2), "dense2");

  m.set_descriptors(expected_architecture(modality));
  return m;
}

}  // namespace

Model build_mri_cnn(std::size_t side, std::size_t channels,
                    std::uint64_t seed) {
  if (side % 8 != 0)
    throw GeometryError("image side must be divisible by 8, got " +
                        std::to_string(side));
  if (channels < 1) throw ParameterError("image needs at least one channel");
  Rng rng(seed);
  Model m(ModalityKind::image,
          {static_cast<std::uint32_t>(side), static_cast<std::uint32_t>(side),
           static_cast<std::uint32_t>(channels), 0, 0, 0});

  const std::size_t filters[3] = {32, 64, 128};
  std::size_t c_in = channels;
  for (std::size_t blk = 0; blk < 3; ++blk) {
    const std::string n = std::to_string(blk + 1);
    auto conv = std::make_unique<Conv2dLayer>(c_in, filters[blk], 3);
    conv->init_he_uniform(rng);
    add_named(m, std::move(conv), "conv" + n);
    add_named(m, std::make_unique<ReluLayer>(), "conv_relu" + n);
    add_named(m, std::make_unique<nn::BatchNormLayer>(filters[blk]), "bn" + n);
    add_named(m, std::make_unique<MaxPool2x2Layer>(), "pool" + n);
    c_in = filters[blk];
  }
  add_named(m, std::make_unique<FlattenLayer>(), "flatten");
  const std::size_t flat = (side / 8) * (side / 8) * 128;
  auto dense1 = std::make_unique<DenseLayer>(flat, 256);
  dense1->init_he_uniform(rng);
  add_named(m, std::move(dense1), "dense1");
  add_named(m, std::make_unique<ReluLayer>(), "relu1");
  add_named(m, std::make_unique<DropoutLayer>(0.5), "drop1");
  auto dense2 = std::make_unique<DenseLayer>(256, 128);
  dense2->init_he_uniform(rng);
  add_named(m, std::move(dense2), "dense2");
  add_named(m, std::make_unique<ReluLayer>(), "relu2");
  add_named(m, std::make_unique<DropoutLayer>(0.5), "drop2");
  auto dense3 = std::make_unique<DenseLayer>(128, 2);
  dense3->init_he_uniform(rng);
  add_named(m, std::move(dense3), "dense3");

  m.set_descriptors(expected_architecture(ModalityKind::image));
  return m;
}

Model build_cognitive_lstm(std::size_t timesteps, std::size_t feature_dim,
                           std::uint64_t seed) {
  return build_sequence_lstm(ModalityKind::cognitive, timesteps, feature_dim,
                             seed);
}

Model build_biomarker_lstm(std::size_t timesteps, std::size_t feature_dim,
                           std::uint64_t seed) {
  return build_sequence_lstm(ModalityKind::biomarker, timesteps, feature_dim,
                             seed);
}

std::vector<LayerDesc> expected_architecture(ModalityKind modality) {
  if (modality == ModalityKind::image) {
    std::vector<LayerDesc> out;
    const std::size_t filters[3] = {32, 64, 128};
    for (std::size_t f : filters) {
      out.push_back({"conv2d", f, "relu", 0.0, false});
      out.push_back({"batchnorm", f, "", 0.0, false});
      out.push_back({"maxpool", 0, "", 0.0, false});
    }
    out.push_back({"flatten", 0, "", 0.0, false});
    out.push_back({"dense", 256, "relu", 0.0, false});
    out.push_back({"dropout", 0, "", 0.5, false});
    out.push_back({"dense", 128, "relu", 0.0, false});
    out.push_back({"dropout", 0, "", 0.5, false});
    out.push_back({"dense", 2, "softmax", 0.0, false});
    return out;
  }
  return {
      {"lstm", 64, "", 0.2, true},
      {"lstm", 128, "", 0.2, false},
      {"dense", 128, "relu", 0.0, false},
      {"dense", 2, "softmax", 0.0, false},
  };
}

Tensor stack_samples(const std::vector<Tensor>& samples,
                     const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw DataError("cannot stack an empty batch");
  const Tensor& first = samples[indices[0]];
  std::vector<std::size_t> shape;
  shape.push_back(indices.size());
  for (std::size_t d : first.shape()) shape.push_back(d);
  Tensor batch(shape);
  const std::size_t stride = first.size();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Tensor& s = samples[indices[i]];
    if (!s.same_shape(first))
      throw DimensionError("sample shape " + s.shape_str() +
                           " != batch sample shape " + first.shape_str());
    std::memcpy(batch.data() + i * stride, s.data(), stride * sizeof(double));
  }
  return batch;
}

namespace {

struct EvalResult {
  double loss;
  double accuracy;
};

EvalResult evaluate_split(Model& model, const LabeledSamples& data) {
  constexpr std::size_t kChunk = 256;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    const std::size_t end = std::min(start + kChunk, data.size());
    std::vector<std::size_t> idx(end - start);
    std::iota(idx.begin(), idx.end(), start);
    Tensor x = stack_samples(data.x, idx);
    Tensor logits = model.forward(x, Mode::infer, nullptr);
    std::vector<int> labels(data.y.begin() + start, data.y.begin() + end);
    loss_sum += nn::softmax_cross_entropy(logits, labels).loss * idx.size();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const int pred = logits[2 * i + 1] >= logits[2 * i] ? 1 : 0;
      if (pred == labels[i]) ++correct;
    }
  }
  return {loss_sum / data.size(),
          static_cast<double>(correct) / data.size()};
}

}  // namespace

TrainHistory train_modality(Model& model, const LabeledSamples& train,
                            const LabeledSamples& val, const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw ParameterError("epochs must be >= 1");
  if (cfg.batch_size < 2)
    throw ParameterError("batch_size must be >= 2 (batch norm constraint)");
  if (train.size() == 0 || val.size() == 0)
    throw DataError("train and validation splits must be nonempty");
  if (train.x.size() != train.y.size() || val.x.size() != val.y.size())
    throw DataError("sample/label count mismatch");
  std::set<int> classes(train.y.begin(), train.y.end());
  if (classes.size() < 2)
    throw DataError("training split contains a single class");

  Rng rng(cfg.seed);
  nn::AdamOptimizer opt(model.trainable_parameters(), {.lr = cfg.lr});

  TrainHistory hist;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best_params = model.snapshot_params();
  std::size_t epochs_since_best = 0;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size) {
      const std::size_t end = std::min(start + cfg.batch_size, order.size());
      if (end - start < 2) break;  // batch norm needs >= 2 samples
      std::vector<std::size_t> idx(order.begin() + start, order.begin() + end);
      Tensor x = stack_samples(train.x, idx);
      std::vector<int> labels;
      labels.reserve(idx.size());
      for (std::size_t i : idx) labels.push_back(train.y[i]);

      Tensor logits = model.forward(x, Mode::train, &rng);
      auto lg = nn::softmax_cross_entropy(logits, labels);
      model.zero_grad();
      model.backward(lg.dlogits);
      opt.step();
      loss_sum += lg.loss * idx.size();
      seen += idx.size();
    }
    hist.train_loss.push_back(loss_sum / seen);

    EvalResult ev = evaluate_split(model, val);
    hist.val_loss.push_back(ev.loss);
    hist.val_accuracy.push_back(ev.accuracy);

    if (ev.loss < best_val) {
      best_val = ev.loss;
      best_params = model.snapshot_params();
      hist.best_epoch = epoch;
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
      if (epochs_since_best >= cfg.patience) break;
    }
  }
  model.restore_params(best_params);
  return hist;
}

std::array<double, 2> predict_modality(Model& model, const Tensor& sample) {
  std::vector<std::size_t> shape;
  shape.push_back(1);
  for (std::size_t d : sample.shape()) shape.push_back(d);
  Tensor probs = model.predict_proba(sample.reshaped(shape));
  return {probs[0], probs[1]};
}

std::vector<double> predict_scores(Model& model,
                                   const std::vector<Tensor>& samples) {
  constexpr std::size_t kChunk = 256;
  std::vector<double> scores;
  scores.reserve(samples.size());
  for (std::size_t start = 0; start < samples.size(); start += kChunk) {
    const std::size_t end = std::min(start + kChunk, samples.size());
    std::vector<std::size_t> idx(end - start);
    std::iota(idx.begin(), idx.end(), start);
    Tensor probs = model.predict_proba(stack_samples(samples, idx));
    for (std::size_t i = 0; i < idx.size(); ++i) scores.push_back(probs[2 * i + 1]);
  }
  return scores;
}

}  // namespace trimodal
