#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "trimodal/rng.hpp"
#include "trimodal/tensor.hpp"

namespace trimodal::nn {

enum class Mode { train, infer };

// One named parameter tensor with its gradient slot.
struct Param {
  std::string role;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  Param(std::string role_, Tensor value_, bool trainable_ = true)
      : role(std::move(role_)),
        value(std::move(value_)),
        grad(Tensor(value.shape())),
        trainable(trainable_) {}
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual std::string_view kind() const = 0;
  // rng may be null in infer mode; train mode supplies the run stream.
  virtual Tensor forward(const Tensor& x, Mode mode, Rng* rng) = 0;
  virtual Tensor backward(const Tensor& dy) = 0;
  virtual std::vector<Param*> params() { return {}; }
  // When frozen, stochastic layers reuse the mask from the last unfrozen
  // forward pass (gradient checking needs a deterministic loss).
  virtual void freeze_masks(bool) {}

  const std::string& name() const { return name_; }
  void set_name(std::string n) { name_ = std::move(n); }

 protected:
  void require_forward_done() const;
  bool forward_done_ = false;

 private:
  std::string name_;
};

// --- activation and loss free functions ---------------------------------

Tensor relu(const Tensor& x);
// Softmax over the last axis, max-subtracted for stability.
Tensor softmax(const Tensor& x);
// Inverted dropout. mask_out, when non-null, receives the 0/scale mask.
Tensor dropout(const Tensor& x, double rate, Mode mode, Rng& rng,
               Tensor* mask_out = nullptr);

struct LossGrad {
  double loss;
  Tensor dlogits;
};
// Mean cross-entropy of 2-class logits against labels in {0,1},
// evaluated through log-sum-exp.
LossGrad softmax_cross_entropy(const Tensor& logits,
                               const std::vector<int>& labels);

// --- layers --------------------------------------------------------------

class DenseLayer final : public Layer {
 public:
  DenseLayer(std::size_t in_dim, std::size_t out_dim);
  void init_he_uniform(Rng& rng);

  std::string_view kind() const override { return "dense"; }
  Tensor forward(const Tensor& x, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<Param*> params() override { return {&weight_, &bias_}; }

  std::size_t in_dim() const { return in_dim_; }
  std::size_t out_dim() const { return out_dim_; }

 private:
  std::size_t in_dim_, out_dim_;
  Param weight_;  // [out, in]
  Param bias_;    // [out]
  Tensor x_cache_;
};

// Stride-1 'same' cross-correlation, NHWC, kernel size 1 or 3.
class Conv2dLayer final : public Layer {
 public:
  Conv2dLayer(std::size_t c_in, std::size_t c_out, std::size_t ksize = 3);
  void init_he_uniform(Rng& rng);

  std::string_view kind() const override { return "conv2d"; }
  Tensor forward(const Tensor& x, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<Param*> params() override { return {&kernel_, &bias_}; }

  std::size_t c_out() const { return c_out_; }

 private:
  std::size_t c_in_, c_out_, ksize_;
  Param kernel_;  // [c_out, k, k, c_in]
  Param bias_;    // [c_out]
  Tensor col_cache_;
  std::array<std::size_t, 4> x_shape_{};
};

class MaxPool2x2Layer final : public Layer {
 public:
  std::string_view kind() const override { return "maxpool"; }
  Tensor forward(const Tensor& x, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;

 private:
  std::vector<std::size_t> argmax_;
  std::array<std::size_t, 4> x_shape_{};
};

// Per-channel batch normalization, channel = last axis.
class BatchNormLayer final : public Layer {
 public:
  explicit BatchNormLayer(std::size_t channels, double momentum = 0.9,
                          double epsilon = 1e-5);

  std::string_view kind() const override { return "batchnorm"; }
  Tensor forward(const Tensor& x, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<Param*> params() override {
    return {&gamma_, &beta_, &running_mean_, &running_var_};
  }

 private:
  std::size_t channels_;
  double momentum_, epsilon_;
  Param gamma_, beta_;
  Param running_mean_, running_var_;  // non-trainable
  Tensor xhat_cache_;
  std::vector<double> inv_std_cache_;
  std::size_t rows_cache_ = 0;
  bool train_mode_cache_ = true;
};

class ReluLayer final : public Layer {
 public:
  std::string_view kind() const override { return "relu"; }
  Tensor forward(const Tensor& x, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;

 private:
  Tensor mask_;
};

class DropoutLayer final : public Layer {
 public:
  explicit DropoutLayer(double rate);

  std::string_view kind() const override { return "dropout"; }
  Tensor forward(const Tensor& x, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;
  void freeze_masks(bool on) override { frozen_ = on; }

  double rate() const { return rate_; }

 private:
  double rate_;
  bool frozen_ = false;
  bool was_train_ = false;
  Tensor mask_;
};

class FlattenLayer final : public Layer {
 public:
  std::string_view kind() const override { return "flatten"; }
  Tensor forward(const Tensor& x, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;

 private:
  std::vector<std::size_t> x_shape_;
};

// Standard gated LSTM with forget gate. Recurrent dropout is variational:
// one mask per forward call, applied to h_prev at every step.
class LstmLayer final : public Layer {
 public:
  LstmLayer(std::size_t in_dim, std::size_t units, bool return_sequences,
            double recurrent_dropout);
  void init_weights(Rng& rng);

  std::string_view kind() const override { return "lstm"; }
  Tensor forward(const Tensor& x, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<Param*> params() override;
  void freeze_masks(bool on) override { frozen_ = on; }

  std::size_t units() const { return units_; }
  bool return_sequences() const { return return_sequences_; }
  double recurrent_dropout() const { return rdrop_; }

  // Single-step cell update used both by forward() and by the per-step
  // oracle in tests. Gate order: i, f, o, g.
  static void cell_step(const Tensor& x_t, const Tensor& h_prev,
                        const Tensor& c_prev,
                        const std::array<const Tensor*, 4>& W,
                        const std::array<const Tensor*, 4>& U,
                        const std::array<const Tensor*, 4>& b, Tensor& h_out,
                        Tensor& c_out);

  const Param& param(std::size_t i) const { return params_[i]; }

 private:
  struct StepCache;

  std::size_t in_dim_, units_;
  bool return_sequences_;
  double rdrop_;
  bool frozen_ = false;
  bool was_train_ = false;
  std::vector<Param> params_;  // W_i..W_g, U_i..U_g, b_i..b_g
  Tensor rmask_;               // [batch, units], already inverted-scaled
  std::vector<StepCache> steps_;
  std::array<std::size_t, 3> x_shape_{};
};

struct LstmLayer::StepCache {
  Tensor x, h_prev_dropped, c_prev;
  Tensor i, f, o, g, c, tanh_c;
};

}  // namespace trimodal::nn
