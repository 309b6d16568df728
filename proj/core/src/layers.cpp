#include "trimodal/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "gemm.hpp"
#include "trimodal/errors.hpp"

namespace trimodal::nn {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void add_bias_rows(Tensor& y, const Tensor& bias, std::size_t rows,
                   std::size_t cols) {
  double* p = y.data();
  const double* b = bias.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) p[r * cols + c] += b[c];
}

void col_sums(const Tensor& dy, Tensor& acc, std::size_t rows,
              std::size_t cols) {
  const double* p = dy.data();
  double* a = acc.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) a[c] += p[r * cols + c];
}

}  // namespace

void Layer::require_forward_done() const {
  if (!forward_done_)
    throw StateError(std::string(kind()) + ": backward before forward");
}

// --- free functions ------------------------------------------------------

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::max(0.0, y[i]);
  return y;
}

Tensor softmax(const Tensor& x) {
  if (x.rank() == 0) throw DimensionError("softmax on empty tensor");
  const std::size_t cols = x.dim(x.rank() - 1);
  const std::size_t rows = x.size() / cols;
  Tensor y = x;
  double* p = y.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = p + r * cols;
    double mx = row[0];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, row[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      row[c] = std::exp(row[c] - mx);
      sum += row[c];
    }
    for (std::size_t c = 0; c < cols; ++c) row[c] /= sum;
  }
  check_finite(y, "softmax");
  return y;
}

Tensor dropout(const Tensor& x, double rate, Mode mode, Rng& rng,
               Tensor* mask_out) {
  if (rate < 0.0 || rate >= 1.0)
    throw ParameterError("dropout rate must be in [0,1), got " +
                         std::to_string(rate));
  if (mode == Mode::infer || rate == 0.0) {
    if (mask_out) *mask_out = Tensor::full(x.shape(), 1.0);
    return x;
  }
  const double scale = 1.0 / (1.0 - rate);
  Tensor mask(x.shape());
  Tensor y = x;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double keep = rng.uniform() >= rate ? scale : 0.0;
    mask[i] = keep;
    y[i] *= keep;
  }
  if (mask_out) *mask_out = std::move(mask);
  return y;
}

LossGrad softmax_cross_entropy(const Tensor& logits,
                               const std::vector<int>& labels) {
  if (logits.rank() != 2 || logits.dim(1) != 2)
    throw DimensionError("logits must be [batch,2], got " + logits.shape_str());
  const std::size_t batch = logits.dim(0);
  if (labels.size() != batch)
    throw DataError("labels length " + std::to_string(labels.size()) +
                    " != batch " + std::to_string(batch));
  Tensor dlogits(logits.shape());
  double loss = 0.0;
  const double* p = logits.data();
  for (std::size_t b = 0; b < batch; ++b) {
    const int label = labels[b];
    if (label != 0 && label != 1)
      throw DataError("label must be 0 or 1, got " + std::to_string(label));
    const double z0 = p[2 * b], z1 = p[2 * b + 1];
    const double mx = std::max(z0, z1);
    const double lse = mx + std::log(std::exp(z0 - mx) + std::exp(z1 - mx));
    loss += lse - (label == 0 ? z0 : z1);
    const double p0 = std::exp(z0 - lse), p1 = std::exp(z1 - lse);
    dlogits[2 * b] = (p0 - (label == 0 ? 1.0 : 0.0)) / batch;
    dlogits[2 * b + 1] = (p1 - (label == 1 ? 1.0 : 0.0)) / batch;
  }
  loss /= batch;
  check_finite(dlogits, "softmax_cross_entropy");
  return {loss, std::move(dlogits)};
}

// --- DenseLayer ----------------------------------------------------------

DenseLayer::DenseLayer(std::size_t in_dim, std::size_t out_dim)
    : in_dim_(in_dim),
      out_dim_(out_dim),
      weight_("weight", Tensor({out_dim, in_dim})),
      bias_("bias", Tensor({out_dim})) {
  if (in_dim == 0 || out_dim == 0)
    throw ParameterError("dense dimensions must be positive");
}

void DenseLayer::init_he_uniform(Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in_dim_));
  for (std::size_t i = 0; i < weight_.value.size(); ++i)
    weight_.value[i] = rng.uniform(-limit, limit);
  bias_.value.fill(0.0);
}

Tensor DenseLayer::forward(const Tensor& x, Mode, Rng*) {
  if (x.rank() != 2 || x.dim(1) != in_dim_)
    throw DimensionError("dense: input " + x.shape_str() + " vs weight " +
                         weight_.value.shape_str());
  const std::size_t batch = x.dim(0);
  Tensor y({batch, out_dim_});
  detail::gemm_nt(batch, out_dim_, in_dim_, x.data(), weight_.value.data(),
                  y.data());
  add_bias_rows(y, bias_.value, batch, out_dim_);
  x_cache_ = x;
  forward_done_ = true;
  check_finite(y, "dense forward");
  return y;
}

Tensor DenseLayer::backward(const Tensor& dy) {
  require_forward_done();
  const std::size_t batch = x_cache_.dim(0);
  if (dy.rank() != 2 || dy.dim(0) != batch || dy.dim(1) != out_dim_)
    throw DimensionError("dense backward: grad " + dy.shape_str());
  detail::gemm_tn(out_dim_, in_dim_, batch, dy.data(), x_cache_.data(),
                  weight_.grad.data());
  col_sums(dy, bias_.grad, batch, out_dim_);
  Tensor dx({batch, in_dim_});
  detail::gemm_nn(batch, in_dim_, out_dim_, dy.data(), weight_.value.data(),
                  dx.data());
  check_finite(dx, "dense backward");
  return dx;
}

// --- Conv2dLayer ---------------------------------------------------------

Conv2dLayer::Conv2dLayer(std::size_t c_in, std::size_t c_out,
                         std::size_t ksize)
    : c_in_(c_in),
      c_out_(c_out),
      ksize_(ksize),
      kernel_("weight", Tensor({c_out, ksize, ksize, c_in})),
      bias_("bias", Tensor({c_out})) {
  if (ksize != 1 && ksize != 3)
    throw ParameterError("conv2d supports kernel sizes 1 and 3");
}

void Conv2dLayer::init_he_uniform(Rng& rng) {
  const double fan_in = static_cast<double>(ksize_ * ksize_ * c_in_);
  const double limit = std::sqrt(6.0 / fan_in);
  for (std::size_t i = 0; i < kernel_.value.size(); ++i)
    kernel_.value[i] = rng.uniform(-limit, limit);
  bias_.value.fill(0.0);
}

Tensor Conv2dLayer::forward(const Tensor& x, Mode, Rng*) {
  if (x.rank() != 4)
    throw DimensionError("conv2d: expected [batch,h,w,c], got " +
                         x.shape_str());
  if (x.dim(3) != c_in_)
    throw DimensionError("conv2d: input channels " + std::to_string(x.dim(3)) +
                         " != kernel channels " + std::to_string(c_in_));
  const std::size_t batch = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t kk = ksize_ * ksize_ * c_in_;
  const long pad = static_cast<long>(ksize_ - 1) / 2;

  Tensor col({batch * h * w, kk});
  double* cp = col.data();
  const double* xp = x.data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t oy = 0; oy < h; ++oy) {
      for (std::size_t ox = 0; ox < w; ++ox) {
        double* row = cp + ((b * h + oy) * w + ox) * kk;
        std::size_t idx = 0;
        for (std::size_t ky = 0; ky < ksize_; ++ky) {
          const long sy = static_cast<long>(oy) + static_cast<long>(ky) - pad;
          for (std::size_t kx = 0; kx < ksize_; ++kx) {
            const long sx = static_cast<long>(ox) + static_cast<long>(kx) - pad;
            if (sy < 0 || sy >= static_cast<long>(h) || sx < 0 ||
                sx >= static_cast<long>(w)) {
              for (std::size_t c = 0; c < c_in_; ++c) row[idx++] = 0.0;
            } else {
              const double* src =
                  xp + ((b * h + static_cast<std::size_t>(sy)) * w +
                        static_cast<std::size_t>(sx)) *
                           c_in_;
              std::memcpy(row + idx, src, c_in_ * sizeof(double));
              idx += c_in_;
            }
          }
        }
      }
    }
  }

  Tensor y({batch, h, w, c_out_});
  detail::gemm_nt(batch * h * w, c_out_, kk, col.data(), kernel_.value.data(),
                  y.data());
  add_bias_rows(y, bias_.value, batch * h * w, c_out_);
  col_cache_ = std::move(col);
  x_shape_ = {batch, h, w, c_in_};
  forward_done_ = true;
  check_finite(y, "conv2d forward");
  return y;
}

Tensor Conv2dLayer::backward(const Tensor& dy) {
  require_forward_done();
  const auto [batch, h, w, c_in] = x_shape_;
  if (dy.rank() != 4 || dy.dim(0) != batch || dy.dim(1) != h ||
      dy.dim(2) != w || dy.dim(3) != c_out_)
    throw DimensionError("conv2d backward: grad " + dy.shape_str());
  const std::size_t kk = ksize_ * ksize_ * c_in_;
  const std::size_t rows = batch * h * w;
  const long pad = static_cast<long>(ksize_ - 1) / 2;

  detail::gemm_tn(c_out_, kk, rows, dy.data(), col_cache_.data(),
                  kernel_.grad.data());
  col_sums(dy, bias_.grad, rows, c_out_);

  Tensor dcol({rows, kk});
  detail::gemm_nn(rows, kk, c_out_, dy.data(), kernel_.value.data(),
                  dcol.data());

  Tensor dx({batch, h, w, c_in_});
  double* dxp = dx.data();
  const double* dcp = dcol.data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t oy = 0; oy < h; ++oy) {
      for (std::size_t ox = 0; ox < w; ++ox) {
        const double* row = dcp + ((b * h + oy) * w + ox) * kk;
        std::size_t idx = 0;
        for (std::size_t ky = 0; ky < ksize_; ++ky) {
          const long sy = static_cast<long>(oy) + static_cast<long>(ky) - pad;
          for (std::size_t kx = 0; kx < ksize_; ++kx) {
            const long sx = static_cast<long>(ox) + static_cast<long>(kx) - pad;
            if (sy < 0 || sy >= static_cast<long>(h) || sx < 0 ||
                sx >= static_cast<long>(w)) {
              idx += c_in_;
            } else {
              double* dst = dxp + ((b * h + static_cast<std::size_t>(sy)) * w +
                                   static_cast<std::size_t>(sx)) *
                                      c_in_;
              for (std::size_t c = 0; c < c_in_; ++c) dst[c] += row[idx++];
            }
          }
        }
      }
    }
  }
  check_finite(dx, "conv2d backward");
  return dx;
}

// --- MaxPool2x2Layer -----------------------------------------------------

Tensor MaxPool2x2Layer::forward(const Tensor& x, Mode, Rng*) {
  if (x.rank() != 4)
    throw DimensionError("maxpool: expected [batch,h,w,c], got " +
                         x.shape_str());
  const std::size_t batch = x.dim(0), h = x.dim(1), w = x.dim(2),
                    c = x.dim(3);
  if (h % 2 != 0 || w % 2 != 0)
    throw DimensionError("maxpool: spatial dims must be even, got " +
                         x.shape_str());
  const std::size_t oh = h / 2, ow = w / 2;
  Tensor y({batch, oh, ow, c});
  argmax_.assign(y.size(), 0);
  const double* xp = x.data();
  double* yp = y.data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          double best = -1e308;
          std::size_t best_idx = 0;
          // ties resolved to the first window entry in row-major order
          for (std::size_t dy = 0; dy < 2; ++dy) {
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t idx =
                  ((b * h + 2 * oy + dy) * w + 2 * ox + dx) * c + ch;
              if (xp[idx] > best) {
                best = xp[idx];
                best_idx = idx;
              }
            }
          }
          const std::size_t out_idx = ((b * oh + oy) * ow + ox) * c + ch;
          yp[out_idx] = best;
          argmax_[out_idx] = best_idx;
        }
      }
    }
  }
  x_shape_ = {batch, h, w, c};
  forward_done_ = true;
  return y;
}

Tensor MaxPool2x2Layer::backward(const Tensor& dy) {
  require_forward_done();
  if (dy.size() != argmax_.size())
    throw DimensionError("maxpool backward: grad " + dy.shape_str());
  Tensor dx({x_shape_[0], x_shape_[1], x_shape_[2], x_shape_[3]});
  for (std::size_t i = 0; i < dy.size(); ++i) dx[argmax_[i]] += dy[i];
  return dx;
}

// --- BatchNormLayer ------------------------------------------------------

BatchNormLayer::BatchNormLayer(std::size_t channels, double momentum,
                               double epsilon)
    : channels_(channels),
      momentum_(momentum),
      epsilon_(epsilon),
      gamma_("gamma", Tensor::full({channels}, 1.0)),
      beta_("beta", Tensor({channels})),
      running_mean_("running_mean", Tensor({channels}), false),
      running_var_("running_var", Tensor::full({channels}, 1.0), false) {}

Tensor BatchNormLayer::forward(const Tensor& x, Mode mode, Rng*) {
  if (x.rank() < 2 || x.dim(x.rank() - 1) != channels_)
    throw DimensionError("batchnorm: last axis of " + x.shape_str() +
                         " != channels " + std::to_string(channels_));
  const std::size_t rows = x.size() / channels_;
  Tensor y(x.shape());
  xhat_cache_ = Tensor(x.shape());
  inv_std_cache_.assign(channels_, 0.0);
  rows_cache_ = rows;
  train_mode_cache_ = (mode == Mode::train);
  const double* xp = x.data();
  double* yp = y.data();
  double* hp = xhat_cache_.data();

  std::vector<double> mean(channels_, 0.0), var(channels_, 0.0);
  if (mode == Mode::train) {
    if (x.dim(0) < 2)
      throw DataError("batchnorm: train mode requires batch >= 2");
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < channels_; ++c)
        mean[c] += xp[r * channels_ + c];
    for (std::size_t c = 0; c < channels_; ++c) mean[c] /= rows;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < channels_; ++c) {
        const double d = xp[r * channels_ + c] - mean[c];
        var[c] += d * d;
      }
    for (std::size_t c = 0; c < channels_; ++c) var[c] /= rows;
    for (std::size_t c = 0; c < channels_; ++c) {
      running_mean_.value[c] =
          momentum_ * running_mean_.value[c] + (1.0 - momentum_) * mean[c];
      running_var_.value[c] =
          momentum_ * running_var_.value[c] + (1.0 - momentum_) * var[c];
    }
  } else {
    for (std::size_t c = 0; c < channels_; ++c) {
      mean[c] = running_mean_.value[c];
      var[c] = running_var_.value[c];
    }
  }
  for (std::size_t c = 0; c < channels_; ++c)
    inv_std_cache_[c] = 1.0 / std::sqrt(var[c] + epsilon_);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < channels_; ++c) {
      const std::size_t i = r * channels_ + c;
      hp[i] = (xp[i] - mean[c]) * inv_std_cache_[c];
      yp[i] = gamma_.value[c] * hp[i] + beta_.value[c];
    }
  }
  forward_done_ = true;
  check_finite(y, "batchnorm forward");
  return y;
}

Tensor BatchNormLayer::backward(const Tensor& dy) {
  require_forward_done();
  if (!dy.same_shape(xhat_cache_))
    throw DimensionError("batchnorm backward: grad " + dy.shape_str());
  const std::size_t rows = rows_cache_;
  const double n = static_cast<double>(rows);
  const double* gp = dy.data();
  const double* hp = xhat_cache_.data();
  Tensor dx(dy.shape());
  double* dp = dx.data();

  std::vector<double> sum_dy(channels_, 0.0), sum_dy_xhat(channels_, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < channels_; ++c) {
      const std::size_t i = r * channels_ + c;
      sum_dy[c] += gp[i];
      sum_dy_xhat[c] += gp[i] * hp[i];
    }
  }
  for (std::size_t c = 0; c < channels_; ++c) {
    gamma_.grad[c] += sum_dy_xhat[c];
    beta_.grad[c] += sum_dy[c];
  }
  if (train_mode_cache_) {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < channels_; ++c) {
        const std::size_t i = r * channels_ + c;
        dp[i] = gamma_.value[c] * inv_std_cache_[c] / n *
                (n * gp[i] - sum_dy[c] - hp[i] * sum_dy_xhat[c]);
      }
    }
  } else {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < channels_; ++c) {
        const std::size_t i = r * channels_ + c;
        dp[i] = gamma_.value[c] * inv_std_cache_[c] * gp[i];
      }
  }
  check_finite(dx, "batchnorm backward");
  return dx;
}

// --- ReluLayer -----------------------------------------------------------

Tensor ReluLayer::forward(const Tensor& x, Mode, Rng*) {
  mask_ = Tensor(x.shape());
  Tensor y = x;
  for (std::size_t i = 0; i < y.size(); ++i) {
    mask_[i] = y[i] > 0.0 ? 1.0 : 0.0;
    y[i] = std::max(0.0, y[i]);
  }
  forward_done_ = true;
  return y;
}

Tensor ReluLayer::backward(const Tensor& dy) {
  require_forward_done();
  if (!dy.same_shape(mask_))
    throw DimensionError("relu backward: grad " + dy.shape_str());
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= mask_[i];
  return dx;
}

// --- DropoutLayer --------------------------------------------------------

DropoutLayer::DropoutLayer(double rate) : rate_(rate) {
  if (rate < 0.0 || rate >= 1.0)
    throw ParameterError("dropout rate must be in [0,1), got " +
                         std::to_string(rate));
}

Tensor DropoutLayer::forward(const Tensor& x, Mode mode, Rng* rng) {
  forward_done_ = true;
  if (mode == Mode::infer || rate_ == 0.0) {
    was_train_ = false;
    return x;
  }
  was_train_ = true;
  const bool reuse = frozen_ && mask_.same_shape(x);
  if (!reuse) {
    if (!rng) throw StateError("dropout: train mode requires an rng");
    const double scale = 1.0 / (1.0 - rate_);
    mask_ = Tensor(x.shape());
    for (std::size_t i = 0; i < mask_.size(); ++i)
      mask_[i] = rng->uniform() >= rate_ ? scale : 0.0;
  }
  Tensor y = x;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask_[i];
  return y;
}

Tensor DropoutLayer::backward(const Tensor& dy) {
  require_forward_done();
  if (!was_train_) return dy;
  if (!dy.same_shape(mask_))
    throw DimensionError("dropout backward: grad " + dy.shape_str());
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= mask_[i];
  return dx;
}

// --- FlattenLayer --------------------------------------------------------

Tensor FlattenLayer::forward(const Tensor& x, Mode, Rng*) {
  if (x.rank() < 2) throw DimensionError("flatten: rank must be >= 2");
  x_shape_ = x.shape();
  std::size_t rest = 1;
  for (std::size_t i = 1; i < x.rank(); ++i) rest *= x.dim(i);
  forward_done_ = true;
  return x.reshaped({x.dim(0), rest});
}

Tensor FlattenLayer::backward(const Tensor& dy) {
  require_forward_done();
  return dy.reshaped(x_shape_);
}

// --- LstmLayer -----------------------------------------------------------

namespace {
const char* const kGateNames[4] = {"i", "f", "o", "g"};
}

LstmLayer::LstmLayer(std::size_t in_dim, std::size_t units,
                     bool return_sequences, double recurrent_dropout)
    : in_dim_(in_dim),
      units_(units),
      return_sequences_(return_sequences),
      rdrop_(recurrent_dropout) {
  if (in_dim == 0 || units == 0)
    throw ParameterError("lstm dimensions must be positive");
  if (rdrop_ < 0.0 || rdrop_ >= 1.0)
    throw ParameterError("recurrent dropout must be in [0,1)");
  params_.reserve(12);
  for (auto* g : kGateNames)
    params_.emplace_back(std::string("W_") + g, Tensor({units, in_dim}));
  for (auto* g : kGateNames)
    params_.emplace_back(std::string("U_") + g, Tensor({units, units}));
  for (auto* g : kGateNames)
    params_.emplace_back(std::string("b_") + g, Tensor({units}));
}

void LstmLayer::init_weights(Rng& rng) {
  const double w_limit = std::sqrt(6.0 / static_cast<double>(in_dim_));
  const double u_limit = 1.0 / std::sqrt(static_cast<double>(units_));
  for (std::size_t g = 0; g < 4; ++g)
    for (std::size_t i = 0; i < params_[g].value.size(); ++i)
      params_[g].value[i] = rng.uniform(-w_limit, w_limit);
  for (std::size_t g = 0; g < 4; ++g)
    for (std::size_t i = 0; i < params_[4 + g].value.size(); ++i)
      params_[4 + g].value[i] = rng.uniform(-u_limit, u_limit);
  for (std::size_t g = 0; g < 4; ++g)
    params_[8 + g].value.fill(g == 1 ? 1.0 : 0.0);  // forget-gate bias 1
}

std::vector<Param*> LstmLayer::params() {
  std::vector<Param*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(&p);
  return out;
}

namespace {

// Shared single-step computation so the layer loop and the standalone
// cell oracle are bit-identical.
void lstm_step_impl(const Tensor& x_t, const Tensor& h_in,
                    const Tensor& c_prev,
                    const std::array<const Tensor*, 4>& W,
                    const std::array<const Tensor*, 4>& U,
                    const std::array<const Tensor*, 4>& b,
                    std::array<Tensor, 4>& gates, Tensor& c_out,
                    Tensor& tanh_c, Tensor& h_out) {
  const std::size_t batch = x_t.dim(0);
  const std::size_t f = x_t.dim(1);
  const std::size_t u = c_prev.dim(1);
  for (std::size_t g = 0; g < 4; ++g) {
    if (W[g]->dim(0) != u || W[g]->dim(1) != f || U[g]->dim(0) != u ||
        U[g]->dim(1) != u || b[g]->dim(0) != u)
      throw DimensionError("lstm: gate parameter shapes inconsistent with "
                           "input " + x_t.shape_str() + " and state " +
                           c_prev.shape_str());
    Tensor pre({batch, u});
    detail::gemm_nt(batch, u, f, x_t.data(), W[g]->data(), pre.data());
    detail::gemm_nt(batch, u, u, h_in.data(), U[g]->data(), pre.data());
    add_bias_rows(pre, *b[g], batch, u);
    if (g == 3) {
      for (std::size_t i = 0; i < pre.size(); ++i) pre[i] = std::tanh(pre[i]);
    } else {
      for (std::size_t i = 0; i < pre.size(); ++i) pre[i] = sigmoid(pre[i]);
    }
    gates[g] = std::move(pre);
  }
  c_out = Tensor({batch, u});
  tanh_c = Tensor({batch, u});
  h_out = Tensor({batch, u});
  for (std::size_t i = 0; i < c_out.size(); ++i) {
    c_out[i] = gates[1][i] * c_prev[i] + gates[0][i] * gates[3][i];
    tanh_c[i] = std::tanh(c_out[i]);
    h_out[i] = gates[2][i] * tanh_c[i];
  }
}

}  // namespace

void LstmLayer::cell_step(const Tensor& x_t, const Tensor& h_prev,
                          const Tensor& c_prev,
                          const std::array<const Tensor*, 4>& W,
                          const std::array<const Tensor*, 4>& U,
                          const std::array<const Tensor*, 4>& b, Tensor& h_out,
                          Tensor& c_out) {
  std::array<Tensor, 4> gates;
  Tensor tanh_c;
  lstm_step_impl(x_t, h_prev, c_prev, W, U, b, gates, c_out, tanh_c, h_out);
}

Tensor LstmLayer::forward(const Tensor& x, Mode mode, Rng* rng) {
  if (x.rank() != 3)
    throw DimensionError("lstm: expected [batch,T,features], got " +
                         x.shape_str());
  if (x.dim(1) == 0) throw DataError("lstm: empty sequence (T = 0)");
  if (x.dim(2) != in_dim_)
    throw DimensionError("lstm: feature dim " + std::to_string(x.dim(2)) +
                         " != " + std::to_string(in_dim_));
  const std::size_t batch = x.dim(0), T = x.dim(1);
  x_shape_ = {batch, T, in_dim_};

  const bool use_mask = (mode == Mode::train && rdrop_ > 0.0);
  was_train_ = use_mask;
  if (use_mask) {
    const bool reuse = frozen_ && rmask_.size() == batch * units_;
    if (!reuse) {
      if (!rng) throw StateError("lstm: recurrent dropout requires an rng");
      const double scale = 1.0 / (1.0 - rdrop_);
      rmask_ = Tensor({batch, units_});
      for (std::size_t i = 0; i < rmask_.size(); ++i)
        rmask_[i] = rng->uniform() >= rdrop_ ? scale : 0.0;
    }
  }

  std::array<const Tensor*, 4> W{}, U{}, b{};
  for (std::size_t g = 0; g < 4; ++g) {
    W[g] = &params_[g].value;
    U[g] = &params_[4 + g].value;
    b[g] = &params_[8 + g].value;
  }

  steps_.clear();
  steps_.resize(T);
  Tensor h({batch, units_}), c({batch, units_});
  Tensor y = return_sequences_ ? Tensor({batch, T, units_}) : Tensor();
  for (std::size_t t = 0; t < T; ++t) {
    StepCache& sc = steps_[t];
    sc.x = Tensor({batch, in_dim_});
    const double* xp = x.data();
    for (std::size_t bi = 0; bi < batch; ++bi)
      std::memcpy(sc.x.data() + bi * in_dim_,
                  xp + (bi * T + t) * in_dim_, in_dim_ * sizeof(double));
    sc.h_prev_dropped = h;
    if (use_mask)
      for (std::size_t i = 0; i < sc.h_prev_dropped.size(); ++i)
        sc.h_prev_dropped[i] *= rmask_[i];
    sc.c_prev = c;

    std::array<Tensor, 4> gates;
    Tensor c_new, tanh_c, h_new;
    lstm_step_impl(sc.x, sc.h_prev_dropped, sc.c_prev, W, U, b, gates, c_new,
                   tanh_c, h_new);
    sc.i = std::move(gates[0]);
    sc.f = std::move(gates[1]);
    sc.o = std::move(gates[2]);
    sc.g = std::move(gates[3]);
    sc.c = c_new;
    sc.tanh_c = std::move(tanh_c);
    h = std::move(h_new);
    c = std::move(c_new);
    if (return_sequences_) {
      for (std::size_t bi = 0; bi < batch; ++bi)
        std::memcpy(y.data() + (bi * T + t) * units_, h.data() + bi * units_,
                    units_ * sizeof(double));
    }
  }
  if (!return_sequences_) y = h;
  forward_done_ = true;
  check_finite(y, "lstm forward");
  return y;
}

Tensor LstmLayer::backward(const Tensor& dy) {
  require_forward_done();
  const auto [batch, T, f] = x_shape_;
  if (return_sequences_) {
    if (dy.rank() != 3 || dy.dim(0) != batch || dy.dim(1) != T ||
        dy.dim(2) != units_)
      throw DimensionError("lstm backward: grad " + dy.shape_str());
  } else {
    if (dy.rank() != 2 || dy.dim(0) != batch || dy.dim(1) != units_)
      throw DimensionError("lstm backward: grad " + dy.shape_str());
  }

  Tensor dx({batch, T, f});
  Tensor dh_next({batch, units_}), dc_next({batch, units_});
  const std::size_t n = batch * units_;

  for (std::size_t t = T; t-- > 0;) {
    const StepCache& sc = steps_[t];
    Tensor dh = dh_next;
    if (return_sequences_) {
      for (std::size_t bi = 0; bi < batch; ++bi)
        for (std::size_t uu = 0; uu < units_; ++uu)
          dh[bi * units_ + uu] += dy[(bi * T + t) * units_ + uu];
    } else if (t == T - 1) {
      for (std::size_t i = 0; i < n; ++i) dh[i] += dy[i];
    }

    std::array<Tensor, 4> dpre;
    for (auto& g : dpre) g = Tensor({batch, units_});
    Tensor dc({batch, units_});
    for (std::size_t i = 0; i < n; ++i) {
      const double tc = sc.tanh_c[i];
      dc[i] = dc_next[i] + dh[i] * sc.o[i] * (1.0 - tc * tc);
      const double di = dc[i] * sc.g[i];
      const double df = dc[i] * sc.c_prev[i];
      const double dov = dh[i] * tc;
      const double dg = dc[i] * sc.i[i];
      dpre[0][i] = di * sc.i[i] * (1.0 - sc.i[i]);
      dpre[1][i] = df * sc.f[i] * (1.0 - sc.f[i]);
      dpre[2][i] = dov * sc.o[i] * (1.0 - sc.o[i]);
      dpre[3][i] = dg * (1.0 - sc.g[i] * sc.g[i]);
      dc_next[i] = dc[i] * sc.f[i];
    }

    Tensor dxt({batch, f});
    Tensor dh_drop({batch, units_});
    for (std::size_t g = 0; g < 4; ++g) {
      detail::gemm_tn(units_, f, batch, dpre[g].data(), sc.x.data(),
                      params_[g].grad.data());
      detail::gemm_tn(units_, units_, batch, dpre[g].data(),
                      sc.h_prev_dropped.data(), params_[4 + g].grad.data());
      col_sums(dpre[g], params_[8 + g].grad, batch, units_);
      detail::gemm_nn(batch, f, units_, dpre[g].data(), params_[g].value.data(),
                      dxt.data());
      detail::gemm_nn(batch, units_, units_, dpre[g].data(),
                      params_[4 + g].value.data(), dh_drop.data());
    }
    if (was_train_)
      for (std::size_t i = 0; i < n; ++i) dh_drop[i] *= rmask_[i];
    dh_next = std::move(dh_drop);

    for (std::size_t bi = 0; bi < batch; ++bi)
      std::memcpy(dx.data() + (bi * T + t) * f, dxt.data() + bi * f,
                  f * sizeof(double));
  }
  check_finite(dx, "lstm backward");
  return dx;
}

}  // namespace trimodal::nn
