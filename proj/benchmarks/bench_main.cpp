#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

#include "trimodal/metrics.hpp"
#include "trimodal/modalities.hpp"
#include "trimodal/nn/layers.hpp"
#include "trimodal/rng.hpp"

using namespace trimodal;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal(0, 1);
  return t;
}

void BM_Conv2dForward(benchmark::State& state) {
  const std::size_t side = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  nn::Conv2dLayer conv(3, 32, 3);
  conv.init_he_uniform(rng);
  Tensor x = random_tensor({4, side, side, 3}, rng);
  for (auto _ : state) {
    Tensor y = conv.forward(x, nn::Mode::infer, nullptr);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * 4 * side * side);
}
BENCHMARK(BM_Conv2dForward)->Arg(16)->Arg(32)->Arg(64);

void BM_DenseForward(benchmark::State& state) {
  const std::size_t width = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  nn::DenseLayer dense(width, width);
  dense.init_he_uniform(rng);
  Tensor x = random_tensor({32, width}, rng);
  for (auto _ : state) {
    Tensor y = dense.forward(x, nn::Mode::infer, nullptr);
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_DenseForward)->Arg(128)->Arg(256)->Arg(1024);

void BM_LstmForward(benchmark::State& state) {
  const std::size_t units = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  nn::LstmLayer lstm(3, units, false, 0.0);
  lstm.init_weights(rng);
  Tensor x = random_tensor({32, 6, 3}, rng);
  for (auto _ : state) {
    Tensor y = lstm.forward(x, nn::Mode::infer, nullptr);
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_LstmForward)->Arg(64)->Arg(128);

void BM_MriCnnPredict(benchmark::State& state) {
  Rng rng(4);
  nn::Model m = build_mri_cnn(32, 3, 4);
  Tensor x = random_tensor({1, 32, 32, 3}, rng);
  for (auto _ : state) {
    Tensor y = m.predict_proba(x);
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_MriCnnPredict);

void BM_AucScore(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(5);
  std::vector<double> scores(n);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = rng.uniform();
    labels[i] = static_cast<int>(rng.below(2));
  }
  labels[0] = 0;
  labels[1] = 1;
  for (auto _ : state) {
    double auc = metrics::auc_score(scores, labels);
    benchmark::DoNotOptimize(auc);
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_AucScore)->Arg(1000)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
