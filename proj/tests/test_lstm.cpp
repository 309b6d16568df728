#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>

#include "trimodal/errors.hpp"
#include "trimodal/nn/gradcheck.hpp"
#include "trimodal/nn/layers.hpp"
#include "trimodal/nn/model.hpp"
#include "trimodal/rng.hpp"

using namespace trimodal;
using namespace trimodal::nn;

namespace {

struct GateRefs {
  std::array<const Tensor*, 4> W, U, b;
};

GateRefs gate_refs(LstmLayer& l) {
  GateRefs g;
  auto ps = l.params();
  for (int i = 0; i < 4; ++i) {
    g.W[i] = &ps[i]->value;
    g.U[i] = &ps[4 + i]->value;
    g.b[i] = &ps[8 + i]->value;
  }
  return g;
}

void zero_params(LstmLayer& l) {
  for (Param* p : l.params()) p->value.fill(0.0);
}

}  // namespace

TEST_CASE("cell step: zero parameters and zero c_prev give zero state") {
  LstmLayer l(2, 3, false, 0.0);
  zero_params(l);
  auto g = gate_refs(l);
  Tensor x({1, 2}, {5, -3}), h0({1, 3}), c0({1, 3});
  Tensor h, c;
  LstmLayer::cell_step(x, h0, c0, g.W, g.U, g.b, h, c);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(c[i] == doctest::Approx(0.0));
    CHECK(h[i] == doctest::Approx(0.0));
  }
}

TEST_CASE("cell step: all-zero inputs, state and biases give zero outputs") {
  LstmLayer l(2, 3, false, 0.0);
  zero_params(l);
  auto g = gate_refs(l);
  Tensor x({1, 2}), h0({1, 3}), c0({1, 3});
  Tensor h, c;
  LstmLayer::cell_step(x, h0, c0, g.W, g.U, g.b, h, c);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(h[i] == 0.0);
    CHECK(c[i] == 0.0);
  }
}

TEST_CASE("cell step: saturated forget gate carries c_prev through") {
  LstmLayer l(2, 3, false, 0.0);
  zero_params(l);
  auto ps = l.params();
  ps[8]->value.fill(-20.0);  // b_i: input gate shut
  ps[9]->value.fill(+20.0);  // b_f: forget gate open
  auto g = gate_refs(l);
  Tensor x({1, 2}, {0.3, -0.8});
  Tensor h0({1, 3});
  Tensor c0({1, 3}, {0.7, -1.2, 0.4});
  Tensor h, c;
  LstmLayer::cell_step(x, h0, c0, g.W, g.U, g.b, h, c);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(c[i] == doctest::Approx(c0[i]).epsilon(1e-8));
    CHECK(h[i] == doctest::Approx(0.5 * std::tanh(c0[i])).epsilon(1e-8));
  }
}

TEST_CASE("layer with T=1 equals a single cell step") {
  LstmLayer l(3, 4, false, 0.0);
  Rng rng(21);
  l.init_weights(rng);
  auto g = gate_refs(l);
  Tensor seq({2, 1, 3});
  for (std::size_t i = 0; i < seq.size(); ++i) seq[i] = rng.normal(0, 1);
  Tensor y = l.forward(seq, Mode::infer, nullptr);

  Tensor x_t = seq.reshaped({2, 3});
  Tensor h0({2, 4}), c0({2, 4}), h, c;
  LstmLayer::cell_step(x_t, h0, c0, g.W, g.U, g.b, h, c);
  REQUIRE(y.same_shape(h));
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == h[i]);
}

TEST_CASE("layer with zero parameters outputs zero") {
  LstmLayer l(2, 3, true, 0.0);
  zero_params(l);
  Tensor seq = Tensor::full({1, 4, 2}, 1.5);
  Tensor y = l.forward(seq, Mode::infer, nullptr);
  CHECK(y.shape() == std::vector<std::size_t>{1, 4, 3});
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == 0.0);
}

TEST_CASE("layer forward equals an explicit per-step cell loop bit-for-bit") {
  for (bool ret_seq : {false, true}) {
    LstmLayer l(3, 5, ret_seq, 0.0);
    Rng rng(77);
    l.init_weights(rng);
    auto g = gate_refs(l);
    const std::size_t batch = 2, T = 6, f = 3;
    Tensor seq({batch, T, f});
    for (std::size_t i = 0; i < seq.size(); ++i) seq[i] = rng.normal(0, 1);
    Tensor y = l.forward(seq, Mode::infer, nullptr);

    Tensor h({batch, 5}), c({batch, 5});
    for (std::size_t t = 0; t < T; ++t) {
      Tensor x_t({batch, f});
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t j = 0; j < f; ++j)
          x_t[b * f + j] = seq[(b * T + t) * f + j];
      Tensor h_next, c_next;
      LstmLayer::cell_step(x_t, h, c, g.W, g.U, g.b, h_next, c_next);
      h = h_next;
      c = c_next;
      if (ret_seq) {
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t u = 0; u < 5; ++u)
            CHECK(y[(b * T + t) * 5 + u] == h[b * 5 + u]);
      }
    }
    if (!ret_seq)
      for (std::size_t i = 0; i < h.size(); ++i) CHECK(y[i] == h[i]);
  }
}

TEST_CASE("empty sequences cannot be represented") {
  CHECK_THROWS_AS(Tensor({2, 0, 3}), DimensionError);
}

TEST_CASE("recurrent dropout: seeded masks are reproducible") {
  LstmLayer l(2, 4, false, 0.5);
  Rng init(5);
  l.init_weights(init);
  Tensor seq({2, 5, 2});
  Rng data(6);
  for (std::size_t i = 0; i < seq.size(); ++i) seq[i] = data.normal(0, 1);
  Rng a(42), b(42);
  Tensor ya = l.forward(seq, Mode::train, &a);
  Tensor yb = l.forward(seq, Mode::train, &b);
  for (std::size_t i = 0; i < ya.size(); ++i) CHECK(ya[i] == yb[i]);
}

TEST_CASE("gradient check: lstm stack with recurrent dropout below 1e-4") {
  nn::Model m(ModalityKind::biomarker, {0, 0, 0, 4, 3, 0});
  Rng rng(13);
  auto l1 = std::make_unique<LstmLayer>(3, 4, true, 0.2);
  l1->init_weights(rng);
  l1->set_name("l1");
  auto l2 = std::make_unique<LstmLayer>(4, 5, false, 0.2);
  l2->init_weights(rng);
  l2->set_name("l2");
  auto d = std::make_unique<DenseLayer>(5, 2);
  d->init_he_uniform(rng);
  d->set_name("head");
  m.add(std::move(l1));
  m.add(std::move(l2));
  m.add(std::move(d));

  Tensor x({3, 4, 3});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal(0, 1);
  CHECK(gradient_check(m, x, {1, 0, 1}, 1e-5, 8, 99) < 1e-4);
}

TEST_CASE("two seeded forwards of the same layer are bit-identical") {
  LstmLayer l(3, 6, true, 0.2);
  Rng init(31);
  l.init_weights(init);
  Tensor seq({2, 4, 3});
  Rng data(32);
  for (std::size_t i = 0; i < seq.size(); ++i) seq[i] = data.uniform(-1, 1);
  Rng ra(7), rb(7);
  Tensor a = l.forward(seq, Mode::train, &ra);
  Tensor b = l.forward(seq, Mode::train, &rb);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}
