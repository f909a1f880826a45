#include <doctest.h>

#include "unipoint/basis.hpp"
#include "unipoint/error.hpp"
#include "unipoint/nn.hpp"
#include "unipoint/rng.hpp"

#include <cmath>
#include <vector>

using namespace unipoint;

namespace {

// Weighted sum of all hidden states, the scalar loss used for the encoder gradient checks.
double weighted_states(const Encoder& enc, std::span<const double> inputs, std::span<const double> weights) {
  const auto tr = encode(enc, inputs);
  double s = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) s += weights[k] * tr.h[tr.hidden + k];
  return s;
}

std::vector<std::span<double>> tensors(Encoder& enc) {
  std::vector<std::span<double>> out;
  visit_encoder(enc, [&](std::string_view, const Shape&, std::span<double> v) { out.push_back(v); });
  return out;
}

} // namespace

TEST_CASE("rnn_step") {
  auto w = RnnWeights::zeros(3);
  const std::vector<double> h(3, 0.7);
  for (double x : rnn_step(w, h, 2.0)) CHECK(x == 0.5);
  w.b[1] = 10.0;
  CHECK(rnn_step(w, h, 0.0)[1] == doctest::Approx(0.9999546).epsilon(1e-7));
  w.W = {0.3, -0.2, 0.1, 0.0, 0.5, 0.4, -0.7, 0.2, 0.2};
  CHECK(rnn_step(w, h, -3.0) == rnn_step(w, h, 5.0));

  Rng rng(1);
  Encoder enc = make_encoder(CellType::Rnn, 5);
  init_uniform(enc, rng);
  const auto& rw = std::get<RnnWeights>(enc);
  std::vector<double> state(5, 0.0);
  for (int i = 0; i < 1000; ++i) {
    state = rnn_step(rw, state, rng.uniform(-30, 30));
    for (double x : state) CHECK((x > 0.0 && x < 1.0));
  }
}

TEST_CASE("lstm_step") {
  auto w = LstmWeights::zeros(2);
  const LstmState zero{{0, 0}, {0, 0}};
  const auto s = lstm_step(w, zero, 1.5);
  CHECK(s.c == std::vector<double>{0, 0});
  CHECK(s.h == std::vector<double>{0, 0});

  // forget gate rows are the second block
  w.b[2 + 0] = 10.0;
  w.b[2 + 1] = 10.0;
  const LstmState one{{0, 0}, {1, 1}};
  const auto t = lstm_step(w, one, 0.0);
  const double f = 1.0 / (1.0 + std::exp(-10.0));
  CHECK(t.c[0] == doctest::Approx(f * 1.0 + 0.5 * 0.0).epsilon(1e-14));
  CHECK(t.c[0] == doctest::Approx(0.99995).epsilon(1e-5));
  CHECK(t.h[0] == doctest::Approx(0.5 * std::tanh(t.c[0])).epsilon(1e-14));
  CHECK(lstm_step(w, one, 0.0).h == t.h);
}

TEST_CASE("encoder backward by hand") {
  // loss = sum of h_1 with W = v = 0: dL/db = sigma'(b)
  auto w = RnnWeights::zeros(3);
  w.b = {-1.0, 0.0, 2.0};
  Encoder enc = w;
  const std::vector<double> inputs{0.3};
  const auto tr = encode(enc, inputs);
  Encoder grad = make_encoder(CellType::Rnn, 3);
  const std::vector<double> ones(3, 1.0);
  encode_backward(enc, tr, ones, grad);
  const auto& g = std::get<RnnWeights>(grad);
  for (std::size_t k = 0; k < 3; ++k) {
    const double s = sigmoid(w.b[k]);
    CHECK(g.b[k] == doctest::Approx(s * (1 - s)).epsilon(1e-15));
  }
  // W multiplies h0 = 0 and the loss ignores later steps, so dW = 0
  for (double x : g.W) CHECK(x == 0.0);
}

TEST_CASE("encoder gradients match central differences") {
  Rng rng(7);
  for (CellType cell : {CellType::Rnn, CellType::Lstm}) {
    CAPTURE(to_string(cell));
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t H = 2 + rng.index(3);
      const std::size_t steps = 1 + rng.index(5);
      Encoder enc = make_encoder(cell, H);
      for (auto t : tensors(enc))
        for (auto& x : t) x = rng.uniform(-1.0, 1.0);
      std::vector<double> inputs(steps);
      for (auto& x : inputs) x = rng.uniform(-2, 2);
      std::vector<double> weights(steps * H);
      for (auto& x : weights) x = rng.uniform(-1, 1);

      const auto tr = encode(enc, inputs);
      Encoder grad = make_encoder(cell, H);
      encode_backward(enc, tr, weights, grad);

      auto ps = tensors(enc);
      auto gs = tensors(grad);
      for (std::size_t t = 0; t < ps.size(); ++t) {
        for (std::size_t k = 0; k < ps[t].size(); ++k) {
          const double keep = ps[t][k];
          ps[t][k] = keep + 1e-6;
          const double up = weighted_states(enc, inputs, weights);
          ps[t][k] = keep - 1e-6;
          const double dn = weighted_states(enc, inputs, weights);
          ps[t][k] = keep;
          const double fd = (up - dn) / 2e-6;
          CHECK(std::abs(gs[t][k] - fd) <= 1e-7 * std::max(1.0, std::abs(fd)));
        }
      }
    }
  }
}

TEST_CASE("backward is deterministic") {
  Rng rng(9);
  Encoder enc = make_encoder(CellType::Lstm, 4);
  init_uniform(enc, rng);
  const std::vector<double> inputs{0.1, -0.4, 2.0};
  const std::vector<double> d(12, 0.25);
  const auto tr = encode(enc, inputs);
  Encoder g1 = make_encoder(CellType::Lstm, 4);
  Encoder g2 = make_encoder(CellType::Lstm, 4);
  encode_backward(enc, tr, d, g1);
  encode_backward(enc, tr, d, g2);
  CHECK(std::get<LstmWeights>(g1).W == std::get<LstmWeights>(g2).W);
  CHECK(std::get<LstmWeights>(g1).h0 == std::get<LstmWeights>(g2).h0);
}

TEST_CASE("init_uniform bounds") {
  Rng rng(2);
  Encoder enc = make_encoder(CellType::Rnn, 16);
  init_uniform(enc, rng);
  const auto& w = std::get<RnnWeights>(enc);
  for (double x : w.W) CHECK(std::abs(x) <= 0.25);
  for (double x : w.h0) CHECK(x == 0.0);
  auto head = HeadWeights::zeros(6, 16);
  init_uniform(head, rng);
  for (double x : head.A) CHECK(std::abs(x) <= 0.25);
}

TEST_CASE("adam_step") {
  SUBCASE("zero gradient and zero decay leave parameters unchanged") {
    AdamState st;
    st.config.weight_decay = 0.0;
    std::vector<double> p{1.0, -2.0};
    const std::vector<double> g{0.0, 0.0};
    const std::span<double> ps[] = {std::span<double>(p)};
    const std::span<const double> gs[] = {std::span<const double>(g)};
    for (int i = 0; i < 10; ++i) adam_step(st, ps, gs);
    CHECK(p == std::vector<double>{1.0, -2.0});
  }
  SUBCASE("first step with unit gradient") {
    AdamState st;
    st.config.weight_decay = 0.0;
    std::vector<double> p{0.0};
    const std::vector<double> g{1.0};
    const std::span<double> ps[] = {std::span<double>(p)};
    const std::span<const double> gs[] = {std::span<const double>(g)};
    adam_step(st, ps, gs);
    // m_hat = 1, v_hat = 1: step = -lr / (1 + eps)
    CHECK(p[0] == doctest::Approx(-0.001 / (1.0 + 1e-8)).epsilon(1e-14));
    CHECK(st.step == 1);
  }
  SUBCASE("constant gradient moves by lr * sign(g)") {
    AdamState st;
    st.config.weight_decay = 0.0;
    std::vector<double> p{0.0, 0.0};
    const std::vector<double> g{3.0, -0.02};
    const std::span<double> ps[] = {std::span<double>(p)};
    const std::span<const double> gs[] = {std::span<const double>(g)};
    for (int i = 0; i < 500; ++i) adam_step(st, ps, gs);
    const double before0 = p[0], before1 = p[1];
    adam_step(st, ps, gs);
    CHECK(p[0] - before0 == doctest::Approx(-0.001).epsilon(1e-4));
    CHECK(p[1] - before1 == doctest::Approx(0.001).epsilon(1e-4));
  }
  SUBCASE("weight decay alone shrinks the norm monotonically") {
    AdamState st;
    st.config.weight_decay = 0.1;
    std::vector<double> p{1.0, -0.5, 2.0};
    const std::vector<double> g{0.0, 0.0, 0.0};
    const std::span<double> ps[] = {std::span<double>(p)};
    const std::span<const double> gs[] = {std::span<const double>(g)};
    double norm = std::hypot(p[0], p[1], p[2]);
    for (int i = 0; i < 200; ++i) {
      adam_step(st, ps, gs);
      const double next = std::hypot(p[0], p[1], p[2]);
      CHECK(next < norm);
      norm = next;
    }
  }
  SUBCASE("shape mismatch") {
    AdamState st;
    std::vector<double> p{0.0, 0.0};
    std::vector<double> q{0.0};
    const std::vector<double> g{1.0};
    const std::span<double> ps[] = {std::span<double>(p)};
    const std::span<const double> gs[] = {std::span<const double>(g)};
    CHECK_THROWS_AS(adam_step(st, ps, gs), ShapeError);
    const std::span<double> qs[] = {std::span<double>(q)};
    adam_step(st, qs, gs);
    CHECK_THROWS_AS(adam_step(st, ps, gs), ShapeError);
  }
}
