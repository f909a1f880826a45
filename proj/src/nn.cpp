#include "unipoint/nn.hpp"

#include "unipoint/basis.hpp"
#include "unipoint/error.hpp"
#include "unipoint/rng.hpp"

#include <cmath>

namespace unipoint {

std::string_view to_string(CellType cell) { return cell == CellType::Rnn ? "RNN" : "LSTM"; }

CellType parse_cell_type(std::string_view s) {
  if (s == "RNN" || s == "rnn") return CellType::Rnn;
  if (s == "LSTM" || s == "lstm") return CellType::Lstm;
  throw ConfigError("unknown cell type '" + std::string(s) + "'");
}

RnnWeights RnnWeights::zeros(std::size_t hidden) {
  return RnnWeights{hidden, std::vector<double>(hidden * hidden), std::vector<double>(hidden),
                    std::vector<double>(hidden), std::vector<double>(hidden)};
}

LstmWeights LstmWeights::zeros(std::size_t hidden) {
  return LstmWeights{hidden, std::vector<double>(4 * hidden * hidden), std::vector<double>(4 * hidden),
                     std::vector<double>(4 * hidden), std::vector<double>(hidden)};
}

HeadWeights HeadWeights::zeros(std::size_t outputs, std::size_t hidden) {
  return HeadWeights{outputs, hidden, std::vector<double>(outputs * hidden), std::vector<double>(outputs)};
}

namespace {

/// out = W x + v * input + b for a row-major rows x cols matrix.
void affine(std::span<const double> W, std::span<const double> v, std::span<const double> b,
            std::span<const double> x, double input, std::span<double> out) {
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < out.size(); ++r) {
    const double* row = W.data() + r * cols;
    double acc = b[r] + v[r] * input;
    for (std::size_t k = 0; k < cols; ++k) acc += row[k] * x[k];
    out[r] = acc;
  }
}

/// Accumulates the parameter gradients of `affine` and the gradient w.r.t. x.
void affine_backward(std::span<const double> W, std::span<const double> x, double input,
                     std::span<const double> dz, std::span<double> dW, std::span<double> dv,
                     std::span<double> db, std::span<double> dx) {
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < dz.size(); ++r) {
    const double g = dz[r];
    if (g == 0.0) continue;
    double* drow = dW.data() + r * cols;
    const double* row = W.data() + r * cols;
    for (std::size_t k = 0; k < cols; ++k) {
      drow[k] += g * x[k];
      dx[k] += g * row[k];
    }
    dv[r] += g * input;
    db[r] += g;
  }
}

void lstm_cell(const LstmWeights& w, std::span<const double> h_prev, std::span<const double> c_prev,
               double x, std::span<double> gates, std::span<double> h, std::span<double> c) {
  const std::size_t H = w.hidden;
  affine(w.W, w.v, w.b, h_prev, x, gates);
  for (std::size_t k = 0; k < H; ++k) {
    const double i = sigmoid(gates[k]);
    const double f = sigmoid(gates[H + k]);
    const double g = std::tanh(gates[2 * H + k]);
    const double o = sigmoid(gates[3 * H + k]);
    gates[k] = i;
    gates[H + k] = f;
    gates[2 * H + k] = g;
    gates[3 * H + k] = o;
    c[k] = f * c_prev[k] + i * g;
    h[k] = o * std::tanh(c[k]);
  }
}

} // namespace

std::vector<double> rnn_step(const RnnWeights& w, std::span<const double> h_prev, double tau_hat) {
  if (h_prev.size() != w.hidden) throw ShapeError("rnn_step: hidden state size mismatch");
  std::vector<double> h(w.hidden);
  affine(w.W, w.v, w.b, h_prev, tau_hat, h);
  for (auto& x : h) x = sigmoid(x);
  return h;
}

LstmState lstm_step(const LstmWeights& w, const LstmState& prev, double tau_hat) {
  if (prev.h.size() != w.hidden || prev.c.size() != w.hidden) throw ShapeError("lstm_step: state size mismatch");
  LstmState next{std::vector<double>(w.hidden), std::vector<double>(w.hidden)};
  std::vector<double> gates(4 * w.hidden);
  lstm_cell(w, prev.h, prev.c, tau_hat, gates, next.h, next.c);
  return next;
}

Encoder make_encoder(CellType cell, std::size_t hidden) {
  if (cell == CellType::Rnn) return RnnWeights::zeros(hidden);
  return LstmWeights::zeros(hidden);
}

CellType cell_type(const Encoder& enc) {
  return std::holds_alternative<RnnWeights>(enc) ? CellType::Rnn : CellType::Lstm;
}

std::size_t hidden_size(const Encoder& enc) {
  return std::visit([](const auto& w) { return w.hidden; }, enc);
}

EncoderTrace encode(const Encoder& enc, std::span<const double> inputs) {
  EncoderTrace tr;
  tr.hidden = hidden_size(enc);
  tr.steps = inputs.size();
  tr.inputs.assign(inputs.begin(), inputs.end());
  const std::size_t H = tr.hidden;
  tr.h.resize((tr.steps + 1) * H);
  std::span<double> hs(tr.h);

  if (const auto* rnn = std::get_if<RnnWeights>(&enc)) {
    std::copy(rnn->h0.begin(), rnn->h0.end(), tr.h.begin());
    for (std::size_t i = 0; i < tr.steps; ++i) {
      auto out = hs.subspan((i + 1) * H, H);
      affine(rnn->W, rnn->v, rnn->b, hs.subspan(i * H, H), inputs[i], out);
      for (auto& x : out) x = sigmoid(x);
    }
  } else {
    const auto& lstm = std::get<LstmWeights>(enc);
    std::copy(lstm.h0.begin(), lstm.h0.end(), tr.h.begin());
    tr.c.assign((tr.steps + 1) * H, 0.0);
    tr.gates.resize(tr.steps * 4 * H);
    std::span<double> cs(tr.c);
    std::span<double> gs(tr.gates);
    for (std::size_t i = 0; i < tr.steps; ++i) {
      lstm_cell(lstm, hs.subspan(i * H, H), cs.subspan(i * H, H), inputs[i], gs.subspan(i * 4 * H, 4 * H),
                hs.subspan((i + 1) * H, H), cs.subspan((i + 1) * H, H));
    }
  }
  return tr;
}

void encode_backward(const Encoder& enc, const EncoderTrace& tr, std::span<const double> d_hidden,
                     Encoder& grad) {
  const std::size_t H = tr.hidden;
  if (d_hidden.size() != tr.steps * H) throw ShapeError("encode_backward: gradient size mismatch");
  if (enc.index() != grad.index() || hidden_size(grad) != H) {
    throw ShapeError("encode_backward: gradient encoder does not match");
  }
  std::vector<double> dh(H, 0.0); // gradient flowing into the current state from later steps
  std::vector<double> dh_prev(H);
  std::span<const double> hs(tr.h);

  if (const auto* rnn = std::get_if<RnnWeights>(&enc)) {
    auto& g = std::get<RnnWeights>(grad);
    std::vector<double> da(H);
    for (std::size_t i = tr.steps; i-- > 0;) {
      const auto h = hs.subspan((i + 1) * H, H);
      for (std::size_t k = 0; k < H; ++k) {
        const double total = dh[k] + d_hidden[i * H + k];
        da[k] = total * h[k] * (1.0 - h[k]);
      }
      std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
      affine_backward(rnn->W, hs.subspan(i * H, H), tr.inputs[i], da, g.W, g.v, g.b, dh_prev);
      dh.swap(dh_prev);
    }
    for (std::size_t k = 0; k < H; ++k) g.h0[k] += dh[k];
    return;
  }

  const auto& lstm = std::get<LstmWeights>(enc);
  auto& g = std::get<LstmWeights>(grad);
  std::span<const double> cs(tr.c);
  std::span<const double> gs(tr.gates);
  std::vector<double> dc(H, 0.0);
  std::vector<double> dz(4 * H);
  for (std::size_t i = tr.steps; i-- > 0;) {
    const auto c = cs.subspan((i + 1) * H, H);
    const auto c_prev = cs.subspan(i * H, H);
    const auto gate = gs.subspan(i * 4 * H, 4 * H);
    for (std::size_t k = 0; k < H; ++k) {
      const double in = gate[k], f = gate[H + k], cand = gate[2 * H + k], o = gate[3 * H + k];
      const double tc = std::tanh(c[k]);
      const double dhk = dh[k] + d_hidden[i * H + k];
      const double dct = dc[k] + dhk * o * (1.0 - tc * tc);
      dz[k] = dct * cand * in * (1.0 - in);
      dz[H + k] = dct * c_prev[k] * f * (1.0 - f);
      dz[2 * H + k] = dct * in * (1.0 - cand * cand);
      dz[3 * H + k] = dhk * tc * o * (1.0 - o);
      dc[k] = dct * f;
    }
    std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
    affine_backward(lstm.W, hs.subspan(i * H, H), tr.inputs[i], dz, g.W, g.v, g.b, dh_prev);
    dh.swap(dh_prev);
  }
  for (std::size_t k = 0; k < H; ++k) g.h0[k] += dh[k];
}

void init_uniform(Encoder& enc, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_size(enc)));
  visit_encoder(enc, [&](std::string_view name, const Shape&, std::span<double> values) {
    for (auto& x : values) x = name == "h0" ? 0.0 : rng.uniform(-bound, bound);
  });
}

void init_uniform(HeadWeights& head, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(head.hidden));
  for (auto& x : head.A) x = rng.uniform(-bound, bound);
  for (auto& x : head.B) x = rng.uniform(-bound, bound);
}

void adam_step(AdamState& state, std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: params/grads count mismatch");
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (params[t].size() != grads[t].size()) throw ShapeError("adam_step: tensor shape mismatch");
  }
  if (state.m.empty() && state.step == 0) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: tensor count changed");
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (params[t].size() != state.m[t].size()) throw ShapeError("adam_step: tensor shape mismatch");
  }
  const auto& cfg = state.config;
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto p = params[t];
    const auto g = grads[t];
    auto& m = state.m[t];
    auto& v = state.v[t];
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = g[k] + cfg.weight_decay * p[k];
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gk;
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gk * gk;
      p[k] -= cfg.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.eps);
    }
  }
}

} // namespace unipoint
