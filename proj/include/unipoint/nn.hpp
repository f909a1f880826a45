#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace unipoint {

class Rng;

enum class CellType { Rnn, Lstm };

[[nodiscard]] std::string_view to_string(CellType cell);
[[nodiscard]] CellType parse_cell_type(std::string_view s);

using Shape = std::vector<std::size_t>;

/// Elman cell h_i = sigmoid(W h_{i-1} + v x_i + b) with a learnable start state h0.
struct RnnWeights {
  std::size_t hidden = 0;
  std::vector<double> W; ///< hidden x hidden, row-major
  std::vector<double> v;
  std::vector<double> b;
  std::vector<double> h0;

  static RnnWeights zeros(std::size_t hidden);

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    f("W", Shape{self.hidden, self.hidden}, std::span(self.W));
    f("v", Shape{self.hidden}, std::span(self.v));
    f("b", Shape{self.hidden}, std::span(self.b));
    f("h0", Shape{self.hidden}, std::span(self.h0));
  }
};

/// Standard LSTM cell. Gate rows are stacked as [input | forget | candidate | output].
/// The start hidden state h0 is learnable; the start cell state is zero.
struct LstmWeights {
  std::size_t hidden = 0;
  std::vector<double> W; ///< 4*hidden x hidden
  std::vector<double> v; ///< 4*hidden
  std::vector<double> b; ///< 4*hidden
  std::vector<double> h0;

  static LstmWeights zeros(std::size_t hidden);

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    f("W", Shape{4 * self.hidden, self.hidden}, std::span(self.W));
    f("v", Shape{4 * self.hidden}, std::span(self.v));
    f("b", Shape{4 * self.hidden}, std::span(self.b));
    f("h0", Shape{self.hidden}, std::span(self.h0));
  }
};

/// Linear map from hidden state to basis parameters: p = A h + B.
struct HeadWeights {
  std::size_t outputs = 0;
  std::size_t hidden = 0;
  std::vector<double> A; ///< outputs x hidden
  std::vector<double> B; ///< outputs

  static HeadWeights zeros(std::size_t outputs, std::size_t hidden);

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    f("A", Shape{self.outputs, self.hidden}, std::span(self.A));
    f("B", Shape{self.outputs}, std::span(self.B));
  }
};

[[nodiscard]] std::vector<double> rnn_step(const RnnWeights& w, std::span<const double> h_prev, double tau_hat);

struct LstmState {
  std::vector<double> h;
  std::vector<double> c;
};
[[nodiscard]] LstmState lstm_step(const LstmWeights& w, const LstmState& prev, double tau_hat);

/// Recurrent encoder: either cell type behind one interface.
using Encoder = std::variant<RnnWeights, LstmWeights>;

[[nodiscard]] Encoder make_encoder(CellType cell, std::size_t hidden);
[[nodiscard]] CellType cell_type(const Encoder& enc);
[[nodiscard]] std::size_t hidden_size(const Encoder& enc);

template <class EncoderRef, class F>
void visit_encoder(EncoderRef& enc, F&& f) {
  std::visit([&](auto& w) { std::decay_t<decltype(w)>::visit(w, f); }, enc);
}

/// Activations recorded by `encode` for reverse-mode differentiation.
struct EncoderTrace {
  std::size_t hidden = 0;
  std::size_t steps = 0;
  std::vector<double> inputs; ///< steps
  std::vector<double> h;      ///< (steps + 1) x hidden; row 0 is the start state
  std::vector<double> c;      ///< LSTM only: (steps + 1) x hidden
  std::vector<double> gates;  ///< LSTM only: steps x 4*hidden, post-activation

  /// Hidden state after step i (1-based; 0 is the start state).
  [[nodiscard]] std::span<const double> state(std::size_t i) const {
    return std::span<const double>(h).subspan(i * hidden, hidden);
  }
};

/// Runs the cell over `inputs`, producing one hidden state per input.
[[nodiscard]] EncoderTrace encode(const Encoder& enc, std::span<const double> inputs);

/// Backpropagates d_hidden (steps x hidden, gradient w.r.t. states 1..steps) into `grad`,
/// which must have the same alternative and shapes as `enc`.
void encode_backward(const Encoder& enc, const EncoderTrace& trace, std::span<const double> d_hidden,
                     Encoder& grad);

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for all weights except the start state (zeros).
void init_uniform(Encoder& enc, Rng& rng);
void init_uniform(HeadWeights& head, Rng& rng);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5; ///< coupled L2: added to the gradient before the moment updates
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

/// One Adam update over a list of parameter tensors. The first call fixes the tensor shapes;
/// later calls with different shapes throw ShapeError.
void adam_step(AdamState& state, std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads);

} // namespace unipoint
