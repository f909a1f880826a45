#pragma once

#include "unipoint/events.hpp"
#include "unipoint/nn.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace unipoint {

/// Recurrent baseline with lambda(tau) = exp(v_out . h_i + w tau + b_out) on interval i.
/// The exponent is capped at kExpClamp; the compensator is integrated in closed form.
struct RmtppModel {
  Encoder encoder;
  std::vector<double> v_out;
  double w = 0.0;
  double b_out = 0.0;
  NormStats norm;

  static RmtppModel create(std::size_t hidden, const NormStats& norm, std::uint64_t seed);

  [[nodiscard]] std::size_t hidden() const { return hidden_size(encoder); }
  [[nodiscard]] std::size_t parameter_count() const;

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    visit_encoder(self.encoder, [&](std::string_view name, const Shape& shape, auto values) {
      f("rnn." + std::string(name), shape, values);
    });
    f(std::string("out.v"), Shape{self.v_out.size()}, std::span(self.v_out));
    f(std::string("out.w"), Shape{1}, std::span(&self.w, 1));
    f(std::string("out.b"), Shape{1}, std::span(&self.b_out, 1));
  }
};

[[nodiscard]] RmtppModel zeros_like(const RmtppModel& model);

/// exp(min(v_out . h + w tau + b_out, kExpClamp)), tau in raw time units.
[[nodiscard]] double rmtpp_intensity(const RmtppModel& model, std::span<const double> h, double tau);

/// Integral of exp(min(c + w s, kExpClamp)) over s in [0, length], with its partial derivatives.
struct ExpAffineIntegral {
  double value = 0.0;
  double dc = 0.0;
  double dw = 0.0;
};
[[nodiscard]] ExpAffineIntegral clamped_exp_integral(double c, double w, double length);

/// Exact per-sequence NLL (evaluation time units).
[[nodiscard]] double nll(const RmtppModel& model, const EventSequence& seq);

/// Interval offsets c_i = v_out . h_i + b_out, one per interval (N + 1).
[[nodiscard]] std::vector<double> rmtpp_offsets(const RmtppModel& model, const EventSequence& seq);

class RmtppTape {
public:
  [[nodiscard]] double loss() const { return loss_; }
  [[nodiscard]] bool consumed() const { return consumed_; }

private:
  friend RmtppTape forward(const RmtppModel&, std::span<const EventSequence>);
  friend RmtppModel backward(RmtppTape&);

  struct Record {
    EncoderTrace trace;
    std::vector<double> offsets;
    std::vector<double> lengths;
    std::size_t events = 0;
  };
  const RmtppModel* model_ = nullptr;
  std::vector<Record> records_;
  double loss_ = 0.0;
  bool consumed_ = false;
};

[[nodiscard]] RmtppTape forward(const RmtppModel& model, std::span<const EventSequence> batch);
[[nodiscard]] RmtppModel backward(RmtppTape& tape);

} // namespace unipoint
