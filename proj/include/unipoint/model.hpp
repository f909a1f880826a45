#pragma once

#include "unipoint/basis.hpp"
#include "unipoint/events.hpp"
#include "unipoint/nn.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace unipoint {

class Rng;

/// RNN-parameterised sum of basis functions passed through a transfer function.
///
/// For an N-event sequence the encoder runs over N + 1 inputs: the standardised
/// start token tau_0 = 0 followed by the standardised interarrivals tau_1..tau_N.
/// Hidden state h_i parameterises the intensity on interval i, (t_{i-1}, t_i],
/// with the last interval covering (t_N, t_end].
struct UniPointModel {
  BasisSpec basis;
  TransferKind transfer = TransferKind::Softplus;
  Encoder encoder;
  HeadWeights head;
  NormStats norm;

  /// Randomly initialised model (fan-in uniform weights, zero start state).
  static UniPointModel create(const BasisSpec& basis, TransferKind transfer, CellType cell, std::size_t hidden,
                              const NormStats& norm, std::uint64_t seed);

  [[nodiscard]] std::size_t hidden() const { return hidden_size(encoder); }
  [[nodiscard]] std::size_t parameter_count() const;
  [[nodiscard]] std::string variant_name() const;

  /// Visits every learnable tensor as (name, shape, span).
  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    const std::string prefix = cell_type(self.encoder) == CellType::Rnn ? "rnn." : "lstm.";
    visit_encoder(self.encoder, [&](std::string_view name, const Shape& shape, auto values) {
      f(prefix + std::string(name), shape, values);
    });
    HeadWeights::visit(self.head, [&](std::string_view name, const Shape& shape, auto values) {
      f("head." + std::string(name), shape, values);
    });
  }
};

/// Same architecture with every parameter set to zero (used as a gradient accumulator).
[[nodiscard]] UniPointModel zeros_like(const UniPointModel& model);

/// Per-interval basis parameters: `intervals` rows of `width` = basis.param_count() entries.
struct SequenceParams {
  std::size_t intervals = 0;
  std::size_t width = 0;
  std::vector<double> values;

  [[nodiscard]] std::span<const double> interval(std::size_t i) const {
    return std::span<const double>(values).subspan(i * width, width);
  }
};

/// Standardised encoder inputs for a sequence: (0 - mean)/std followed by each interarrival.
[[nodiscard]] std::vector<double> encoder_inputs(const NormStats& norm, const EventSequence& seq);

/// Runs the encoder and the linear head; returns N + 1 parameter rows.
[[nodiscard]] SequenceParams forward_params(const UniPointModel& model, const EventSequence& seq);

/// Intensity on one interval at elapsed time tau (raw time units; rescaled internally when
/// normalize_eval_times is set). The value is in the model's evaluation time units.
[[nodiscard]] double intensity_at(const UniPointModel& model, std::span<const double> interval_params, double tau);

/// Per-sequence negative log-likelihood with an S-sample Monte Carlo compensator per interval.
/// Computed in evaluation time units (see nll_jacobian for the conversion to raw units).
[[nodiscard]] double nll(const UniPointModel& model, const EventSequence& seq, std::size_t mc_samples, Rng& rng);

/// Same NLL with a trapezoid-rule compensator on `grid_points` nodes per interval.
[[nodiscard]] double nll_trapezoid(const UniPointModel& model, const EventSequence& seq,
                                   std::size_t grid_points = 2049);

/// N * log(std_tau) when evaluation times are rescaled, else 0. Adding this to an NLL in
/// evaluation units gives the NLL in raw time units.
[[nodiscard]] double nll_jacobian(const NormStats& norm, const EventSequence& seq);

/// Recorded forward pass over a batch; consumed by exactly one call to `backward`.
class Tape {
public:
  [[nodiscard]] double loss() const { return loss_; }
  [[nodiscard]] std::size_t batch_size() const { return records_.size(); }
  [[nodiscard]] bool consumed() const { return consumed_; }

private:
  friend Tape forward(const UniPointModel&, std::span<const EventSequence>, std::size_t, Rng&);
  friend UniPointModel backward(Tape&);

  struct Record {
    EncoderTrace trace;
    SequenceParams params;
    std::vector<double> event_x;   ///< scaled elapsed time at each event
    std::vector<double> event_z;   ///< basis sum at each event
    std::vector<double> lengths;   ///< scaled interval lengths, N + 1
    std::vector<double> sample_x;  ///< (N + 1) x S sample points
    std::vector<double> sample_z;
  };

  const UniPointModel* model_ = nullptr;
  std::size_t mc_samples_ = 0;
  std::vector<Record> records_;
  double loss_ = 0.0;
  bool consumed_ = false;
};

/// Mean per-sequence NLL over `batch`, recording everything needed for the gradient.
/// The model must outlive the tape and stay unchanged until `backward`.
[[nodiscard]] Tape forward(const UniPointModel& model, std::span<const EventSequence> batch,
                           std::size_t mc_samples, Rng& rng);

/// Exact gradient of tape.loss() w.r.t. every parameter. Throws PreconditionError if the tape
/// was already consumed.
[[nodiscard]] UniPointModel backward(Tape& tape);

} // namespace unipoint
