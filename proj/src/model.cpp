#include "unipoint/model.hpp"

#include "unipoint/error.hpp"
#include "unipoint/rng.hpp"

#include <cmath>

namespace unipoint {

UniPointModel UniPointModel::create(const BasisSpec& basis, TransferKind transfer, CellType cell,
                                    std::size_t hidden, const NormStats& norm, std::uint64_t seed) {
  if (hidden == 0) throw ConfigError("hidden size must be positive");
  if (basis.terms() == 0) throw ConfigError("basis spec has no terms");
  UniPointModel m{basis, transfer, make_encoder(cell, hidden), HeadWeights::zeros(basis.param_count(), hidden),
                  norm};
  Rng rng(seed);
  init_uniform(m.encoder, rng);
  init_uniform(m.head, rng);
  return m;
}

std::size_t UniPointModel::parameter_count() const {
  std::size_t n = 0;
  visit(*this, [&](const std::string&, const Shape&, std::span<const double> v) { n += v.size(); });
  return n;
}

std::string UniPointModel::variant_name() const {
  std::string name = basis.to_string();
  name += "/";
  name += to_string(transfer);
  if (cell_type(encoder) == CellType::Lstm) name += "/LSTM";
  return name;
}

UniPointModel zeros_like(const UniPointModel& model) {
  UniPointModel g{model.basis, model.transfer, make_encoder(cell_type(model.encoder), model.hidden()),
                  HeadWeights::zeros(model.head.outputs, model.head.hidden), model.norm};
  return g;
}

std::vector<double> encoder_inputs(const NormStats& norm, const EventSequence& seq) {
  std::vector<double> x;
  x.reserve(seq.size() + 1);
  x.push_back(norm.standardize(0.0));
  for (std::size_t i = 0; i < seq.size(); ++i) x.push_back(norm.standardize(seq.interarrival(i)));
  return x;
}

namespace {

SequenceParams head_forward(const HeadWeights& head, const EncoderTrace& trace) {
  SequenceParams p;
  p.intervals = trace.steps;
  p.width = head.outputs;
  p.values.resize(p.intervals * p.width);
  const std::size_t H = head.hidden;
  for (std::size_t i = 0; i < p.intervals; ++i) {
    const auto h = trace.state(i + 1);
    double* out = p.values.data() + i * p.width;
    for (std::size_t r = 0; r < p.width; ++r) {
      const double* row = head.A.data() + r * H;
      double acc = head.B[r];
      for (std::size_t k = 0; k < H; ++k) acc += row[k] * h[k];
      out[r] = acc;
    }
  }
  return p;
}

/// Interval lengths in evaluation units; N + 1 entries, the last one the tail (t_N, t_end].
std::vector<double> scaled_lengths(const NormStats& norm, const EventSequence& seq) {
  std::vector<double> len;
  len.reserve(seq.size() + 1);
  for (std::size_t i = 0; i < seq.size(); ++i) len.push_back(norm.eval_time(seq.interarrival(i)));
  len.push_back(norm.eval_time(seq.tail()));
  return len;
}

struct SequenceEval {
  EncoderTrace trace;
  SequenceParams params;
};

SequenceEval run_encoder(const UniPointModel& model, const EventSequence& seq) {
  if (model.head.outputs != model.basis.param_count()) {
    throw ShapeError("head output size does not match the basis parameter count");
  }
  SequenceEval ev;
  ev.trace = encode(model.encoder, encoder_inputs(model.norm, seq));
  ev.params = head_forward(model.head, ev.trace);
  return ev;
}

} // namespace

SequenceParams forward_params(const UniPointModel& model, const EventSequence& seq) {
  return run_encoder(model, seq).params;
}

double intensity_at(const UniPointModel& model, std::span<const double> interval_params, double tau) {
  return transfer_eval(model.transfer, mixed_sum(model.basis, interval_params, model.norm.eval_time(tau)));
}

double nll_jacobian(const NormStats& norm, const EventSequence& seq) {
  return norm.normalize_eval_times ? static_cast<double>(seq.size()) * std::log(norm.std_tau) : 0.0;
}

double nll(const UniPointModel& model, const EventSequence& seq, std::size_t mc_samples, Rng& rng) {
  if (mc_samples == 0) throw PreconditionError("mc_samples must be >= 1");
  const auto ev = run_encoder(model, seq);
  const auto len = scaled_lengths(model.norm, seq);
  double total = 0.0;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    total -= log_transfer(model.transfer, mixed_sum(model.basis, ev.params.interval(i), len[i]));
  }
  std::vector<double> u(mc_samples), z(mc_samples);
  for (std::size_t i = 0; i < len.size(); ++i) {
    for (auto& x : u) x = len[i] * rng.uniform_pos();
    mixed_sum_many(model.basis, ev.params.interval(i), u, z);
    double acc = 0.0;
    for (double zs : z) acc += transfer_eval(model.transfer, zs);
    total += len[i] * acc / static_cast<double>(mc_samples);
  }
  return total;
}

double nll_trapezoid(const UniPointModel& model, const EventSequence& seq, std::size_t grid_points) {
  if (grid_points < 2) throw PreconditionError("trapezoid rule needs at least 2 grid points");
  const auto ev = run_encoder(model, seq);
  const auto len = scaled_lengths(model.norm, seq);
  double total = 0.0;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    total -= log_transfer(model.transfer, mixed_sum(model.basis, ev.params.interval(i), len[i]));
  }
  for (std::size_t i = 0; i < len.size(); ++i) {
    if (len[i] == 0.0) continue;
    const double h = len[i] / static_cast<double>(grid_points - 1);
    double acc = 0.0;
    for (std::size_t g = 0; g < grid_points; ++g) {
      const double w = (g == 0 || g + 1 == grid_points) ? 0.5 : 1.0;
      acc += w * transfer_eval(model.transfer, mixed_sum(model.basis, ev.params.interval(i), h * static_cast<double>(g)));
    }
    total += h * acc;
  }
  return total;
}

Tape forward(const UniPointModel& model, std::span<const EventSequence> batch, std::size_t mc_samples, Rng& rng) {
  if (mc_samples == 0) throw PreconditionError("mc_samples must be >= 1");
  if (batch.empty()) throw PreconditionError("forward needs a non-empty batch");
  Tape tape;
  tape.model_ = &model;
  tape.mc_samples_ = mc_samples;
  tape.records_.reserve(batch.size());
  double total = 0.0;
  for (const auto& seq : batch) {
    auto ev = run_encoder(model, seq);
    Tape::Record rec;
    rec.trace = std::move(ev.trace);
    rec.params = std::move(ev.params);
    rec.lengths = scaled_lengths(model.norm, seq);
    double nll_seq = 0.0;
    rec.event_x.resize(seq.size());
    rec.event_z.resize(seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i) {
      const double x = rec.lengths[i];
      const double z = mixed_sum(model.basis, rec.params.interval(i), x);
      rec.event_x[i] = x;
      rec.event_z[i] = z;
      nll_seq -= log_transfer(model.transfer, z);
    }
    const std::size_t S = mc_samples;
    rec.sample_x.resize(rec.lengths.size() * S);
    rec.sample_z.resize(rec.lengths.size() * S);
    for (std::size_t i = 0; i < rec.lengths.size(); ++i) {
      double acc = 0.0;
      for (std::size_t s = 0; s < S; ++s) {
        const double u = rec.lengths[i] * rng.uniform_pos();
        const double z = mixed_sum(model.basis, rec.params.interval(i), u);
        rec.sample_x[i * S + s] = u;
        rec.sample_z[i * S + s] = z;
        acc += transfer_eval(model.transfer, z);
      }
      nll_seq += rec.lengths[i] * acc / static_cast<double>(S);
    }
    total += nll_seq;
    tape.records_.push_back(std::move(rec));
  }
  tape.loss_ = total / static_cast<double>(batch.size());
  return tape;
}

UniPointModel backward(Tape& tape) {
  if (tape.consumed_) throw PreconditionError("tape already consumed by backward");
  if (tape.model_ == nullptr) throw PreconditionError("tape was not recorded");
  tape.consumed_ = true;
  const UniPointModel& model = *tape.model_;
  UniPointModel grad = zeros_like(model);
  const double weight = 1.0 / static_cast<double>(tape.records_.size());
  const std::size_t S = tape.mc_samples_;
  const std::size_t P = model.head.outputs;
  const std::size_t H = model.head.hidden;

  std::vector<double> dparams;
  std::vector<double> dhidden;
  for (const auto& rec : tape.records_) {
    const std::size_t n_int = rec.params.intervals;
    dparams.assign(n_int * P, 0.0);
    std::span<double> dp(dparams);
    for (std::size_t i = 0; i < rec.event_x.size(); ++i) {
      const double z = rec.event_z[i];
      const double scale = -weight * log_transfer_grad(model.transfer, z);
      mixed_sum_backward(model.basis, rec.params.interval(i), rec.event_x[i], scale, dp.subspan(i * P, P));
    }
    for (std::size_t i = 0; i < n_int; ++i) {
      const double w = weight * rec.lengths[i] / static_cast<double>(S);
      if (w == 0.0) continue;
      for (std::size_t s = 0; s < S; ++s) {
        const double scale = w * transfer_grad(model.transfer, rec.sample_z[i * S + s]);
        mixed_sum_backward(model.basis, rec.params.interval(i), rec.sample_x[i * S + s], scale, dp.subspan(i * P, P));
      }
    }
    // Head: p_i = A h_i + B
    dhidden.assign(n_int * H, 0.0);
    for (std::size_t i = 0; i < n_int; ++i) {
      const auto h = rec.trace.state(i + 1);
      double* dh = dhidden.data() + i * H;
      for (std::size_t r = 0; r < P; ++r) {
        const double g = dparams[i * P + r];
        if (g == 0.0) continue;
        grad.head.B[r] += g;
        double* dA = grad.head.A.data() + r * H;
        const double* A = model.head.A.data() + r * H;
        for (std::size_t k = 0; k < H; ++k) {
          dA[k] += g * h[k];
          dh[k] += g * A[k];
        }
      }
    }
    encode_backward(model.encoder, rec.trace, dhidden, grad.encoder);
  }
  return grad;
}

} // namespace unipoint
