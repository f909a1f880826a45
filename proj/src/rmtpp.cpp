#include "unipoint/rmtpp.hpp"

#include "unipoint/basis.hpp"
#include "unipoint/error.hpp"
#include "unipoint/model.hpp"
#include "unipoint/rng.hpp"

#include <algorithm>
#include <cmath>

namespace unipoint {

RmtppModel RmtppModel::create(std::size_t hidden, const NormStats& norm, std::uint64_t seed) {
  if (hidden == 0) throw ConfigError("hidden size must be positive");
  RmtppModel m{make_encoder(CellType::Rnn, hidden), std::vector<double>(hidden), 0.0, 0.0, norm};
  Rng rng(seed);
  init_uniform(m.encoder, rng);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (auto& x : m.v_out) x = rng.uniform(-bound, bound);
  m.w = rng.uniform(-bound, bound);
  m.b_out = rng.uniform(-bound, bound);
  return m;
}

std::size_t RmtppModel::parameter_count() const {
  std::size_t n = 0;
  visit(*this, [&](const std::string&, const Shape&, std::span<const double> v) { n += v.size(); });
  return n;
}

RmtppModel zeros_like(const RmtppModel& model) {
  return RmtppModel{make_encoder(cell_type(model.encoder), model.hidden()),
                    std::vector<double>(model.v_out.size()), 0.0, 0.0, model.norm};
}

double rmtpp_intensity(const RmtppModel& model, std::span<const double> h, double tau) {
  double c = model.b_out;
  for (std::size_t k = 0; k < h.size(); ++k) c += model.v_out[k] * h[k];
  return std::exp(std::min(c + model.w * model.norm.eval_time(tau), kExpClamp));
}

namespace {

/// expm1(x)/x
double exprel(double x) { return std::abs(x) < 1e-5 ? 1.0 + x / 2.0 + x * x / 6.0 : std::expm1(x) / x; }

/// integral_0^1 s e^{x s} ds = (x e^x - e^x + 1) / x^2
double exprel_moment(double x) {
  if (std::abs(x) < 1e-3) return 0.5 + x / 3.0 + x * x / 8.0 + x * x * x / 30.0;
  return (x * std::exp(x) - std::expm1(x)) / (x * x);
}

/// Unclamped integral of exp(c + w s) over [lo, hi].
ExpAffineIntegral exp_affine(double c, double w, double lo, double hi) {
  ExpAffineIntegral r;
  const double len = hi - lo;
  if (len <= 0.0) return r;
  const double base = std::exp(c + w * lo);
  r.value = base * len * exprel(w * len);
  r.dc = r.value;
  r.dw = lo * r.value + base * len * len * exprel_moment(w * len);
  return r;
}

} // namespace

ExpAffineIntegral clamped_exp_integral(double c, double w, double length) {
  if (length <= 0.0) return {};
  // Unclamped where c + w s < clamp: an interval [lo, hi] inside [0, length].
  double lo = 0.0;
  double hi = length;
  if (w == 0.0) {
    if (c >= kExpClamp) hi = 0.0;
  } else {
    const double cross = std::clamp((kExpClamp - c) / w, 0.0, length);
    if (w > 0.0) {
      hi = cross;
    } else {
      lo = cross;
    }
  }
  auto r = exp_affine(c, w, lo, hi);
  r.value += std::exp(kExpClamp) * (length - std::max(hi - lo, 0.0));
  return r;
}

std::vector<double> rmtpp_offsets(const RmtppModel& model, const EventSequence& seq) {
  const auto trace = encode(model.encoder, encoder_inputs(model.norm, seq));
  std::vector<double> c(trace.steps);
  for (std::size_t i = 0; i < trace.steps; ++i) {
    const auto h = trace.state(i + 1);
    double acc = model.b_out;
    for (std::size_t k = 0; k < h.size(); ++k) acc += model.v_out[k] * h[k];
    c[i] = acc;
  }
  return c;
}

namespace {

std::vector<double> lengths_of(const NormStats& norm, const EventSequence& seq) {
  std::vector<double> len;
  len.reserve(seq.size() + 1);
  for (std::size_t i = 0; i < seq.size(); ++i) len.push_back(norm.eval_time(seq.interarrival(i)));
  len.push_back(norm.eval_time(seq.tail()));
  return len;
}

double sequence_nll(double w, std::span<const double> offsets, std::span<const double> len, std::size_t events) {
  double total = 0.0;
  for (std::size_t i = 0; i < events; ++i) total -= std::min(offsets[i] + w * len[i], kExpClamp);
  for (std::size_t i = 0; i < offsets.size(); ++i) total += clamped_exp_integral(offsets[i], w, len[i]).value;
  return total;
}

} // namespace

double nll(const RmtppModel& model, const EventSequence& seq) {
  const auto c = rmtpp_offsets(model, seq);
  return sequence_nll(model.w, c, lengths_of(model.norm, seq), seq.size());
}

RmtppTape forward(const RmtppModel& model, std::span<const EventSequence> batch) {
  if (batch.empty()) throw PreconditionError("forward needs a non-empty batch");
  RmtppTape tape;
  tape.model_ = &model;
  double total = 0.0;
  for (const auto& seq : batch) {
    RmtppTape::Record rec;
    rec.trace = encode(model.encoder, encoder_inputs(model.norm, seq));
    rec.offsets.resize(rec.trace.steps);
    for (std::size_t i = 0; i < rec.trace.steps; ++i) {
      const auto h = rec.trace.state(i + 1);
      double acc = model.b_out;
      for (std::size_t k = 0; k < h.size(); ++k) acc += model.v_out[k] * h[k];
      rec.offsets[i] = acc;
    }
    rec.lengths = lengths_of(model.norm, seq);
    rec.events = seq.size();
    total += sequence_nll(model.w, rec.offsets, rec.lengths, rec.events);
    tape.records_.push_back(std::move(rec));
  }
  tape.loss_ = total / static_cast<double>(batch.size());
  return tape;
}

RmtppModel backward(RmtppTape& tape) {
  if (tape.consumed_) throw PreconditionError("tape already consumed by backward");
  if (tape.model_ == nullptr) throw PreconditionError("tape was not recorded");
  tape.consumed_ = true;
  const RmtppModel& model = *tape.model_;
  RmtppModel grad = zeros_like(model);
  const double weight = 1.0 / static_cast<double>(tape.records_.size());
  const std::size_t H = model.hidden();
  std::vector<double> dhidden;
  for (const auto& rec : tape.records_) {
    const std::size_t n_int = rec.offsets.size();
    dhidden.assign(n_int * H, 0.0);
    for (std::size_t i = 0; i < n_int; ++i) {
      double dc = 0.0;
      if (i < rec.events && rec.offsets[i] + model.w * rec.lengths[i] < kExpClamp) {
        dc -= 1.0;
        grad.w -= weight * rec.lengths[i];
      }
      const auto integral = clamped_exp_integral(rec.offsets[i], model.w, rec.lengths[i]);
      dc += integral.dc;
      grad.w += weight * integral.dw;
      dc *= weight;
      grad.b_out += dc;
      const auto h = rec.trace.state(i + 1);
      for (std::size_t k = 0; k < H; ++k) {
        grad.v_out[k] += dc * h[k];
        dhidden[i * H + k] = dc * model.v_out[k];
      }
    }
    encode_backward(model.encoder, rec.trace, dhidden, grad.encoder);
  }
  return grad;
}

} // namespace unipoint
