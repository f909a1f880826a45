#include "unipoint/metrics.hpp"

#include "unipoint/error.hpp"
#include "unipoint/rng.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <exception>
#include <mutex>
#include <numbers>
#include <thread>

namespace unipoint {

namespace {

/// Index of the interval containing t: the first event at or after t (N for the tail).
std::size_t interval_of(std::span<const double> times, double t) {
  return static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), t) - times.begin());
}

double interval_start(std::span<const double> times, std::size_t i) { return i == 0 ? 0.0 : times[i - 1]; }

void check_output(std::span<const double> ts, std::span<double> out) {
  if (ts.size() != out.size()) throw ShapeError("intensity_at_times: output size mismatch");
}

} // namespace

// ---- ConstantRateModel

ConstantRateModel::ConstantRateModel(double rate) : rate_(rate) {
  if (!(rate > 0.0) || !std::isfinite(rate)) throw PreconditionError("constant rate must be positive and finite");
}

ConstantRateModel ConstantRateModel::fit(std::span<const EventSequence> data) {
  double events = 0.0;
  double time = 0.0;
  for (const auto& s : data) {
    events += static_cast<double>(s.size());
    time += s.t_end();
  }
  if (events == 0.0) throw PreconditionError("constant rate fit needs at least one event");
  return ConstantRateModel(events / time);
}

double ConstantRateModel::log_likelihood(const EventSequence& seq, std::size_t, Rng&) const {
  return static_cast<double>(seq.size()) * std::log(rate_) - rate_ * seq.t_end();
}

void ConstantRateModel::intensity_at_times(const EventSequence&, std::span<const double> ts,
                                           std::span<double> out) const {
  check_output(ts, out);
  std::fill(out.begin(), out.end(), rate_);
}

// ---- ParametricModel

double ParametricModel::log_likelihood(const EventSequence& seq, std::size_t mc_samples, Rng& rng) const {
  if (force_mc_) return mc_log_likelihood(*this, seq, mc_samples, rng);
  return unipoint::log_likelihood(proc_, seq);
}

void ParametricModel::intensity_at_times(const EventSequence& seq, std::span<const double> ts,
                                         std::span<double> out) const {
  check_output(ts, out);
  const auto times = seq.times();
  for (std::size_t k = 0; k < ts.size(); ++k) {
    out[k] = intensity(proc_, times.first(interval_of(times, ts[k])), ts[k]);
  }
}

// ---- UniPointAdapter

double UniPointAdapter::log_likelihood(const EventSequence& seq, std::size_t mc_samples, Rng& rng) const {
  return -(nll(*model_, seq, mc_samples, rng) + nll_jacobian(model_->norm, seq));
}

void UniPointAdapter::intensity_at_times(const EventSequence& seq, std::span<const double> ts,
                                         std::span<double> out) const {
  check_output(ts, out);
  const auto params = forward_params(*model_, seq);
  const auto times = seq.times();
  const double scale = model_->norm.eval_scale();
  // runs of points in the same interval share one batched basis evaluation
  std::vector<double> x;
  for (std::size_t k = 0; k < ts.size();) {
    const std::size_t i = interval_of(times, ts[k]);
    const double start = interval_start(times, i);
    const double stop = i < times.size() ? times[i] : std::numeric_limits<double>::infinity();
    x.clear();
    std::size_t end = k;
    while (end < ts.size() && ts[end] > start && ts[end] <= stop) x.push_back(model_->norm.eval_time(ts[end++] - start));
    if (end == k) x.push_back(model_->norm.eval_time(ts[end++] - start));
    mixed_sum_many(model_->basis, params.interval(i), x, out.subspan(k, end - k));
    for (std::size_t m = k; m < end; ++m) out[m] = scale * transfer_eval(model_->transfer, out[m]);
    k = end;
  }
}

// ---- RmtppAdapter

double RmtppAdapter::log_likelihood(const EventSequence& seq, std::size_t, Rng&) const {
  return -(nll(*model_, seq) + nll_jacobian(model_->norm, seq));
}

void RmtppAdapter::intensity_at_times(const EventSequence& seq, std::span<const double> ts,
                                      std::span<double> out) const {
  check_output(ts, out);
  const auto trace = encode(model_->encoder, encoder_inputs(model_->norm, seq));
  const auto times = seq.times();
  const double scale = model_->norm.eval_scale();
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const std::size_t i = interval_of(times, ts[k]);
    out[k] = scale * rmtpp_intensity(*model_, trace.state(i + 1), ts[k] - interval_start(times, i));
  }
}

// ---- scoring

namespace {

/// `per_interval` sorted uniform draws on every non-empty interval, concatenated (so globally sorted),
/// with the matching interval lengths.
struct StratifiedDraws {
  std::vector<double> ts;
  std::vector<double> lengths;
};

StratifiedDraws stratified_draws(const EventSequence& seq, std::size_t per_interval, Rng& rng) {
  const auto times = seq.times();
  StratifiedDraws d;
  d.ts.reserve((times.size() + 1) * per_interval);
  for (std::size_t i = 0; i <= times.size(); ++i) {
    const double lo = interval_start(times, i);
    const double hi = i < times.size() ? times[i] : seq.t_end();
    const double len = hi - lo;
    if (len <= 0.0) continue;
    const auto first = d.ts.size();
    for (std::size_t s = 0; s < per_interval; ++s) d.ts.push_back(lo + len * rng.uniform_pos());
    std::sort(d.ts.begin() + static_cast<std::ptrdiff_t>(first), d.ts.end());
    d.lengths.push_back(len);
  }
  return d;
}

} // namespace

double mc_log_likelihood(const IntensityModel& model, const EventSequence& seq, std::size_t mc_samples, Rng& rng) {
  if (mc_samples == 0) throw PreconditionError("mc_samples must be >= 1");
  const auto times = seq.times();
  std::vector<double> at_events(times.size());
  model.intensity_at_times(seq, times, at_events);
  double ll = 0.0;
  for (double v : at_events) ll += std::log(v);

  const auto draws = stratified_draws(seq, mc_samples, rng);
  std::vector<double> vals(draws.ts.size());
  model.intensity_at_times(seq, draws.ts, vals);
  for (std::size_t i = 0; i < draws.lengths.size(); ++i) {
    double acc = 0.0;
    for (std::size_t s = 0; s < mc_samples; ++s) acc += vals[i * mc_samples + s];
    ll -= draws.lengths[i] * acc / static_cast<double>(mc_samples);
  }
  return ll;
}

MeanCi mean_ci95(std::span<const double> values) {
  MeanCi r;
  const std::size_t n = values.size();
  if (n == 0) return r;
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = values[i] - mean;
    mean += d / static_cast<double>(i + 1);
    m2 += d * (values[i] - mean);
  }
  r.mean = mean;
  if (n >= 2) r.ci95 = 1.96 * std::sqrt(m2 / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
  return r;
}

EvalReport holdout_ll(const IntensityModel& model, std::span<const EventSequence> test, std::size_t mc_samples,
                      std::uint64_t seed, std::string dataset, std::size_t jobs) {
  EvalReport rep;
  rep.model = model.name();
  rep.dataset = std::move(dataset);
  rep.seed = seed;
  rep.mc_samples = model.has_analytic_compensator() ? 0 : mc_samples;
  rep.ll.resize(test.size());
  rep.ll_per_event.resize(test.size());

  const auto score = [&](std::size_t i) {
    Rng rng(stream_seed(seed, i));
    const double ll = model.log_likelihood(test[i], mc_samples, rng);
    rep.ll[i] = ll;
    rep.ll_per_event[i] = test[i].empty() ? 0.0 : ll / static_cast<double>(test[i].size());
  };

  const std::size_t workers = std::min(std::max<std::size_t>(jobs, 1), test.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < test.size(); ++i) score(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < test.size(); i = next++) {
          try {
            score(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  const auto a = mean_ci95(rep.ll);
  const auto b = mean_ci95(rep.ll_per_event);
  rep.mean = a.mean;
  rep.ci95 = a.ci95;
  rep.mean_per_event = b.mean;
  rep.ci95_per_event = b.ci95;
  return rep;
}

double total_variation(const IntensityModel& a, const IntensityModel& b, const EventSequence& seq, std::size_t n_mc,
                       Rng& rng) {
  if (n_mc == 0) throw PreconditionError("total_variation needs n_mc >= 1");
  const auto draws = stratified_draws(seq, n_mc, rng);
  std::vector<double> va(draws.ts.size());
  std::vector<double> vb(draws.ts.size());
  a.intensity_at_times(seq, draws.ts, va);
  b.intensity_at_times(seq, draws.ts, vb);
  double tv = 0.0;
  for (std::size_t i = 0; i < draws.lengths.size(); ++i) {
    double acc = 0.0;
    for (std::size_t k = i * n_mc; k < (i + 1) * n_mc; ++k) acc += (va[k] - vb[k]) * (va[k] - vb[k]);
    tv += draws.lengths[i] * acc / static_cast<double>(n_mc);
  }
  return tv;
}

double total_variation(const ParametricProcess& truth, const IntensityModel& approx, const EventSequence& seq,
                       std::size_t n_mc, Rng& rng) {
  return total_variation(ParametricModel(truth), approx, seq, n_mc, rng);
}

TTestResult paired_ttest(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw PreconditionError("paired_ttest: samples are not aligned");
  if (a.size() < 2) throw PreconditionError("paired_ttest needs at least two pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const std::size_t n = d.size();
  double mean = 0.0;
  for (double x : d) mean += x;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));

  TTestResult r;
  r.df = n - 1;
  double scale = 0.0;
  for (double x : d) scale = std::max(scale, std::abs(x));
  if (sd <= 1e-12 * std::max(scale, 1e-300) || scale == 0.0) {
    r.degenerate = true;
    if (scale == 0.0) {
      r.t = 0.0;
      r.p_value = 1.0;
    } else {
      r.t = std::copysign(std::numeric_limits<double>::infinity(), mean);
      r.p_value = 0.0;
    }
    return r;
  }
  r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  const boost::math::students_t dist(static_cast<double>(r.df));
  r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

TTestResult paired_ttest(const EvalReport& a, const EvalReport& b) {
  if (a.dataset != b.dataset) {
    throw PreconditionError("paired_ttest: reports cover different datasets ('" + a.dataset + "' vs '" +
                            b.dataset + "')");
  }
  return paired_ttest(a.ll, b.ll);
}

double kolmogorov_survival(double x) {
  if (x <= 0.0) return 1.0;
  if (x < 1.18) {
    // Jacobi-theta form: 1 - sqrt(2 pi)/x * sum_k exp(-(2k-1)^2 pi^2 / (8 x^2))
    const double c = -std::numbers::pi * std::numbers::pi / (8.0 * x * x);
    double sum = 0.0;
    for (int k = 1; k <= 8; ++k) {
      const double m = 2.0 * k - 1.0;
      sum += std::exp(c * m * m);
    }
    return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / x * sum, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-300) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_test_exp1(std::span<const double> samples) {
  if (samples.empty()) throw PreconditionError("ks_test_exp1 needs at least one sample");
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double cdf = x[i] <= 0.0 ? 0.0 : -std::expm1(-x[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - cdf, cdf - static_cast<double>(i) / n});
  }
  const double sn = std::sqrt(n);
  KsResult r;
  r.statistic = d;
  r.p_value = kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d);
  return r;
}

} // namespace unipoint
