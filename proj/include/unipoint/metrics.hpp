#pragma once

#include "unipoint/events.hpp"
#include "unipoint/model.hpp"
#include "unipoint/processes.hpp"
#include "unipoint/rmtpp.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace unipoint {

class Rng;

/// Anything that can score a sequence. All quantities are in raw time units.
class IntensityModel {
public:
  virtual ~IntensityModel() = default;

  [[nodiscard]] virtual std::string name() const = 0;
  [[nodiscard]] virtual bool has_analytic_compensator() const = 0;

  /// Log-likelihood of one sequence. `rng` and `mc_samples` are used only by MC compensators.
  [[nodiscard]] virtual double log_likelihood(const EventSequence& seq, std::size_t mc_samples, Rng& rng) const = 0;

  /// Intensity at each time in `ts` (sorted, within (0, t_end]) conditioned on the events of
  /// `seq` strictly before it.
  virtual void intensity_at_times(const EventSequence& seq, std::span<const double> ts,
                                  std::span<double> out) const = 0;
};

/// Homogeneous Poisson process.
class ConstantRateModel final : public IntensityModel {
public:
  explicit ConstantRateModel(double rate);
  /// Rate maximising the likelihood of `data`: total events / total observed time.
  static ConstantRateModel fit(std::span<const EventSequence> data);

  [[nodiscard]] double rate() const { return rate_; }
  [[nodiscard]] std::string name() const override { return "POISSON"; }
  [[nodiscard]] bool has_analytic_compensator() const override { return true; }
  [[nodiscard]] double log_likelihood(const EventSequence& seq, std::size_t, Rng&) const override;
  void intensity_at_times(const EventSequence& seq, std::span<const double> ts, std::span<double> out) const override;

private:
  double rate_;
};

class ParametricModel final : public IntensityModel {
public:
  /// With `force_mc` the compensator is estimated by Monte Carlo instead of its closed form.
  explicit ParametricModel(ParametricProcess proc, bool force_mc = false)
      : proc_(std::move(proc)), force_mc_(force_mc) {}

  [[nodiscard]] const ParametricProcess& process() const { return proc_; }
  [[nodiscard]] std::string name() const override { return proc_.name(); }
  [[nodiscard]] bool has_analytic_compensator() const override { return !force_mc_; }
  [[nodiscard]] double log_likelihood(const EventSequence& seq, std::size_t mc_samples, Rng& rng) const override;
  void intensity_at_times(const EventSequence& seq, std::span<const double> ts, std::span<double> out) const override;

private:
  ParametricProcess proc_;
  bool force_mc_;
};

class UniPointAdapter final : public IntensityModel {
public:
  explicit UniPointAdapter(const UniPointModel& model) : model_(&model) {}

  [[nodiscard]] std::string name() const override { return "UNIPOINT_" + model_->variant_name(); }
  [[nodiscard]] bool has_analytic_compensator() const override { return false; }
  [[nodiscard]] double log_likelihood(const EventSequence& seq, std::size_t mc_samples, Rng& rng) const override;
  void intensity_at_times(const EventSequence& seq, std::span<const double> ts, std::span<double> out) const override;

private:
  const UniPointModel* model_;
};

class RmtppAdapter final : public IntensityModel {
public:
  explicit RmtppAdapter(const RmtppModel& model) : model_(&model) {}

  [[nodiscard]] std::string name() const override { return "RMTPP"; }
  [[nodiscard]] bool has_analytic_compensator() const override { return true; }
  [[nodiscard]] double log_likelihood(const EventSequence& seq, std::size_t, Rng&) const override;
  void intensity_at_times(const EventSequence& seq, std::span<const double> ts, std::span<double> out) const override;

private:
  const RmtppModel* model_;
};

/// Log-likelihood with the compensator estimated from `mc_samples` uniform draws per interval,
/// using only `intensity_at_times`.
[[nodiscard]] double mc_log_likelihood(const IntensityModel& model, const EventSequence& seq,
                                       std::size_t mc_samples, Rng& rng);

struct EvalReport {
  std::string model;
  std::string dataset;
  std::uint64_t seed = 0;
  std::size_t mc_samples = 0;
  std::vector<double> ll;            ///< per-sequence log-likelihood
  std::vector<double> ll_per_event;  ///< per-sequence log-likelihood / event count
  double mean = 0.0;
  double ci95 = 0.0;                 ///< 1.96 * sample sd / sqrt(n)
  double mean_per_event = 0.0;
  double ci95_per_event = 0.0;

  [[nodiscard]] std::size_t n() const { return ll.size(); }
  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Mean and 1.96 * sd / sqrt(n) half-width; the half-width is 0 for n < 2.
struct MeanCi {
  double mean = 0.0;
  double ci95 = 0.0;
};
[[nodiscard]] MeanCi mean_ci95(std::span<const double> values);

/// Scores every test sequence. Sequence i draws from stream_seed(seed, i), so the report does
/// not depend on `jobs`.
[[nodiscard]] EvalReport holdout_ll(const IntensityModel& model, std::span<const EventSequence> test,
                                    std::size_t mc_samples, std::uint64_t seed, std::string dataset = "",
                                    std::size_t jobs = 1);

/// Integral over (0, t_end] of (lambda_a - lambda_b)^2, both conditioned on the events of `seq`.
/// Each interval between consecutive events (and the tail) gets `n_mc` uniform draws.
[[nodiscard]] double total_variation(const IntensityModel& a, const IntensityModel& b, const EventSequence& seq,
                                     std::size_t n_mc, Rng& rng);
[[nodiscard]] double total_variation(const ParametricProcess& truth, const IntensityModel& approx,
                                     const EventSequence& seq, std::size_t n_mc, Rng& rng);

struct TTestResult {
  double t = 0.0;
  double p_value = 1.0;
  std::size_t df = 0;
  bool degenerate = false; ///< differences have zero variance; p is 1 if they are all zero, else 0
};

/// Two-sided paired t-test on per-sequence log-likelihoods.
/// Throws PreconditionError if the reports cover different datasets or sizes.
[[nodiscard]] TTestResult paired_ttest(const EvalReport& a, const EvalReport& b);
[[nodiscard]] TTestResult paired_ttest(std::span<const double> a, std::span<const double> b);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Asymptotic Kolmogorov survival function P(K > x).
[[nodiscard]] double kolmogorov_survival(double x);

/// One-sample Kolmogorov-Smirnov test against Exp(1).
[[nodiscard]] KsResult ks_test_exp1(std::span<const double> samples);

} // namespace unipoint
