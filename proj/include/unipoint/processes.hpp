#pragma once

#include "unipoint/events.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace unipoint {

/// mu + alpha*beta * sum exp(-beta (t - t_i))
struct ExpHawkesParams {
  double mu = 0.5;
  double alpha = 0.8;
  double beta = 1.0;
};

/// mu + alpha * sum (t - t_i + delta)^-(1 + beta)
struct PlHawkesParams {
  double mu = 0.5;
  double alpha = 0.5;
  double beta = 1.0;
  double delta = 0.5;
};

/// exp(nu t - gamma * #events before t)
struct SelfCorrectingParams {
  double nu = 1.0;
  double gamma = 1.0;
};

/// mu + gamma * sum (1 + sin(alpha s)) exp(-beta s),  s = t - t_i
struct DecayingSineParams {
  double mu = 0.5;
  double alpha = 5.0 * 3.14159265358979323846;
  double beta = 2.0;
  double gamma = 1.0;
};

enum class ProcessKind { ExpHawkes, PlHawkes, SelfCorrecting, DecayingSine };

[[nodiscard]] std::string_view to_string(ProcessKind kind);
/// Accepts "EXP_HAWKES" style names as well as CLI spellings like "exp-hawkes".
[[nodiscard]] ProcessKind parse_process_kind(std::string_view s);

/// Closed-form point process: intensity, compensator and exact sampler.
class ParametricProcess {
public:
  using Params = std::variant<ExpHawkesParams, PlHawkesParams, SelfCorrectingParams, DecayingSineParams>;

  /// Throws PreconditionError if parameters violate positivity constraints.
  explicit ParametricProcess(Params params);

  static ParametricProcess exp_hawkes(double mu, double alpha, double beta) {
    return ParametricProcess(ExpHawkesParams{mu, alpha, beta});
  }
  static ParametricProcess pl_hawkes(double mu, double alpha, double beta, double delta = 0.5) {
    return ParametricProcess(PlHawkesParams{mu, alpha, beta, delta});
  }
  static ParametricProcess self_correcting(double nu, double gamma) {
    return ParametricProcess(SelfCorrectingParams{nu, gamma});
  }
  static ParametricProcess decaying_sine(double mu, double alpha, double beta, double gamma) {
    return ParametricProcess(DecayingSineParams{mu, alpha, beta, gamma});
  }

  [[nodiscard]] ProcessKind kind() const { return static_cast<ProcessKind>(params_.index()); }
  [[nodiscard]] const Params& params() const { return params_; }
  [[nodiscard]] std::string name() const { return std::string(to_string(kind())); }

  /// Number of free parameters estimated by MLE (delta of PL_HAWKES is fixed).
  [[nodiscard]] std::size_t free_parameters() const;

private:
  Params params_;
};

/// Conditional intensity at t given `history` (all strictly before t).
/// Throws DomainError if some history time is >= t.
[[nodiscard]] double intensity(const ParametricProcess& proc, std::span<const double> history, double t);

/// Integral of the intensity over (t0, t1]. History events must not lie strictly inside (t0, t1);
/// events at or after t1 are ignored.
[[nodiscard]] double compensator(const ParametricProcess& proc, std::span<const double> history,
                                 double t0, double t1);

/// Exact log-likelihood of a whole sequence on (0, t_end].
[[nodiscard]] double log_likelihood(const ParametricProcess& proc, const EventSequence& seq);

/// Compensator increments between consecutive events (t_{i-1}, t_i], i = 1..N.
/// Under the true process these are i.i.d. Exp(1).
[[nodiscard]] std::vector<double> time_change_residuals(const ParametricProcess& proc,
                                                        const EventSequence& seq);

struct SimulateOptions {
  std::optional<std::size_t> n_events; ///< stop after this many events; t_end becomes the last event
  std::optional<double> t_end;         ///< stop at this horizon
  std::size_t max_events = 1'000'000;
  /// Re-check the thinning bound against the exact intensity at every proposal.
  bool check_bound = false;
};

/// Exact sampling. SELF_CORRECTING uses inverse-compensator sampling; the
/// Hawkes families use Ogata thinning with a decaying piecewise-constant bound.
[[nodiscard]] EventSequence simulate(const ParametricProcess& proc, const SimulateOptions& opts,
                                     std::uint64_t seed);

/// `count` sequences, sequence i seeded with seed + i.
[[nodiscard]] std::vector<EventSequence> simulate_many(const ParametricProcess& proc,
                                                       const SimulateOptions& opts, std::size_t count,
                                                       std::uint64_t seed);

struct MleOptions {
  std::size_t max_steps = 5000;
  double grad_tol = 1e-6;
  double learning_rate = 0.05;
  /// Learning rate decays geometrically to learning_rate * final_lr_fraction over max_steps.
  double final_lr_fraction = 1e-3;
  double pl_delta = 0.5;
  std::optional<ParametricProcess> init;
};

struct MleResult {
  ParametricProcess process;
  double nll = 0.0;          ///< total NLL over the training set
  double nll_per_event = 0.0;
  double grad_norm = 0.0;    ///< gradient norm of the per-event NLL w.r.t. the raw parameters
  std::size_t steps = 0;
  bool converged = false;
  std::string warning;       ///< non-empty when max_steps was hit before grad_tol
};

/// Maximum-likelihood fit of EXP_HAWKES or PL_HAWKES by Adam on softplus-reparameterised parameters.
[[nodiscard]] MleResult fit_mle(ProcessKind kind, std::span<const EventSequence> train,
                                const MleOptions& opts = {});

/// Total NLL and gradient w.r.t. the natural parameters (mu, alpha, beta) for the Hawkes baselines.
struct HawkesNllGrad {
  double nll = 0.0;
  std::array<double, 3> grad{};
};
[[nodiscard]] HawkesNllGrad hawkes_nll_grad(const ParametricProcess& proc, std::span<const EventSequence> data);

} // namespace unipoint
