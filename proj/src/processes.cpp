#include "unipoint/processes.hpp"

#include "unipoint/basis.hpp"
#include "unipoint/error.hpp"
#include "unipoint/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace unipoint {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require(bool ok, const char* msg) {
  if (!ok) throw PreconditionError(msg);
}

/// (a^-beta - b^-beta) / beta for 0 < a <= b, stable as beta -> 0.
double power_tail(double a, double b, double beta) {
  const double la = std::log(a);
  const double lr = std::log(b) - la;
  if (beta * lr < 1e-300 || beta < 1e-14) return lr * std::exp(-beta * la);
  return -std::exp(-beta * la) * std::expm1(-beta * lr) / beta;
}

/// Antiderivative of (1 + sin(alpha s)) exp(-beta s).
double sine_antiderivative(const DecayingSineParams& p, double s) {
  const double e = std::exp(-p.beta * s);
  return -e / p.beta +
         e * (-p.beta * std::sin(p.alpha * s) - p.alpha * std::cos(p.alpha * s)) /
             (p.alpha * p.alpha + p.beta * p.beta);
}

/// Number of history events <= t, after checking none lie inside (t0, t1).
std::size_t prefix_before(std::span<const double> history, double t0, double t1) {
  std::size_t n = 0;
  for (double ti : history) {
    if (ti <= t0) {
      ++n;
    } else if (ti < t1) {
      throw DomainError("history event lies inside the compensator interval");
    }
  }
  return n;
}

/// Excitation-only upper bound on the intensity over (t, next event), history events <= t.
double thinning_bound(const ParametricProcess& proc, std::span<const double> history, double t) {
  return std::visit(
      overloaded{
          [&](const ExpHawkesParams& p) {
            double s = 0.0;
            for (double ti : history) s += std::exp(-p.beta * (t - ti));
            return p.mu + p.alpha * p.beta * s;
          },
          [&](const PlHawkesParams& p) {
            double s = 0.0;
            for (double ti : history) s += std::pow(t - ti + p.delta, -(1.0 + p.beta));
            return p.mu + p.alpha * s;
          },
          [&](const DecayingSineParams& p) {
            double s = 0.0;
            for (double ti : history) s += std::exp(-p.beta * (t - ti));
            return p.mu + 2.0 * p.gamma * s;
          },
          [&](const SelfCorrectingParams&) -> double {
            throw std::logic_error("self-correcting process is not simulated by thinning");
          },
      },
      proc.params());
}

} // namespace

std::string_view to_string(ProcessKind kind) {
  switch (kind) {
  case ProcessKind::ExpHawkes: return "EXP_HAWKES";
  case ProcessKind::PlHawkes: return "PL_HAWKES";
  case ProcessKind::SelfCorrecting: return "SELF_CORRECTING";
  case ProcessKind::DecayingSine: return "DECAYING_SINE";
  }
  return "?";
}

ProcessKind parse_process_kind(std::string_view s) {
  std::string norm(s);
  for (auto& c : norm) {
    c = c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  for (auto k : {ProcessKind::ExpHawkes, ProcessKind::PlHawkes, ProcessKind::SelfCorrecting,
                 ProcessKind::DecayingSine}) {
    if (norm == to_string(k)) return k;
  }
  if (norm == "EXPHAWKES") return ProcessKind::ExpHawkes;
  if (norm == "PLHAWKES") return ProcessKind::PlHawkes;
  if (norm == "SELFCORRECTING") return ProcessKind::SelfCorrecting;
  if (norm == "DECAYINGSINE") return ProcessKind::DecayingSine;
  throw ConfigError("unknown process kind '" + std::string(s) + "'");
}

ParametricProcess::ParametricProcess(Params params) : params_(std::move(params)) {
  std::visit(overloaded{
                 [](const ExpHawkesParams& p) {
                   require(p.mu > 0 && p.alpha >= 0 && p.beta > 0, "EXP_HAWKES needs mu>0, alpha>=0, beta>0");
                 },
                 [](const PlHawkesParams& p) {
                   require(p.mu > 0 && p.alpha >= 0 && p.beta >= 0 && p.delta > 0,
                           "PL_HAWKES needs mu>0, alpha>=0, beta>=0, delta>0");
                 },
                 [](const SelfCorrectingParams& p) {
                   require(p.nu > 0 && p.gamma >= 0, "SELF_CORRECTING needs nu>0, gamma>=0");
                 },
                 [](const DecayingSineParams& p) {
                   require(p.mu > 0 && p.gamma >= 0 && p.beta > 0, "DECAYING_SINE needs mu>0, gamma>=0, beta>0");
                 },
             },
             params_);
}

std::size_t ParametricProcess::free_parameters() const {
  switch (kind()) {
  case ProcessKind::ExpHawkes:
  case ProcessKind::PlHawkes:
    return 3;
  case ProcessKind::SelfCorrecting:
    return 2;
  case ProcessKind::DecayingSine:
    return 4;
  }
  return 0;
}

double intensity(const ParametricProcess& proc, std::span<const double> history, double t) {
  for (double ti : history) {
    if (ti >= t) throw DomainError("intensity evaluated at or before a history event");
  }
  return std::visit(
      overloaded{
          [&](const ExpHawkesParams& p) {
            double s = 0.0;
            for (double ti : history) s += std::exp(-p.beta * (t - ti));
            return p.mu + p.alpha * p.beta * s;
          },
          [&](const PlHawkesParams& p) {
            double s = 0.0;
            for (double ti : history) s += std::pow(t - ti + p.delta, -(1.0 + p.beta));
            return p.mu + p.alpha * s;
          },
          [&](const SelfCorrectingParams& p) {
            return std::exp(p.nu * t - p.gamma * static_cast<double>(history.size()));
          },
          [&](const DecayingSineParams& p) {
            double s = 0.0;
            for (double ti : history) {
              const double lag = t - ti;
              s += (1.0 + std::sin(p.alpha * lag)) * std::exp(-p.beta * lag);
            }
            return p.mu + p.gamma * s;
          },
      },
      proc.params());
}

double compensator(const ParametricProcess& proc, std::span<const double> history, double t0, double t1) {
  if (!(t0 >= 0.0 && t1 >= t0)) throw DomainError("compensator needs 0 <= t0 <= t1");
  const std::size_t n = prefix_before(history, t0, t1);
  if (t1 == t0) return 0.0;
  const auto past = history.first(n);
  const double dt = t1 - t0;
  return std::visit(
      overloaded{
          [&](const ExpHawkesParams& p) {
            double s = 0.0;
            for (double ti : past) s += std::exp(-p.beta * (t0 - ti));
            return p.mu * dt - p.alpha * s * std::expm1(-p.beta * dt);
          },
          [&](const PlHawkesParams& p) {
            double s = 0.0;
            for (double ti : past) s += power_tail(t0 - ti + p.delta, t1 - ti + p.delta, p.beta);
            return p.mu * dt + p.alpha * s;
          },
          [&](const SelfCorrectingParams& p) {
            return std::exp(p.nu * t0 - p.gamma * static_cast<double>(n)) * std::expm1(p.nu * dt) / p.nu;
          },
          [&](const DecayingSineParams& p) {
            double s = 0.0;
            for (double ti : past) s += sine_antiderivative(p, t1 - ti) - sine_antiderivative(p, t0 - ti);
            return p.mu * dt + p.gamma * s;
          },
      },
      proc.params());
}

double log_likelihood(const ParametricProcess& proc, const EventSequence& seq) {
  if (proc.kind() == ProcessKind::ExpHawkes || proc.kind() == ProcessKind::PlHawkes) {
    return -hawkes_nll_grad(proc, std::span<const EventSequence>(&seq, 1)).nll;
  }
  const auto times = seq.times();
  double ll = 0.0;
  double prev = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const auto hist = times.first(i);
    ll += std::log(intensity(proc, hist, times[i])) - compensator(proc, hist, prev, times[i]);
    prev = times[i];
  }
  return ll - compensator(proc, times, prev, seq.t_end());
}

std::vector<double> time_change_residuals(const ParametricProcess& proc, const EventSequence& seq) {
  const auto times = seq.times();
  std::vector<double> out;
  out.reserve(times.size());
  double prev = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    out.push_back(compensator(proc, times.first(i), prev, times[i]));
    prev = times[i];
  }
  return out;
}

EventSequence simulate(const ParametricProcess& proc, const SimulateOptions& opts, std::uint64_t seed) {
  if (!opts.n_events && !opts.t_end) throw PreconditionError("simulate needs n_events or t_end");
  if (opts.t_end && !(*opts.t_end > 0.0)) throw PreconditionError("t_end must be positive");
  if (opts.n_events && *opts.n_events == 0) throw PreconditionError("n_events must be positive");
  if (!opts.n_events && proc.kind() == ProcessKind::ExpHawkes &&
      std::get<ExpHawkesParams>(proc.params()).alpha >= 1.0) {
    throw PreconditionError("EXP_HAWKES with alpha >= 1 is explosive; use an event-count stop");
  }

  Rng rng(seed);
  std::vector<double> events;
  const auto done = [&] { return opts.n_events && events.size() >= *opts.n_events; };
  const auto runaway = [&] {
    if (events.size() > opts.max_events) {
      throw RunawayError("simulation exceeded " + std::to_string(opts.max_events) + " events");
    }
  };

  double t = 0.0;
  if (const auto* sc = std::get_if<SelfCorrectingParams>(&proc.params())) {
    while (!done()) {
      const double e = rng.exponential();
      const double log_arg = sc->gamma * static_cast<double>(events.size()) - sc->nu * t;
      const double next = t + std::log1p(sc->nu * e * std::exp(log_arg)) / sc->nu;
      if (opts.t_end && next > *opts.t_end) break;
      events.push_back(next);
      t = next;
      runaway();
    }
  } else if (const auto* eh = std::get_if<ExpHawkesParams>(&proc.params())) {
    // Exponential kernel: carry the excitation sum S(t) = sum exp(-beta (t - t_i)) forward.
    double excite = 0.0;
    while (!done()) {
      const double bound = eh->mu + eh->alpha * eh->beta * excite;
      const double next = t + rng.exponential(bound);
      if (opts.t_end && next > *opts.t_end) break;
      excite *= std::exp(-eh->beta * (next - t));
      t = next;
      const double lam = eh->mu + eh->alpha * eh->beta * excite;
      if (opts.check_bound && lam > bound * (1.0 + 1e-12)) throw std::logic_error("thinning bound violated");
      if (rng.uniform() * bound <= lam) {
        events.push_back(t);
        excite += 1.0;
        runaway();
      }
    }
  } else {
    while (!done()) {
      const double bound = thinning_bound(proc, events, t);
      const double next = t + rng.exponential(bound);
      if (opts.t_end && next > *opts.t_end) break;
      t = next;
      const double lam = intensity(proc, events, t);
      if (opts.check_bound && lam > bound * (1.0 + 1e-12)) throw std::logic_error("thinning bound violated");
      if (rng.uniform() * bound <= lam) {
        events.push_back(t);
        runaway();
      }
    }
  }
  // Event-count stop sets the horizon to the last event; otherwise the loop ended at t_end.
  const double horizon = done() ? events.back() : *opts.t_end;
  return EventSequence(std::move(events), horizon);
}

std::vector<EventSequence> simulate_many(const ParametricProcess& proc, const SimulateOptions& opts,
                                         std::size_t count, std::uint64_t seed) {
  std::vector<EventSequence> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(simulate(proc, opts, seed + i));
  return out;
}

// ---------------------------------------------------------------------------
// Hawkes likelihood and MLE

namespace {

HawkesNllGrad exp_hawkes_nll_grad(const ExpHawkesParams& p, const EventSequence& seq) {
  HawkesNllGrad r;
  const auto times = seq.times();
  const double T = seq.t_end();
  double rsum = 0.0;  // sum_{j<i} exp(-beta (t_i - t_j))
  double drsum = 0.0; // d rsum / d beta
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (i > 0) {
      const double dt = times[i] - times[i - 1];
      const double decay = std::exp(-p.beta * dt);
      drsum = decay * (drsum - dt * (rsum + 1.0));
      rsum = decay * (rsum + 1.0);
    }
    const double lam = p.mu + p.alpha * p.beta * rsum;
    r.nll -= std::log(lam);
    r.grad[0] -= 1.0 / lam;
    r.grad[1] -= p.beta * rsum / lam;
    r.grad[2] -= (p.alpha * rsum + p.alpha * p.beta * drsum) / lam;
  }
  r.nll += p.mu * T;
  r.grad[0] += T;
  for (double tj : times) {
    const double lag = T - tj;
    const double decay = std::exp(-p.beta * lag);
    r.nll -= p.alpha * std::expm1(-p.beta * lag);
    r.grad[1] -= std::expm1(-p.beta * lag);
    r.grad[2] += p.alpha * lag * decay;
  }
  return r;
}

HawkesNllGrad pl_hawkes_nll_grad(const PlHawkesParams& p, const EventSequence& seq) {
  HawkesNllGrad r;
  const auto times = seq.times();
  const double T = seq.t_end();
  for (std::size_t i = 0; i < times.size(); ++i) {
    double k = 0.0;
    double dk = 0.0;
    for (std::size_t j = 0; j < i; ++j) {
      const double l = std::log(times[i] - times[j] + p.delta);
      const double v = std::exp(-(1.0 + p.beta) * l);
      k += v;
      dk -= l * v;
    }
    const double lam = p.mu + p.alpha * k;
    r.nll -= std::log(lam);
    r.grad[0] -= 1.0 / lam;
    r.grad[1] -= k / lam;
    r.grad[2] -= p.alpha * dk / lam;
  }
  r.nll += p.mu * T;
  r.grad[0] += T;
  const double la = std::log(p.delta);
  for (double tj : times) {
    const double b = T - tj + p.delta;
    const double h = power_tail(p.delta, b, p.beta);
    r.nll += p.alpha * h;
    r.grad[1] += h;
    // dh/dbeta = [(-ln a a^-beta + ln b b^-beta) - h] / beta; limit -(ln b^2 - ln a^2)/2 at beta = 0
    const double lb = std::log(b);
    double dh;
    if (p.beta < 1e-8) {
      dh = -0.5 * (lb * lb - la * la);
    } else {
      dh = (-la * std::exp(-p.beta * la) + lb * std::exp(-p.beta * lb) - h) / p.beta;
    }
    r.grad[2] += p.alpha * dh;
  }
  return r;
}

} // namespace

HawkesNllGrad hawkes_nll_grad(const ParametricProcess& proc, std::span<const EventSequence> data) {
  HawkesNllGrad total;
  for (const auto& seq : data) {
    HawkesNllGrad r;
    if (const auto* e = std::get_if<ExpHawkesParams>(&proc.params())) {
      r = exp_hawkes_nll_grad(*e, seq);
    } else if (const auto* pl = std::get_if<PlHawkesParams>(&proc.params())) {
      r = pl_hawkes_nll_grad(*pl, seq);
    } else {
      throw PreconditionError("hawkes_nll_grad supports EXP_HAWKES and PL_HAWKES only");
    }
    total.nll += r.nll;
    for (int k = 0; k < 3; ++k) total.grad[k] += r.grad[k];
  }
  return total;
}

MleResult fit_mle(ProcessKind kind, std::span<const EventSequence> train, const MleOptions& opts) {
  if (train.empty()) throw PreconditionError("fit_mle needs a non-empty training set");
  if (kind != ProcessKind::ExpHawkes && kind != ProcessKind::PlHawkes) {
    throw PreconditionError("fit_mle supports EXP_HAWKES and PL_HAWKES only");
  }
  std::size_t n_events = 0;
  double horizon = 0.0;
  for (const auto& s : train) {
    n_events += s.size();
    horizon += s.t_end();
  }
  if (n_events == 0) throw PreconditionError("fit_mle needs at least one event");
  const double scale = 1.0 / static_cast<double>(n_events);

  const auto make = [&](const std::array<double, 3>& nat) {
    return kind == ProcessKind::ExpHawkes ? ParametricProcess::exp_hawkes(nat[0], nat[1], nat[2])
                                          : ParametricProcess::pl_hawkes(nat[0], nat[1], nat[2], opts.pl_delta);
  };

  std::array<double, 3> nat{0.5 * static_cast<double>(n_events) / horizon, 0.5, 1.0};
  if (opts.init) {
    if (opts.init->kind() != kind) throw PreconditionError("fit_mle init has the wrong process kind");
    if (const auto* e = std::get_if<ExpHawkesParams>(&opts.init->params())) nat = {e->mu, e->alpha, e->beta};
    if (const auto* pl = std::get_if<PlHawkesParams>(&opts.init->params())) nat = {pl->mu, pl->alpha, pl->beta};
  }
  std::array<double, 3> raw{};
  for (int k = 0; k < 3; ++k) raw[k] = softplus_inverse(std::max(nat[k], 1e-6));

  // Adam on the raw parameters; natural = softplus(raw).
  std::array<double, 3> m{}, v{};
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double decay = std::pow(opts.final_lr_fraction, 1.0 / static_cast<double>(std::max<std::size_t>(opts.max_steps, 1)));

  MleResult res{make(nat), 0.0, 0.0, 0.0, 0, false, {}};
  double lr = opts.learning_rate;
  std::array<double, 3> g{};
  const auto evaluate = [&] {
    for (int k = 0; k < 3; ++k) nat[k] = softplus(raw[k]);
    const auto r = hawkes_nll_grad(make(nat), train);
    double norm2 = 0.0;
    for (int k = 0; k < 3; ++k) {
      g[k] = r.grad[k] * scale * sigmoid(raw[k]);
      norm2 += g[k] * g[k];
    }
    res.nll = r.nll;
    res.grad_norm = std::sqrt(norm2);
  };

  evaluate();
  std::size_t step = 0;
  while (step < opts.max_steps && !(res.grad_norm < opts.grad_tol)) {
    ++step;
    for (int k = 0; k < 3; ++k) {
      m[k] = b1 * m[k] + (1 - b1) * g[k];
      v[k] = b2 * v[k] + (1 - b2) * g[k] * g[k];
      const double mh = m[k] / (1 - std::pow(b1, static_cast<double>(step)));
      const double vh = v[k] / (1 - std::pow(b2, static_cast<double>(step)));
      raw[k] -= lr * mh / (std::sqrt(vh) + eps);
    }
    lr *= decay;
    evaluate();
  }
  res.process = make(nat);
  res.nll_per_event = res.nll * scale;
  res.steps = step;
  res.converged = res.grad_norm < opts.grad_tol;
  if (!res.converged) {
    res.warning = "fit_mle did not converge: gradient norm " + std::to_string(res.grad_norm) + " after " +
                  std::to_string(step) + " steps";
  }
  return res;
}

} // namespace unipoint
