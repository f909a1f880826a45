#include <doctest.h>

#include "unipoint/error.hpp"
#include "unipoint/metrics.hpp"
#include "unipoint/model.hpp"
#include "unipoint/processes.hpp"
#include "unipoint/rng.hpp"

#include <cmath>
#include <vector>

using namespace unipoint;

namespace {

std::vector<EventSequence> exp_hawkes_data(std::size_t count, std::uint64_t seed) {
  SimulateOptions opts;
  opts.n_events = 128;
  return simulate_many(ParametricProcess::exp_hawkes(0.5, 0.8, 1.0), opts, count, seed);
}

// Independent ExpHawkes log-likelihood: direct double sums, no recursion.
double exp_hawkes_ll_direct(double mu, double alpha, double beta, const EventSequence& s) {
  const auto t = s.times();
  double ll = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    double lam = mu;
    for (std::size_t j = 0; j < i; ++j) lam += alpha * beta * std::exp(-beta * (t[i] - t[j]));
    ll += std::log(lam);
  }
  double comp = mu * s.t_end();
  for (double tj : t) comp += alpha * (1.0 - std::exp(-beta * (s.t_end() - tj)));
  return ll - comp;
}

} // namespace

TEST_CASE("holdout LL of a unit-rate model") {
  const std::vector<EventSequence> test{EventSequence({1.0}, 2.0)};
  const auto rep = holdout_ll(ConstantRateModel(1.0), test, 8, 1);
  CHECK(rep.ll[0] == doctest::Approx(-2.0).epsilon(1e-15));
  CHECK(rep.mean == doctest::Approx(-2.0));
  CHECK(rep.ll_per_event[0] == doctest::Approx(-2.0));
  CHECK(rep.ci95 == 0.0);
  CHECK(rep.mc_samples == 0);

  auto m = UniPointModel::create(BasisSpec(BasisKind::Exp, 1), TransferKind::Softplus, CellType::Rnn, 2, NormStats{}, 1);
  std::fill(m.head.A.begin(), m.head.A.end(), 0.0);
  m.head.B = {softplus_inverse(1.0), 0.0};
  const auto up = holdout_ll(UniPointAdapter(m), test, 8, 1);
  CHECK(up.mean == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(up.mc_samples == 8);
}

TEST_CASE("holdout LL is reproducible and independent of jobs") {
  auto m = UniPointModel::create(BasisSpec(BasisKind::Cos, 3), TransferKind::Softplus, CellType::Rnn, 4, NormStats{}, 2);
  const auto test = exp_hawkes_data(20, 3);
  const auto a = holdout_ll(UniPointAdapter(m), test, 16, 5, "d");
  const auto b = holdout_ll(UniPointAdapter(m), test, 16, 5, "d");
  const auto c = holdout_ll(UniPointAdapter(m), test, 16, 5, "d", 3);
  CHECK(a == b);
  CHECK(a == c);
  CHECK_FALSE(a == holdout_ll(UniPointAdapter(m), test, 16, 6, "d"));
}

TEST_CASE("self-scoring ExpHawkes matches its entropy rate") {
  // entropy-rate estimate from 10^4 sequences with an independent likelihood
  const auto big = exp_hawkes_data(10000, 50000);
  std::vector<double> per_event;
  for (const auto& s : big) per_event.push_back(exp_hawkes_ll_direct(0.5, 0.8, 1.0, s) / static_cast<double>(s.size()));
  const auto oracle = mean_ci95(per_event);

  const auto test = exp_hawkes_data(400, 1);
  const auto rep = holdout_ll(ParametricModel(ParametricProcess::exp_hawkes(0.5, 0.8, 1.0)), test, 1, 0);
  MESSAGE("entropy rate " << oracle.mean << " +- " << oracle.ci95 << ", holdout " << rep.mean_per_event << " +- "
                          << rep.ci95_per_event);
  CHECK(std::abs(rep.mean_per_event - oracle.mean) <= std::hypot(rep.ci95_per_event, oracle.ci95));
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(rep.ll[i] == doctest::Approx(exp_hawkes_ll_direct(0.5, 0.8, 1.0, test[i])).epsilon(1e-10));
  }
}

TEST_CASE("analytic and MC compensators agree") {
  const auto test = exp_hawkes_data(60, 8);
  const auto proc = ParametricProcess::exp_hawkes(0.5, 0.8, 1.0);
  const auto exact = holdout_ll(ParametricModel(proc), test, 256, 1);
  const auto mc = holdout_ll(ParametricModel(proc, true), test, 256, 1);
  std::vector<double> diff(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) diff[i] = mc.ll[i] - exact.ll[i];
  const auto d = mean_ci95(diff);
  const double se = d.ci95 / 1.96;
  CHECK(std::abs(d.mean) < 3.0 * se);
  CHECK(mc.mc_samples == 256);
}

TEST_CASE("CI half-width scales as 1/sqrt(n)") {
  Rng rng(3);
  std::vector<double> values(4000);
  for (auto& v : values) v = rng.normal();
  const auto small = mean_ci95(std::span<const double>(values).first(1000));
  const auto large = mean_ci95(values);
  CHECK(small.ci95 / large.ci95 == doctest::Approx(2.0).epsilon(0.15));
  const std::vector<double> ab{1.0, 3.0};
  CHECK(mean_ci95(ab).ci95 == doctest::Approx(1.96 * std::sqrt(2.0) / std::sqrt(2.0)));
}

TEST_CASE("total variation") {
  Rng rng(1);
  const auto s = exp_hawkes_data(1, 4)[0];
  const auto proc = ParametricProcess::exp_hawkes(0.5, 0.8, 1.0);
  CHECK(total_variation(proc, ParametricModel(proc), s, 64, rng) < 1e-10);

  const EventSequence q({0.7, 2.0, 2.1}, 5.0);
  CHECK(total_variation(ConstantRateModel(2.0), ConstantRateModel(1.0), q, 3, rng) == doctest::Approx(5.0).epsilon(1e-14));

  const ParametricModel other(ParametricProcess::exp_hawkes(0.4, 0.5, 2.0));
  Rng r1(9), r2(9);
  const double ab = total_variation(ParametricModel(proc), other, s, 32, r1);
  const double ba = total_variation(other, ParametricModel(proc), s, 32, r2);
  CHECK(ab == ba);
  CHECK(ab > 0.0);
}

TEST_CASE("total variation ranks a fitted Hawkes above a constant rate") {
  const auto data = exp_hawkes_data(128, 70);
  const auto fit = fit_mle(ProcessKind::ExpHawkes, data);
  const auto flat = ConstantRateModel::fit(data);
  const auto truth = ParametricProcess::exp_hawkes(0.5, 0.8, 1.0);
  const auto held = exp_hawkes_data(10, 900);
  double tv_fit = 0.0, tv_flat = 0.0;
  Rng rng(2);
  for (const auto& s : held) {
    tv_fit += total_variation(truth, ParametricModel(fit.process), s, 64, rng);
    tv_flat += total_variation(truth, flat, s, 64, rng);
  }
  CHECK(tv_fit < tv_flat);
}

TEST_CASE("paired t-test") {
  const std::vector<double> a{1, 2, 3, 4, 5.5};
  const std::vector<double> b{1.1, 1.9, 2.5, 4.2, 5.0};
  const auto r = paired_ttest(a, b);
  // scipy.stats.ttest_rel
  CHECK(r.t == doctest::Approx(1.0886621079036343).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(0.3375018565403647).epsilon(1e-10));
  CHECK(r.df == 4);

  const auto same = paired_ttest(a, a);
  CHECK(same.p_value == 1.0);
  CHECK(same.degenerate);

  std::vector<double> shifted(a);
  for (auto& x : shifted) x += 1.0;
  const auto shift = paired_ttest(shifted, a);
  CHECK(shift.p_value == 0.0);
  CHECK(shift.degenerate);

  Rng rng(12);
  std::vector<double> x(100), y(100);
  for (std::size_t i = 0; i < 100; ++i) {
    x[i] = rng.normal();
    y[i] = 1.0 + rng.normal();
  }
  CHECK(paired_ttest(x, y).p_value < 1e-3);

  CHECK_THROWS_AS((void)paired_ttest(a, std::vector<double>{1.0}), PreconditionError);
  EvalReport ra, rb;
  ra.dataset = "x";
  rb.dataset = "y";
  ra.ll = rb.ll = a;
  CHECK_THROWS_AS((void)paired_ttest(ra, rb), PreconditionError);
}

TEST_CASE("Kolmogorov distribution") {
  // scipy.special.kolmogorov
  const std::pair<double, double> table[] = {
      {0.3, 0.9999906941986655},   {0.5, 0.9639452436648751},   {0.8, 0.5441424115741981},
      {1.0, 0.26999967167735456},  {1.18, 0.1234538094297657},  {1.36, 0.049485876755377876},
      {2.0, 0.0006709252557796953}, {3.0, 3.045995948942526e-08}};
  for (const auto& [x, p] : table) CHECK(kolmogorov_survival(x) == doctest::Approx(p).epsilon(1e-10));
  CHECK(kolmogorov_survival(0.0) == 1.0);

  const std::vector<double> sample{0.1, 0.5, 0.9, 1.3, 2.2, 0.05, 3.1, 0.7};
  CHECK(ks_test_exp1(sample).statistic == doctest::Approx(0.15483741803595957).epsilon(1e-12));

  Rng rng(4);
  std::vector<double> good(5000), bad(5000);
  for (auto& v : good) v = rng.exponential();
  for (auto& v : bad) v = rng.exponential(1.2);
  CHECK(ks_test_exp1(good).p_value > 0.01);
  CHECK(ks_test_exp1(bad).p_value < 1e-6);
}

TEST_CASE("model intensities on shared histories") {
  const EventSequence s({0.5, 1.5}, 3.0);
  const std::vector<double> ts{0.2, 0.5, 1.0, 2.9};
  std::vector<double> out(4);
  const auto proc = ParametricProcess::exp_hawkes(0.5, 0.8, 1.0);
  ParametricModel(proc).intensity_at_times(s, ts, out);
  CHECK(out[0] == 0.5);
  CHECK(out[1] == 0.5); // left limit at an event excludes it
  CHECK(out[2] == doctest::Approx(0.5 + 0.8 * std::exp(-0.5)));

  auto m = UniPointModel::create(BasisSpec(BasisKind::Sig, 2), TransferKind::Softplus, CellType::Rnn, 3,
                                 NormStats{1.0, 2.0, true}, 4);
  UniPointAdapter(m).intensity_at_times(s, ts, out);
  const auto p = forward_params(m, s);
  CHECK(out[3] == doctest::Approx(0.5 * intensity_at(m, p.interval(2), 2.9 - 1.5)));
  std::vector<double> wrong(3);
  CHECK_THROWS_AS(UniPointAdapter(m).intensity_at_times(s, ts, wrong), ShapeError);
}
