// Acceptance gate: one PASS/FAIL line per criterion.
#include "unipoint/basis.hpp"
#include "unipoint/error.hpp"
#include "unipoint/experiment.hpp"
#include "unipoint/metrics.hpp"
#include "unipoint/model.hpp"
#include "unipoint/processes.hpp"
#include "unipoint/rng.hpp"

#include <CLI11.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

using namespace unipoint;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x, int digits = 4) { return format_number(x, digits); }

std::vector<ParametricProcess> synthetic_processes() {
  return {ParametricProcess::exp_hawkes(0.5, 0.8, 1.0), ParametricProcess::pl_hawkes(0.5, 0.5, 1.0, 0.5),
          ParametricProcess::self_correcting(1.0, 1.0),
          ParametricProcess::decaying_sine(0.5, 5.0 * std::numbers::pi, 2.0, 1.0)};
}

EventSequence random_sequence(Rng& rng, std::size_t max_events) {
  const std::size_t n = rng.index(max_events + 1);
  std::vector<double> t;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) t.push_back(s += rng.uniform(0.05, 1.5));
  return EventSequence(t, s + rng.uniform(0.0, 1.0) + (n == 0 ? 0.5 : 0.0));
}

std::vector<std::span<double>> tensors(UniPointModel& m) {
  std::vector<std::span<double>> out;
  UniPointModel::visit(m, [&](const std::string&, const Shape&, std::span<double> v) { out.push_back(v); });
  return out;
}

Verdict gradient_correctness() {
  Rng rng(4242);
  double worst = 0.0;
  std::size_t instances = 0;
  for (BasisKind kind : kAllBasisKinds) {
    for (TransferKind transfer : kAllTransferKinds) {
      for (CellType cell : {CellType::Rnn, CellType::Lstm}) {
        for (int draw = 0; draw < 50; ++draw, ++instances) {
          const std::size_t M = rng.index(2) == 0 ? 2 : 4;
          const std::size_t J = 1 + rng.index(3);
          NormStats norm{rng.uniform(0.3, 1.0), rng.uniform(0.5, 1.5), rng.index(2) == 1};
          auto m = UniPointModel::create(BasisSpec(kind, J), transfer, cell, M, norm, rng.next_u64());
          for (auto& x : std::visit([](auto& w) -> std::vector<double>& { return w.h0; }, m.encoder))
            x = rng.uniform(-0.5, 0.5);
          const std::vector<EventSequence> batch{random_sequence(rng, 5), random_sequence(rng, 5)};
          const std::uint64_t mc_seed = rng.next_u64();
          const auto loss = [&] {
            Rng r(mc_seed);
            return forward(m, batch, 3, r).loss();
          };
          Rng r(mc_seed);
          auto tape = forward(m, batch, 3, r);
          auto g = backward(tape);
          auto ps = tensors(m);
          auto gs = tensors(g);
          for (std::size_t t = 0; t < ps.size(); ++t) {
            for (std::size_t k = 0; k < ps[t].size(); ++k) {
              const double keep = ps[t][k];
              ps[t][k] = keep + 1e-5;
              const double up = loss();
              ps[t][k] = keep - 1e-5;
              const double dn = loss();
              ps[t][k] = keep;
              const double fd = (up - dn) / 2e-5;
              worst = std::max(worst,
                               std::abs(gs[t][k] - fd) / std::max({std::abs(fd), std::abs(gs[t][k]), 1e-6}));
            }
          }
        }
      }
    }
  }
  return {worst < 1e-4, "worst relative error " + fmt(worst, 3) + " < 1e-4 over " + std::to_string(instances) +
                            " instances (5 bases x 2 transfers x 2 cells x 50)"};
}

Verdict simulator_exactness() {
  SimulateOptions opts;
  opts.n_events = 128;
  bool pass = true;
  std::string detail;
  for (const auto& p : synthetic_processes()) {
    std::vector<double> res;
    for (std::uint64_t seed = 500; res.size() < 10000; ++seed) {
      const auto r = time_change_residuals(p, simulate(p, opts, seed));
      res.insert(res.end(), r.begin(), r.end());
    }
    res.resize(10000);
    const auto ks = ks_test_exp1(res);
    pass = pass && ks.p_value > 0.01;
    detail += p.name() + " p=" + fmt(ks.p_value, 3) + " ";
  }
  return {pass, detail + "(KS vs Exp(1) on 1e4 residuals, need p > 0.01)"};
}

Verdict compensator_equivalence() {
  Rng rng(77);
  double worst = 0.0;
  for (const auto& p : synthetic_processes()) {
    for (int i = 0; i < 1000; ++i) {
      std::vector<double> hist;
      double t = 0.0;
      const auto n = rng.index(6);
      for (std::size_t k = 0; k < n; ++k) hist.push_back(t += rng.uniform(0.01, 1.0));
      const double a = t + rng.uniform(0.0, 1.0);
      const double b = a + rng.uniform(1e-3, 2.0);
      const auto f = [&](double s) { return intensity(p, hist, s); };
      const double quad = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 12, 1e-13);
      worst = std::max(worst, std::abs(compensator(p, hist, a, b) - quad) / quad);
    }
  }
  return {worst < 1e-8, "worst relative gap to adaptive quadrature " + fmt(worst, 3) +
                            " < 1e-8 (4 processes x 1000 intervals)"};
}

Verdict parameter_recovery(std::uint64_t seed) {
  SimulateOptions opts;
  opts.n_events = 128;
  const auto data = simulate_many(ParametricProcess::exp_hawkes(0.5, 0.8, 1.0), opts, 512, seed);
  const auto fit = fit_mle(ProcessKind::ExpHawkes, data);
  const auto& p = std::get<ExpHawkesParams>(fit.process.params());
  const bool pass = std::abs(p.mu - 0.5) <= 0.1 && std::abs(p.alpha - 0.8) <= 0.1 && std::abs(p.beta - 1.0) <= 0.1;
  return {pass, "fitted mu=" + fmt(p.mu) + " alpha=" + fmt(p.alpha) + " beta=" + fmt(p.beta) +
                    " vs (0.5, 0.8, 1) within 0.1"};
}

Verdict theory_checks() {
  Rng rng(99);
  bool lipschitz = true, monotone = true, closure = true;
  for (TransferKind kind : kAllTransferKinds) {
    std::vector<double> grid(20000);
    for (auto& x : grid) x = rng.uniform(-50.0, 50.0);
    std::sort(grid.begin(), grid.end());
    for (std::size_t i = 1; i < grid.size(); ++i) {
      const double fa = transfer_eval(kind, grid[i - 1]);
      const double fb = transfer_eval(kind, grid[i]);
      if (std::abs(fb - fa) > (grid[i] - grid[i - 1]) * (1.0 + 1e-12)) lipschitz = false;
      if (grid[i] > grid[i - 1] && fa > 0.0 && !(fb > fa)) monotone = false;
    }
  }
  double worst = 0.0;
  for (int i = 0; i < 2000; ++i) {
    const double a1 = rng.uniform(-3, 3), b1 = rng.uniform(-2, 2);
    const double a2 = rng.uniform(-3, 3), b2 = rng.uniform(-2, 2);
    const double e1 = rng.uniform(0.05, 3), e2 = rng.uniform(0.05, 3);
    const std::vector<double> p1{a1, b1}, p2{a2, b2}, prod{a1 * a2, b1 + b2};
    const std::vector<double> q1{a1, softplus_inverse(e1)}, q2{a2, softplus_inverse(e2)};
    const std::vector<double> qprod{a1 * a2, softplus_inverse(e1 + e2)};
    const double x = rng.uniform(0.0, 5.0);
    const auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); };
    worst = std::max(worst, rel(basis_eval(BasisKind::Exp, p1, x) * basis_eval(BasisKind::Exp, p2, x),
                                basis_eval(BasisKind::Exp, prod, x)));
    worst = std::max(worst, rel(basis_eval(BasisKind::Pl, q1, x) * basis_eval(BasisKind::Pl, q2, x),
                                basis_eval(BasisKind::Pl, qprod, x)));
  }
  closure = worst < 1e-10;
  return {lipschitz && monotone && closure,
          std::string("1-Lipschitz ") + (lipschitz ? "yes" : "NO") + ", strictly increasing on positive range " +
              (monotone ? "yes" : "NO") + ", EXP/PL product closure worst rel error " + fmt(worst, 3)};
}

/// Shared state for the training-based criteria.
struct Bench {
  std::uint64_t seed = 2024;
  std::size_t sequences = 512;
  std::size_t events = 128;
  fs::path out;
  std::map<std::string, Dataset> data;
  std::map<std::string, TrainOutcome> fits;

  ExperimentConfig config(const std::string& dataset, const std::string& kind, const std::string& basis,
                          std::size_t J) const {
    ExperimentConfig c;
    c.seed = seed;
    c.data.process = synthetic_process(dataset);
    c.data.sequences = sequences;
    c.data.events = events;
    c.model.kind = kind;
    c.model.basis = basis;
    c.model.J = J;
    c.model.hidden = 48;
    return c;
  }

  const Dataset& dataset(const std::string& name) {
    auto it = data.find(name);
    if (it == data.end()) {
      DataSpec spec;
      spec.process = synthetic_process(name);
      spec.sequences = sequences;
      spec.events = events;
      it = data.emplace(name, materialize(spec, seed)).first;
    }
    return it->second;
  }

  const TrainOutcome& fit(const std::string& dataset_name, const std::string& kind, const std::string& basis = "EXP",
                          std::size_t J = 64) {
    const std::string key = dataset_name + "/" + kind + "/" + basis + "/" + std::to_string(J);
    auto it = fits.find(key);
    if (it != fits.end()) return it->second;
    const auto t0 = std::chrono::steady_clock::now();
    auto outcome = run_train(config(dataset_name, kind, basis, J), dataset(dataset_name));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "  trained " << key << ": test mean_ll " << fmt(outcome.test_eval.mean_per_event) << " +/- "
              << fmt(outcome.test_eval.ci95_per_event, 2) << " in " << fmt(secs, 3) << " s\n";
    if (!out.empty()) {
      auto dir = out / dataset_name / (kind == "unipoint" ? basis + "_J" + std::to_string(J) : kind);
      fs::create_directories(dir);
      write_json(to_json(outcome.checkpoint), dir / "checkpoint.json");
      write_json(outcome.fit, dir / "fit_report.json");
      write_json(to_json(outcome.test_eval), dir / "eval_test.json");
    }
    return fits.emplace(key, std::move(outcome)).first->second;
  }
};

Verdict table_gap(Bench& b) {
  const double uni_sc = b.fit("SELF_CORRECTING", "unipoint").test_eval.mean_per_event;
  const double hawkes_sc = b.fit("SELF_CORRECTING", "exphawkes").test_eval.mean_per_event;
  const double uni_ds = b.fit("DECAYING_SINE", "unipoint").test_eval.mean_per_event;
  const double rmtpp_ds = b.fit("DECAYING_SINE", "rmtpp").test_eval.mean_per_event;
  const double gap_sc = uni_sc - hawkes_sc;
  const double gap_ds = uni_ds - rmtpp_ds;
  return {gap_sc >= 0.15 && gap_ds >= 0.01,
          "SelfCorrecting UNIPoint " + fmt(uni_sc) + " vs ExpHawkes " + fmt(hawkes_sc) + " (gap " + fmt(gap_sc, 3) +
              " >= 0.15); DecayingSine UNIPoint " + fmt(uni_ds) + " vs RMTPP " + fmt(rmtpp_ds) + " (gap " +
              fmt(gap_ds, 3) + " >= 0.01)"};
}

Verdict tv_self_consistency(Bench& b) {
  const std::string ds = "EXP_HAWKES";
  const auto truth = synthetic_process(ds);
  const auto& hawkes = b.fit(ds, "exphawkes");
  const auto test = b.dataset(ds).subset(hawkes.checkpoint.split.test);
  const auto mean_tv = [&](const TrainOutcome& o) {
    const auto tv = total_variation_per_sequence(truth, o.checkpoint.model, test, 256, stream_seed(b.seed, 0x7f));
    return mean_ci95(tv).mean;
  };
  const double tv_hawkes = mean_tv(hawkes);
  bool pass = true;
  std::string detail = "ExpHawkes TV " + fmt(tv_hawkes, 3) + " vs";
  for (const std::string basis : {"EXP", "PL", "COS", "SIG", "RELU", "MIXED(PL32+RELU32)"}) {
    const double tv = mean_tv(b.fit(ds, "unipoint", basis, 64));
    pass = pass && tv_hawkes < tv;
    detail += " " + (basis.starts_with("MIXED") ? std::string("MIXED") : basis) + "=" + fmt(tv, 3);
  }
  return {pass, detail + " (mean over test sequences)"};
}

Verdict basis_count_trend(Bench& b) {
  const std::vector<std::size_t> Js{1, 2, 4, 8, 16, 32, 64};
  std::vector<SweepRow> rows;
  for (auto J : Js) {
    SweepRow r;
    r.axis = "J";
    r.value = J;
    r.eval = b.fit("SELF_CORRECTING", "unipoint", "EXP", J).test_eval;
    r.model = r.eval.model;
    r.dataset = r.eval.dataset;
    r.ok = true;
    rows.push_back(r);
  }
  if (!b.out.empty()) write_text(sweep_csv(rows, 10), b.out / "sweep_J.csv");
  bool nondecreasing = true;
  std::string detail = "mean_ll by J:";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    detail += " " + std::to_string(rows[i].value) + ":" + fmt(rows[i].eval.mean_per_event);
    if (i > 0) {
      const auto& a = rows[i - 1].eval;
      const auto& c = rows[i].eval;
      // the 95% intervals of consecutive cells must overlap when the mean drops
      if (c.mean_per_event + c.ci95_per_event < a.mean_per_event - a.ci95_per_event) nondecreasing = false;
    }
  }
  const double early = std::abs(rows[4].eval.mean_per_event - rows[0].eval.mean_per_event);
  const double late = std::abs(rows[6].eval.mean_per_event - rows[4].eval.mean_per_event);
  return {nondecreasing && late < early, detail + "; |LL64-LL16|=" + fmt(late, 3) + " < |LL16-LL1|=" +
                                             fmt(early, 3) + (nondecreasing ? "" : "; DECREASE beyond CIs")};
}

Verdict mc_sample_trend(Bench& b) {
  const auto& fitted = b.fit("SELF_CORRECTING", "unipoint");
  const std::vector<std::size_t> S{1, 2, 4, 8, 16, 32, 64, 128};
  const auto rows = sweep_mc_samples(fitted.checkpoint, b.dataset("SELF_CORRECTING"), S, 256, b.seed, 1);
  if (!b.out.empty()) write_text(sweep_csv(rows, 10), b.out / "sweep_mc.csv");
  bool monotone = true;
  std::string detail = "mean |LL(S)-LL(256)|:";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].ok) return {false, "S=" + std::to_string(S[i]) + " failed: " + rows[i].error};
    detail += " " + std::to_string(S[i]) + ":" + fmt(rows[i].abs_delta, 3);
    if (i > 0 && !(rows[i].abs_delta < rows[i - 1].abs_delta)) monotone = false;
  }
  const bool small = rows[0].abs_delta <= 0.03;
  return {monotone && small, detail + (monotone ? "; strictly decreasing" : "; NOT decreasing") +
                                 "; S=1 delta <= 0.03"};
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria 1-9"};
  std::vector<int> only;
  Bench bench;
  std::string out;
  app.add_option("--only", only, "criteria to run (default all)")->delimiter(',');
  app.add_option("--seed", bench.seed, "seed for data and training");
  app.add_option("--sequences", bench.sequences, "sequences per synthetic dataset for criteria 5-8");
  app.add_option("--out", out, "directory for checkpoints and sweep tables");
  CLI11_PARSE(app, argc, argv);
  bench.out = out;
  const std::set<int> selected = only.empty() ? std::set<int>{1, 2, 3, 4, 5, 6, 7, 8, 9}
                                              : std::set<int>(only.begin(), only.end());

  const std::vector<std::pair<int, std::pair<std::string, std::function<Verdict()>>>> criteria{
      {1, {"gradient correctness", gradient_correctness}},
      {2, {"simulator exactness", simulator_exactness}},
      {3, {"compensator equivalence", compensator_equivalence}},
      {4, {"ExpHawkes parameter recovery", [&] { return parameter_recovery(bench.seed); }}},
      {9, {"transfer/basis theory checks", theory_checks}},
      {5, {"model-ordering gaps", [&] { return table_gap(bench); }}},
      {7, {"basis-count trend", [&] { return basis_count_trend(bench); }}},
      {8, {"MC-sample trend", [&] { return mc_sample_trend(bench); }}},
      {6, {"ExpHawkes total-variation self-consistency", [&] { return tv_self_consistency(bench); }}},
  };
  std::map<int, std::string> lines;
  bool all = true;
  for (const auto& [id, entry] : criteria) {
    if (!selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = entry.second();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ostringstream line;
    line << "criterion " << id << " " << (v.pass ? "PASS" : "FAIL") << " " << entry.first << ": " << v.detail
         << " [" << fmt(secs, 3) << " s]";
    std::cout << line.str() << std::endl;
    lines[id] = line.str();
    all = all && v.pass;
  }
  std::cout << "---- summary ----\n";
  for (const auto& [id, line] : lines) std::cout << line << "\n";
  return all ? 0 : 1;
}
