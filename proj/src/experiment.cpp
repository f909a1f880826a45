#include "unipoint/experiment.hpp"

#include "unipoint/error.hpp"
#include "unipoint/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

namespace unipoint {

namespace fs = std::filesystem;

namespace {

// Derived RNG streams of one experiment seed.
constexpr std::uint64_t kInitStream = 0x1001;
constexpr std::uint64_t kTrainStream = 0x1002;
constexpr std::uint64_t kEvalStream = 0x1003;
constexpr std::uint64_t kTvStream = 0x1004;
constexpr std::uint64_t kReportDataStream = 0x2000;

void check_keys(const Json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError("'" + where + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError("unknown config field '" + (where.empty() ? key : where + "." + key) + "'");
    }
  }
}

template <class T>
T read(const Json& obj, const char* key, const std::string& where, T fallback) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config field '" + where + "." + key + "' has the wrong type");
  }
}

std::size_t read_positive(const Json& obj, const char* key, const std::string& where, std::size_t fallback) {
  if (obj.contains(key) && obj.at(key).is_number_integer() && obj.at(key).get<long long>() <= 0) {
    throw ConfigError("config field '" + where + "." + key + "' must be positive");
  }
  const auto v = read<std::size_t>(obj, key, where, fallback);
  if (v == 0) throw ConfigError("config field '" + where + "." + key + "' must be positive");
  return v;
}

std::vector<std::string> process_fields(ProcessKind kind) {
  switch (kind) {
  case ProcessKind::ExpHawkes: return {"mu", "alpha", "beta"};
  case ProcessKind::PlHawkes: return {"mu", "alpha", "beta", "delta"};
  case ProcessKind::SelfCorrecting: return {"nu", "gamma"};
  case ProcessKind::DecayingSine: return {"mu", "alpha", "beta", "gamma"};
  }
  return {};
}

} // namespace

std::uint64_t ExperimentConfig::required_seed() const {
  if (!seed) throw ConfigError("missing required field 'seed'");
  return *seed;
}

ParametricProcess process_from_params(ProcessKind kind, const Json& params, const std::string& where) {
  const auto get = [&](const char* name) {
    if (!params.contains(name) || params.at(name).is_null()) {
      if (kind == ProcessKind::PlHawkes && std::string(name) == "delta") return 0.5;
      throw ConfigError("missing required field '" + where + name + "'");
    }
    if (!params.at(name).is_number()) throw ConfigError("field '" + where + name + "' must be a number");
    return params.at(name).get<double>();
  };
  for (const auto& [key, value] : params.items()) {
    const auto fields = process_fields(kind);
    if (key != "kind" && std::find(fields.begin(), fields.end(), key) == fields.end()) {
      throw ConfigError("unknown field '" + where + key + "' for " + std::string(to_string(kind)));
    }
  }
  try {
    switch (kind) {
    case ProcessKind::ExpHawkes: return ParametricProcess::exp_hawkes(get("mu"), get("alpha"), get("beta"));
    case ProcessKind::PlHawkes:
      return ParametricProcess::pl_hawkes(get("mu"), get("alpha"), get("beta"), get("delta"));
    case ProcessKind::SelfCorrecting: return ParametricProcess::self_correcting(get("nu"), get("gamma"));
    case ProcessKind::DecayingSine:
      return ParametricProcess::decaying_sine(get("mu"), get("alpha"), get("beta"), get("gamma"));
    }
  } catch (const PreconditionError& e) {
    throw ConfigError(e.what());
  }
  throw ConfigError("unknown process kind");
}

Json to_json(const ExperimentConfig& cfg) {
  Json data = {{"sequences", cfg.data.sequences}, {"events", cfg.data.events}};
  if (cfg.data.path) data["path"] = *cfg.data.path;
  if (cfg.data.process) data["process"] = to_json(*cfg.data.process);
  if (cfg.data.t_end) data["t_end"] = *cfg.data.t_end;
  const auto& t = cfg.train;
  Json j = {
      {"data", data},
      {"model",
       {{"kind", cfg.model.kind},
        {"basis", cfg.model.basis},
        {"transfer", cfg.model.transfer},
        {"J", cfg.model.J},
        {"hidden", cfg.model.hidden},
        {"cell", cfg.model.cell},
        {"normalize_eval_times", cfg.model.normalize_eval_times}}},
      {"train",
       {{"batch_size", t.batch_size},
        {"mc_samples_train", t.mc_samples_train},
        {"mc_samples_eval", t.mc_samples_eval},
        {"early_stop_delta", t.early_stop_delta},
        {"early_stop_patience", t.early_stop_patience},
        {"max_epochs", t.max_epochs},
        {"lr", t.adam.lr},
        {"beta1", t.adam.beta1},
        {"beta2", t.adam.beta2},
        {"eps", t.adam.eps},
        {"weight_decay", t.adam.weight_decay}}},
      {"eval", {{"mc_samples", cfg.eval_mc_samples}, {"tv_mc_samples", cfg.tv_mc_samples}}},
      {"mle", {{"max_steps", cfg.mle_max_steps}}},
      {"sweep", {{"axis", cfg.sweep_axis}, {"values", cfg.sweep_values}}},
  };
  if (cfg.seed) j["seed"] = *cfg.seed;
  return j;
}

ExperimentConfig experiment_from_json(const Json& j) {
  check_keys(j, "", {"seed", "data", "model", "train", "eval", "mle", "sweep"});
  ExperimentConfig c;
  if (j.contains("seed") && !j.at("seed").is_null()) {
    if (!j.at("seed").is_number_unsigned()) throw ConfigError("config field 'seed' must be a non-negative integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  const Json empty = Json::object();
  const Json& d = j.contains("data") ? j.at("data") : empty;
  check_keys(d, "data", {"path", "process", "sequences", "events", "t_end"});
  if (d.contains("path") && !d.at("path").is_null()) c.data.path = read<std::string>(d, "path", "data", "");
  if (d.contains("process") && !d.at("process").is_null()) {
    const Json& p = d.at("process");
    if (!p.is_object() || !p.contains("kind")) throw ConfigError("missing required field 'data.process.kind'");
    c.data.process = process_from_params(parse_process_kind(read<std::string>(p, "kind", "data.process", "")), p,
                                         "data.process.");
  }
  c.data.sequences = read_positive(d, "sequences", "data", c.data.sequences);
  c.data.events = read_positive(d, "events", "data", c.data.events);
  if (d.contains("t_end") && !d.at("t_end").is_null()) c.data.t_end = read<double>(d, "t_end", "data", 0.0);

  const Json& m = j.contains("model") ? j.at("model") : empty;
  check_keys(m, "model", {"kind", "basis", "transfer", "J", "hidden", "cell", "normalize_eval_times"});
  c.model.kind = read<std::string>(m, "kind", "model", c.model.kind);
  for (auto& ch : c.model.kind) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (c.model.kind == "exp_hawkes" || c.model.kind == "exp-hawkes") c.model.kind = "exphawkes";
  if (c.model.kind == "pl_hawkes" || c.model.kind == "pl-hawkes") c.model.kind = "plhawkes";
  static const std::set<std::string> kinds{"unipoint", "rmtpp", "exphawkes", "plhawkes"};
  if (!kinds.count(c.model.kind)) throw ConfigError("unknown model kind '" + c.model.kind + "'");
  c.model.basis = read<std::string>(m, "basis", "model", c.model.basis);
  c.model.transfer = read<std::string>(m, "transfer", "model", c.model.transfer);
  c.model.J = read_positive(m, "J", "model", c.model.J);
  c.model.hidden = read_positive(m, "hidden", "model", c.model.hidden);
  c.model.cell = read<std::string>(m, "cell", "model", c.model.cell);
  c.model.normalize_eval_times = read<bool>(m, "normalize_eval_times", "model", c.model.normalize_eval_times);
  // validate the strings early so errors name the field
  (void)BasisSpec::parse(c.model.basis, c.model.J);
  (void)parse_transfer_kind(c.model.transfer);
  (void)parse_cell_type(c.model.cell);

  const Json& t = j.contains("train") ? j.at("train") : empty;
  check_keys(t, "train", {"batch_size", "mc_samples_train", "mc_samples_eval", "early_stop_delta",
                          "early_stop_patience", "max_epochs", "lr", "beta1", "beta2", "eps", "weight_decay"});
  auto& tc = c.train;
  tc.batch_size = read_positive(t, "batch_size", "train", tc.batch_size);
  tc.mc_samples_train = read_positive(t, "mc_samples_train", "train", tc.mc_samples_train);
  tc.mc_samples_eval = read_positive(t, "mc_samples_eval", "train", tc.mc_samples_eval);
  tc.early_stop_delta = read<double>(t, "early_stop_delta", "train", tc.early_stop_delta);
  tc.early_stop_patience = read_positive(t, "early_stop_patience", "train", tc.early_stop_patience);
  tc.max_epochs = read_positive(t, "max_epochs", "train", tc.max_epochs);
  tc.adam.lr = read<double>(t, "lr", "train", tc.adam.lr);
  tc.adam.beta1 = read<double>(t, "beta1", "train", tc.adam.beta1);
  tc.adam.beta2 = read<double>(t, "beta2", "train", tc.adam.beta2);
  tc.adam.eps = read<double>(t, "eps", "train", tc.adam.eps);
  tc.adam.weight_decay = read<double>(t, "weight_decay", "train", tc.adam.weight_decay);
  if (!(tc.adam.lr > 0.0)) throw ConfigError("config field 'train.lr' must be positive");
  if (tc.early_stop_delta < 0.0) throw ConfigError("config field 'train.early_stop_delta' must be >= 0");

  const Json& e = j.contains("eval") ? j.at("eval") : empty;
  check_keys(e, "eval", {"mc_samples", "tv_mc_samples"});
  c.eval_mc_samples = read_positive(e, "mc_samples", "eval", c.eval_mc_samples);
  c.tv_mc_samples = read_positive(e, "tv_mc_samples", "eval", c.tv_mc_samples);

  const Json& ml = j.contains("mle") ? j.at("mle") : empty;
  check_keys(ml, "mle", {"max_steps"});
  c.mle_max_steps = read_positive(ml, "max_steps", "mle", c.mle_max_steps);

  const Json& s = j.contains("sweep") ? j.at("sweep") : empty;
  check_keys(s, "sweep", {"axis", "values"});
  c.sweep_axis = read<std::string>(s, "axis", "sweep", c.sweep_axis);
  c.sweep_values = read<std::vector<std::size_t>>(s, "values", "sweep", c.sweep_values);
  return c;
}

ExperimentConfig resolve_config(const Json& file, const Json& overrides) {
  Json merged = to_json(ExperimentConfig{});
  if (!file.is_null()) {
    if (!file.is_object()) throw ConfigError("config file must hold a JSON object");
    merged.merge_patch(file);
  }
  if (!overrides.is_null()) merged.merge_patch(overrides);
  return experiment_from_json(merged);
}

Dataset materialize(const DataSpec& data, std::uint64_t seed) {
  if (data.path && data.process) throw ConfigError("config sets both 'data.path' and 'data.process'");
  if (data.path) return load_dataset(*data.path);
  if (!data.process) throw ConfigError("missing required field 'data.path' (or 'data.process')");
  SimulateOptions opts;
  if (data.t_end) {
    opts.t_end = data.t_end;
  } else {
    opts.n_events = data.events;
  }
  Dataset d;
  d.sequences = simulate_many(*data.process, opts, data.sequences, seed);
  return d;
}

std::string dataset_id(const DataSpec& data) {
  if (data.path) return fs::path(*data.path).filename().string();
  if (data.process) return data.process->name();
  return "";
}

TrainOutcome run_train(const ExperimentConfig& cfg, const Dataset& data) {
  const std::uint64_t seed = cfg.required_seed();
  const auto split = split_dataset(data.size(), kDefaultSplitFractions, seed);
  const auto train_set = data.subset(split.train);
  const auto val_set = data.subset(split.val);
  const auto test_set = data.subset(split.test);
  if (train_set.empty() || val_set.empty() || test_set.empty()) {
    throw ConfigError("dataset too small for a 60:20:20 split (" + std::to_string(data.size()) + " sequences)");
  }
  const std::string id = dataset_id(cfg.data);
  const Json config = to_json(cfg);
  const std::string hash = config_hash(config);

  TrainOutcome out{Checkpoint{ParametricProcess::exp_hawkes(1.0, 0.0, 1.0), 0, "", "", {}}, Json::object(), {}};
  const auto& mk = cfg.model;
  if (mk.kind == "unipoint" || mk.kind == "rmtpp") {
    const auto norm = compute_norm_stats(train_set, mk.normalize_eval_times);
    TrainConfig tc = cfg.train;
    tc.seed = stream_seed(seed, kTrainStream);
    if (mk.kind == "unipoint") {
      auto model = UniPointModel::create(BasisSpec::parse(mk.basis, mk.J), parse_transfer_kind(mk.transfer),
                                         parse_cell_type(mk.cell), mk.hidden, norm, stream_seed(seed, kInitStream));
      out.fit = to_json(train(model, train_set, val_set, tc));
      out.checkpoint.model = std::move(model);
    } else {
      if (parse_cell_type(mk.cell) != CellType::Rnn) throw ConfigError("rmtpp supports only the RNN cell");
      auto model = RmtppModel::create(mk.hidden, norm, stream_seed(seed, kInitStream));
      out.fit = to_json(train(model, train_set, val_set, tc));
      out.checkpoint.model = std::move(model);
    }
  } else {
    MleOptions mo;
    mo.max_steps = cfg.mle_max_steps;
    const auto kind = mk.kind == "exphawkes" ? ProcessKind::ExpHawkes : ProcessKind::PlHawkes;
    auto res = fit_mle(kind, train_set, mo);
    if (!std::isfinite(res.nll)) throw DivergenceError("MLE produced a non-finite likelihood");
    out.fit = to_json(res);
    out.checkpoint.model = res.process;
  }
  out.checkpoint.seed = seed;
  out.checkpoint.config_hash = hash;
  out.checkpoint.dataset = id;
  out.checkpoint.split = split;
  out.fit["seed"] = seed;
  out.fit["config_hash"] = hash;
  out.fit["config"] = config;
  out.fit["model_kind"] = model_kind(out.checkpoint.model);

  const auto scorer = make_intensity_model(out.checkpoint.model);
  out.test_eval = holdout_ll(*scorer, test_set, cfg.eval_mc_samples, stream_seed(seed, kEvalStream), id);
  return out;
}

EvalReport run_evaluate(const Checkpoint& ckpt, const Dataset& data, const std::string& which,
                        std::size_t mc_samples, std::uint64_t seed, std::size_t jobs) {
  std::vector<EventSequence> seqs;
  if (which == "all") {
    seqs = data.sequences;
  } else if (which == "test") {
    if (ckpt.split.test.empty()) throw ConfigError("checkpoint has no stored test split; use --split all");
    for (auto i : ckpt.split.test) {
      if (i >= data.size()) throw ConfigError("checkpoint split does not match the dataset size");
    }
    seqs = data.subset(ckpt.split.test);
  } else {
    throw ConfigError("unknown split '" + which + "' (expected test or all)");
  }
  const auto scorer = make_intensity_model(ckpt.model);
  return holdout_ll(*scorer, seqs, mc_samples, seed, ckpt.dataset, jobs);
}

std::vector<double> total_variation_per_sequence(const ParametricProcess& truth, const AnyModel& model,
                                                 std::span<const EventSequence> seqs, std::size_t n_mc,
                                                 std::uint64_t seed) {
  const auto scorer = make_intensity_model(model);
  const ParametricModel reference(truth);
  std::vector<double> out(seqs.size());
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    Rng rng(stream_seed(seed, i));
    out[i] = total_variation(reference, *scorer, seqs[i], n_mc, rng);
  }
  return out;
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(std::max<std::size_t>(jobs, 1), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const PreconditionError*>(&e)) return 2;
  if (dynamic_cast<const DivergenceError*>(&e) || dynamic_cast<const RunawayError*>(&e) ||
      dynamic_cast<const DegenerateError*>(&e)) {
    return 3;
  }
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
      dynamic_cast<const ValidationError*>(&e)) {
    return 4;
  }
  return 1;
}

namespace {

void write_cell(const fs::path& dir, const TrainOutcome& o) {
  fs::create_directories(dir);
  write_json(to_json(o.checkpoint), dir / "checkpoint.json");
  write_json(o.fit, dir / "fit_report.json");
  Json ev = to_json(o.test_eval);
  ev["config_hash"] = o.checkpoint.config_hash;
  ev["experiment_seed"] = o.checkpoint.seed;
  write_json(ev, dir / "eval_test.json");
}

template <class Row>
void record_failure(Row& row, const std::exception& e) {
  row.ok = false;
  row.error = e.what();
  if constexpr (requires { row.exit_code; }) row.exit_code = exit_code_for(e);
}

} // namespace

std::vector<SweepRow> sweep_basis_count(const ExperimentConfig& cfg, const Dataset& data, const fs::path& out,
                                        std::size_t jobs) {
  if (cfg.sweep_values.empty()) throw ConfigError("sweep needs a non-empty list of values");
  if (BasisSpec::parse(cfg.model.basis, 1).is_mixed() || cfg.model.kind != "unipoint") {
    throw ConfigError("the J sweep needs a single-family UNIPoint model");
  }
  (void)cfg.required_seed();
  std::vector<SweepRow> rows(cfg.sweep_values.size());
  parallel_for(rows.size(), jobs, [&](std::size_t i) {
    auto& row = rows[i];
    row.axis = "J";
    row.value = cfg.sweep_values[i];
    row.dataset = dataset_id(cfg.data);
    try {
      ExperimentConfig cell = cfg;
      cell.model.J = row.value;
      const auto o = run_train(cell, data);
      if (!out.empty()) write_cell(out / ("J_" + std::to_string(row.value)), o);
      row.model = o.test_eval.model;
      row.eval = o.test_eval;
      row.ok = true;
    } catch (const std::exception& e) {
      record_failure(row, e);
    }
  });
  return rows;
}

std::vector<SweepRow> sweep_mc_samples(const Checkpoint& ckpt, const Dataset& data,
                                       const std::vector<std::size_t>& values, std::size_t reference,
                                       std::uint64_t seed, std::size_t jobs) {
  if (values.empty()) throw ConfigError("sweep needs a non-empty list of values");
  if (std::find(values.begin(), values.end(), 0) != values.end()) throw ConfigError("mc_samples values must be >= 1");
  const auto ref = run_evaluate(ckpt, data, "test", reference, stream_seed(seed, reference), jobs);
  std::vector<SweepRow> rows(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto& row = rows[i];
    row.axis = "mc_samples";
    row.value = values[i];
    row.dataset = ckpt.dataset;
    try {
      row.eval = run_evaluate(ckpt, data, "test", row.value, stream_seed(seed, row.value), jobs);
      row.model = row.eval.model;
      std::vector<double> delta(ref.n());
      for (std::size_t k = 0; k < delta.size(); ++k) delta[k] = std::abs(row.eval.ll_per_event[k] - ref.ll_per_event[k]);
      const auto d = mean_ci95(delta);
      row.abs_delta = d.mean;
      row.abs_delta_ci95 = d.ci95;
      row.ok = true;
    } catch (const std::exception& e) {
      record_failure(row, e);
    }
  }
  return rows;
}

ParametricProcess synthetic_process(const std::string& name) {
  switch (parse_process_kind(name)) {
  case ProcessKind::SelfCorrecting: return ParametricProcess::self_correcting(1.0, 1.0);
  case ProcessKind::ExpHawkes: return ParametricProcess::exp_hawkes(0.5, 0.8, 1.0);
  case ProcessKind::DecayingSine: return ParametricProcess::decaying_sine(0.5, 5.0 * std::numbers::pi, 2.0, 1.0);
  case ProcessKind::PlHawkes: return ParametricProcess::pl_hawkes(0.5, 0.5, 1.0, 0.5);
  }
  throw ConfigError("unknown synthetic dataset '" + name + "'");
}

std::vector<ReportRow> run_report(const ExperimentConfig& cfg, const ReportOptions& opts, const fs::path& out,
                                  std::size_t jobs) {
  const std::uint64_t seed = cfg.required_seed();
  if (opts.datasets.empty() || opts.models.empty()) throw ConfigError("report needs datasets and models");
  std::vector<Dataset> datasets;
  std::vector<ParametricProcess> truths;
  for (std::size_t d = 0; d < opts.datasets.size(); ++d) {
    truths.push_back(synthetic_process(opts.datasets[d]));
    DataSpec spec;
    spec.process = truths.back();
    spec.sequences = opts.sequences;
    spec.events = opts.events;
    datasets.push_back(materialize(spec, stream_seed(seed, kReportDataStream + d)));
    if (!out.empty()) {
      fs::create_directories(out);
      save_dataset(datasets.back(), out / (truths.back().name() + ".jsonl"));
    }
  }

  const std::size_t n_models = opts.models.size();
  std::vector<ReportRow> rows(opts.datasets.size() * n_models);
  parallel_for(rows.size(), jobs, [&](std::size_t i) {
    const std::size_t d = i / n_models;
    const std::string& label = opts.models[i % n_models];
    auto& row = rows[i];
    row.dataset = truths[d].name();
    row.model = label;
    try {
      ExperimentConfig cell = cfg;
      cell.data = DataSpec{};
      cell.data.process = truths[d];
      cell.data.sequences = opts.sequences;
      cell.data.events = opts.events;
      std::string lower = label;
      for (auto& ch : lower) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      if (lower == "rmtpp" || lower == "exphawkes" || lower == "plhawkes") {
        cell.model.kind = lower;
        cell.model.cell = "RNN";
      } else {
        cell.model.kind = "unipoint";
        cell.model.basis = label == "MIXED" ? "MIXED(PL" + std::to_string(cfg.model.J / 2) + "+RELU" +
                                                  std::to_string(cfg.model.J - cfg.model.J / 2) + ")"
                                            : label;
      }
      const auto o = run_train(cell, datasets[d]);
      if (!out.empty()) write_cell(out / row.dataset / label, o);
      row.eval = o.test_eval;
      const auto test_set = datasets[d].subset(o.checkpoint.split.test);
      row.tv = total_variation_per_sequence(truths[d], o.checkpoint.model, test_set, cfg.tv_mc_samples,
                                            stream_seed(seed, kTvStream));
      row.ok = true;
    } catch (const std::exception& e) {
      record_failure(row, e);
    }
  });

  for (std::size_t d = 0; d < opts.datasets.size(); ++d) {
    std::vector<ReportRow*> ok;
    for (std::size_t m = 0; m < n_models; ++m) {
      if (rows[d * n_models + m].ok) ok.push_back(&rows[d * n_models + m]);
    }
    if (ok.empty()) continue;
    std::sort(ok.begin(), ok.end(),
              [](const ReportRow* a, const ReportRow* b) { return a->eval.mean_per_event > b->eval.mean_per_event; });
    ok[0]->best = true;
    if (ok.size() > 1 && ok[0]->eval.n() >= 2) {
      ok[0]->p_vs_runner_up = paired_ttest(ok[0]->eval.ll_per_event, ok[1]->eval.ll_per_event).p_value;
    }
  }
  return rows;
}

std::string format_number(double x, int digits) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string eval_csv(const std::vector<EvalReport>& reports, int digits) {
  std::ostringstream os;
  os << "model,dataset,mean_ll,ci95,n,mean_ll_per_sequence,ci95_per_sequence,mc_samples,eval_seed\n";
  for (const auto& r : reports) {
    os << csv_escape(r.model) << ',' << csv_escape(r.dataset) << ',' << format_number(r.mean_per_event, digits) << ','
       << format_number(r.ci95_per_event, digits) << ',' << r.n() << ',' << format_number(r.mean, digits) << ','
       << format_number(r.ci95, digits) << ',' << r.mc_samples << ',' << r.seed << '\n';
  }
  return os.str();
}

std::string sweep_csv(const std::vector<SweepRow>& rows, int digits) {
  std::ostringstream os;
  os << "axis,value,model,dataset,mean_ll,ci95,n,mean_ll_per_sequence,ci95_per_sequence,abs_delta,abs_delta_ci95,"
        "status,error\n";
  for (const auto& r : rows) {
    os << r.axis << ',' << r.value << ',' << csv_escape(r.model) << ',' << csv_escape(r.dataset) << ',';
    if (r.ok) {
      os << format_number(r.eval.mean_per_event, digits) << ',' << format_number(r.eval.ci95_per_event, digits) << ','
         << r.eval.n() << ',' << format_number(r.eval.mean, digits) << ',' << format_number(r.eval.ci95, digits) << ',';
      if (r.axis == "mc_samples") {
        os << format_number(r.abs_delta, digits) << ',' << format_number(r.abs_delta_ci95, digits);
      } else {
        os << ',';
      }
      os << ",ok,\n";
    } else {
      os << ",,,,,,,failed," << csv_escape(r.error) << '\n';
    }
  }
  return os.str();
}

std::string sweep_long_csv(const std::vector<SweepRow>& rows, int digits) {
  std::ostringstream os;
  os << "axis,value,metric,estimate,ci95\n";
  for (const auto& r : rows) {
    if (!r.ok) continue;
    const auto line = [&](const char* metric, double est, double ci) {
      os << r.axis << ',' << r.value << ',' << metric << ',' << format_number(est, digits) << ','
         << format_number(ci, digits) << '\n';
    };
    line("mean_ll", r.eval.mean_per_event, r.eval.ci95_per_event);
    line("mean_ll_per_sequence", r.eval.mean, r.eval.ci95);
    if (r.axis == "mc_samples") line("abs_delta", r.abs_delta, r.abs_delta_ci95);
  }
  return os.str();
}

std::string report_csv(const std::vector<ReportRow>& rows, int digits) {
  std::ostringstream os;
  os << "model,dataset,mean_ll,ci95,n,mean_ll_per_sequence,ci95_per_sequence,best,p_vs_runner_up,status,error\n";
  for (const auto& r : rows) {
    os << csv_escape(r.model) << ',' << csv_escape(r.dataset) << ',';
    if (r.ok) {
      os << format_number(r.eval.mean_per_event, digits) << ',' << format_number(r.eval.ci95_per_event, digits) << ','
         << r.eval.n() << ',' << format_number(r.eval.mean, digits) << ',' << format_number(r.eval.ci95, digits) << ','
         << (r.best ? 1 : 0) << ',' << (r.best ? format_number(r.p_vs_runner_up, digits) : "") << ",ok,\n";
    } else {
      os << ",,,,,,,failed," << csv_escape(r.error) << '\n';
    }
  }
  return os.str();
}

std::string report_tv_csv(const std::vector<ReportRow>& rows, int digits) {
  std::ostringstream os;
  os << "model,dataset,mean_tv,ci95,n\n";
  for (const auto& r : rows) {
    if (!r.ok) continue;
    const auto s = mean_ci95(r.tv);
    os << csv_escape(r.model) << ',' << csv_escape(r.dataset) << ',' << format_number(s.mean, digits) << ','
       << format_number(s.ci95, digits) << ',' << r.tv.size() << '\n';
  }
  return os.str();
}

} // namespace unipoint
