#include "cli.hpp"

#include "unipoint/error.hpp"
#include "unipoint/experiment.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <stdexcept>
#include <optional>
#include <ostream>

namespace unipoint {

namespace fs = std::filesystem;

namespace {

struct GlobalOpts {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> config;
  std::optional<std::string> out;
  std::size_t jobs = 1;
  int precision = 10;
};

struct DataOpts {
  std::optional<std::string> path;
  std::optional<std::string> process;
  std::optional<double> mu, alpha, beta, gamma, nu, delta;
  std::optional<std::size_t> sequences, events;
  std::optional<double> t_end;
};

struct ModelOpts {
  std::optional<std::string> kind, basis, transfer, cell;
  std::optional<std::size_t> J, hidden;
  std::optional<bool> normalize;
  std::optional<std::size_t> batch_size, mc_train, mc_eval, patience, max_epochs, eval_mc;
  std::optional<double> delta, lr, weight_decay;
};

void add_data_options(CLI::App* sub, DataOpts& d) {
  sub->add_option("--data", d.path, "dataset file (JSONL)");
  sub->add_option("--process", d.process, "generator: self-correcting | exp-hawkes | pl-hawkes | decaying-sine");
  sub->add_option("--mu", d.mu);
  sub->add_option("--alpha", d.alpha);
  sub->add_option("--beta", d.beta);
  sub->add_option("--gamma", d.gamma);
  sub->add_option("--nu", d.nu);
  sub->add_option("--delta", d.delta, "PL Hawkes offset");
  sub->add_option("--sequences", d.sequences);
  sub->add_option("--events", d.events, "events per simulated sequence");
  sub->add_option("--t-end", d.t_end, "simulate to a horizon instead of an event count");
}

void add_model_options(CLI::App* sub, ModelOpts& m) {
  sub->add_option("--model", m.kind, "unipoint | rmtpp | exphawkes | plhawkes");
  sub->add_option("--basis", m.basis, "EXP | PL | COS | SIG | RELU | MIXED(PL32+RELU32)");
  sub->add_option("--transfer", m.transfer, "SOFTPLUS | MAXSIG");
  sub->add_option("--J", m.J, "basis functions");
  sub->add_option("--hidden", m.hidden, "RNN hidden units");
  sub->add_option("--cell", m.cell, "RNN | LSTM");
  sub->add_flag("--normalize-eval-times", m.normalize, "divide interarrival times by their std at evaluation");
  sub->add_option("--batch-size", m.batch_size);
  sub->add_option("--mc-train", m.mc_train, "MC samples per interval in training");
  sub->add_option("--mc-eval", m.mc_eval, "MC samples per interval for validation");
  sub->add_option("--patience", m.patience, "early-stopping patience in mini-batches");
  sub->add_option("--min-delta", m.delta, "early-stopping improvement threshold");
  sub->add_option("--max-epochs", m.max_epochs);
  sub->add_option("--lr", m.lr);
  sub->add_option("--weight-decay", m.weight_decay);
  sub->add_option("--mc-samples", m.eval_mc, "MC samples per interval for holdout scoring");
}

template <class T>
void put(Json& j, const char* pointer, const std::optional<T>& v) {
  if (v) j[Json::json_pointer(pointer)] = *v;
}

void apply_data(Json& file, Json& ov, const DataOpts& d) {
  const auto drop = [&](const char* key) {
    if (file.contains("data") && file["data"].is_object()) file["data"].erase(key);
  };
  if (d.path) {
    drop("process");
    ov["/data/path"_json_pointer] = *d.path;
  }
  const std::vector<std::pair<const char*, std::optional<double>>> params{
      {"mu", d.mu}, {"alpha", d.alpha}, {"beta", d.beta}, {"gamma", d.gamma}, {"nu", d.nu}, {"delta", d.delta}};
  if (d.process) {
    drop("process");
    drop("path");
    Json p = {{"kind", std::string(to_string(parse_process_kind(*d.process)))}};
    for (const auto& [name, v] : params) {
      if (v) p[name] = *v;
    }
    ov["/data/process"_json_pointer] = p;
  } else {
    for (const auto& [name, v] : params) {
      if (v) ov[Json::json_pointer(std::string("/data/process/") + name)] = *v;
    }
  }
  put(ov, "/data/sequences", d.sequences);
  put(ov, "/data/events", d.events);
  put(ov, "/data/t_end", d.t_end);
}

void apply_model(Json& ov, const ModelOpts& m) {
  put(ov, "/model/kind", m.kind);
  put(ov, "/model/basis", m.basis);
  put(ov, "/model/transfer", m.transfer);
  put(ov, "/model/cell", m.cell);
  put(ov, "/model/J", m.J);
  put(ov, "/model/hidden", m.hidden);
  put(ov, "/model/normalize_eval_times", m.normalize);
  put(ov, "/train/batch_size", m.batch_size);
  put(ov, "/train/mc_samples_train", m.mc_train);
  put(ov, "/train/mc_samples_eval", m.mc_eval);
  put(ov, "/train/early_stop_patience", m.patience);
  put(ov, "/train/early_stop_delta", m.delta);
  put(ov, "/train/max_epochs", m.max_epochs);
  put(ov, "/train/lr", m.lr);
  put(ov, "/train/weight_decay", m.weight_decay);
  put(ov, "/eval/mc_samples", m.eval_mc);
}

/// Appends config_hash and seed columns to every CSV row.
std::string stamp_csv(const std::string& csv, const std::string& hash, std::uint64_t seed) {
  std::string out;
  std::size_t start = 0;
  bool header = true;
  while (start < csv.size()) {
    const auto end = csv.find('\n', start);
    out += csv.substr(start, end - start);
    out += header ? ",config_hash,seed\n" : "," + hash + "," + std::to_string(seed) + "\n";
    header = false;
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

Json stamped(Json j, const std::string& hash, std::uint64_t seed) {
  j["config_hash"] = hash;
  j["seed"] = seed;
  return j;
}

Json sweep_row_json(const SweepRow& r) {
  Json j = {{"axis", r.axis}, {"value", r.value}, {"model", r.model}, {"dataset", r.dataset}, {"ok", r.ok}};
  if (r.ok) {
    j["eval"] = to_json(r.eval);
    if (r.axis == "mc_samples") {
      j["abs_delta"] = r.abs_delta;
      j["abs_delta_ci95"] = r.abs_delta_ci95;
    }
  } else {
    j["error"] = r.error;
    j["exit_code"] = r.exit_code;
  }
  return j;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto end = std::min(s.find(',', start), s.size());
    if (end > start) out.push_back(s.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Temporal point process experiments with sum-of-basis neural intensities", "unipoint"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOpts g;
  app.add_option("--seed", g.seed, "experiment seed (mandatory for simulate, train, sweep J, report)");
  app.add_option("--config", g.config, "experiment config JSON; command-line flags take precedence");
  app.add_option("--out", g.out, "output file (simulate) or directory");
  app.add_option("--jobs", g.jobs, "parallel workers for independent cells and sequences")->check(CLI::PositiveNumber);
  app.add_option("--precision", g.precision, "significant digits in CSV and console output")
      ->check(CLI::Range(1, 17));

  DataOpts sim_data, train_data, eval_data, sweep_data;
  ModelOpts train_model, eval_model, sweep_model, report_model;

  auto* sim = app.add_subcommand("simulate", "simulate a synthetic dataset to JSONL");
  add_data_options(sim, sim_data);

  auto* trn = app.add_subcommand("train", "fit a model and score its test split");
  add_data_options(trn, train_data);
  add_model_options(trn, train_model);

  auto* evl = app.add_subcommand("evaluate", "score a checkpoint on a dataset");
  std::string checkpoint_path;
  std::string split = "test";
  evl->add_option("--checkpoint", checkpoint_path, "checkpoint.json from train")->required();
  evl->add_option("--split", split, "test | all")->check(CLI::IsMember({"test", "all"}));
  add_data_options(evl, eval_data);
  add_model_options(evl, eval_model);

  auto* swp = app.add_subcommand("sweep", "J sweep (retrain) or MC-sample sweep (re-evaluate)");
  std::optional<std::string> axis;
  std::optional<std::string> values;
  std::string sweep_checkpoint;
  std::size_t reference = 256;
  swp->add_option("--axis", axis, "J | mc_samples");
  swp->add_option("--values", values, "comma-separated values, e.g. 1,2,4,8");
  swp->add_option("--checkpoint", sweep_checkpoint, "fitted model for the mc_samples axis");
  swp->add_option("--reference", reference, "reference MC sample count")->check(CLI::PositiveNumber);
  add_data_options(swp, sweep_data);
  add_model_options(swp, sweep_model);

  auto* rep = app.add_subcommand("report", "train every model on every synthetic generator and tabulate");
  ReportOptions ropts;
  std::optional<std::string> models, datasets;
  rep->add_option("--sequences", ropts.sequences, "sequences per generator");
  rep->add_option("--events", ropts.events, "events per sequence");
  rep->add_option("--models", models, "comma-separated model labels");
  rep->add_option("--datasets", datasets, "comma-separated generator names");
  add_model_options(rep, report_model);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    Json file = g.config ? read_json(*g.config) : Json();
    if (!file.is_null() && !file.is_object()) throw ConfigError("config file must hold a JSON object");
    Json ov = Json::object();
    put(ov, "/seed", g.seed);
    const int digits = g.precision;

    if (sim->parsed()) {
      apply_data(file, ov, sim_data);
      const auto cfg = resolve_config(file, ov);
      const auto seed = cfg.required_seed();
      if (!cfg.data.process) throw ConfigError("simulate needs a generator: missing required field '--process'");
      const fs::path path = g.out.value_or("dataset.jsonl");
      const auto data = materialize(cfg.data, seed);
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      save_dataset(data, path);
      std::size_t total = 0;
      for (const auto& s : data.sequences) total += s.size();
      Json meta = {{"generator", to_json(*cfg.data.process)},
                   {"sequences", data.size()},
                   {"events_total", total},
                   {"events_per_sequence", cfg.data.t_end ? Json() : Json(cfg.data.events)},
                   {"t_end", cfg.data.t_end ? Json(*cfg.data.t_end) : Json()},
                   {"sequence_seeds", "seed + sequence index"}};
      write_json(stamped(meta, config_hash(to_json(cfg)), seed), path.string() + ".meta.json");
      out << "wrote " << data.size() << " sequences (" << total << " events) to " << path.string() << "\n";
      return 0;
    }

    if (trn->parsed()) {
      apply_data(file, ov, train_data);
      apply_model(ov, train_model);
      const auto cfg = resolve_config(file, ov);
      const auto seed = cfg.required_seed();
      const auto data = materialize(cfg.data, seed);
      const auto outcome = run_train(cfg, data);
      const fs::path dir = g.out.value_or("run");
      fs::create_directories(dir);
      const auto& hash = outcome.checkpoint.config_hash;
      write_json(to_json(outcome.checkpoint), dir / "checkpoint.json");
      write_json(outcome.fit, dir / "fit_report.json");
      write_json(stamped(to_json(outcome.test_eval), hash, seed), dir / "eval_test.json");
      write_json(stamped(to_json(cfg), hash, seed), dir / "config.json");
      write_text(stamp_csv(eval_csv({outcome.test_eval}, digits), hash, seed), dir / "eval_test.csv");
      out << outcome.test_eval.model << " on " << outcome.test_eval.dataset << ": test mean_ll "
          << format_number(outcome.test_eval.mean_per_event, digits) << " +/- "
          << format_number(outcome.test_eval.ci95_per_event, digits) << " per event (n=" << outcome.test_eval.n()
          << ")\n";
      return 0;
    }

    if (evl->parsed()) {
      const auto ckpt = checkpoint_from_json(read_json(checkpoint_path));
      apply_data(file, ov, eval_data);
      apply_model(ov, eval_model);
      if (!ov.contains("seed") && !(file.is_object() && file.contains("seed"))) ov["seed"] = ckpt.seed;
      const auto cfg = resolve_config(file, ov);
      const auto seed = cfg.required_seed();
      const auto data = materialize(cfg.data, seed);
      const auto report = run_evaluate(ckpt, data, split, cfg.eval_mc_samples, seed, g.jobs);
      const fs::path dir = g.out.value_or(".");
      fs::create_directories(dir);
      const auto hash = config_hash(to_json(cfg));
      Json j = stamped(to_json(report), hash, seed);
      j["checkpoint_config_hash"] = ckpt.config_hash;
      write_json(j, dir / ("eval_" + split + ".json"));
      write_text(stamp_csv(eval_csv({report}, digits), hash, seed), dir / ("eval_" + split + ".csv"));
      out << report.model << ": " << split << " mean_ll " << format_number(report.mean_per_event, digits)
          << " +/- " << format_number(report.ci95_per_event, digits) << " per event (n=" << report.n() << ")\n";
      return 0;
    }

    if (swp->parsed()) {
      apply_data(file, ov, sweep_data);
      apply_model(ov, sweep_model);
      put(ov, "/sweep/axis", axis);
      if (values) {
        Json list = Json::array();
        for (const auto& v : split_list(*values)) {
          try {
            std::size_t used = 0;
            const long long x = std::stoll(v, &used);
            if (used != v.size() || x <= 0) throw std::invalid_argument(v);
            list.push_back(x);
          } catch (const std::logic_error&) {
            throw ConfigError("--values entry '" + v + "' is not a positive integer");
          }
        }
        ov["/sweep/values"_json_pointer] = list;
      }
      const auto cfg = resolve_config(file, ov);
      if (cfg.sweep_values.empty()) throw ConfigError("sweep needs a non-empty --values list");
      const fs::path dir = g.out.value_or("sweep");
      std::vector<SweepRow> rows;
      std::uint64_t seed = 0;
      if (cfg.sweep_axis == "J") {
        seed = cfg.required_seed();
        const auto data = materialize(cfg.data, seed);
        fs::create_directories(dir);
        rows = sweep_basis_count(cfg, data, dir, g.jobs);
      } else if (cfg.sweep_axis == "mc_samples") {
        if (sweep_checkpoint.empty()) throw ConfigError("the mc_samples axis needs --checkpoint");
        const auto ckpt = checkpoint_from_json(read_json(sweep_checkpoint));
        seed = cfg.seed.value_or(ckpt.seed);
        const auto data = materialize(cfg.data, cfg.seed.value_or(ckpt.seed));
        rows = sweep_mc_samples(ckpt, data, cfg.sweep_values, reference, seed, g.jobs);
      } else {
        throw ConfigError("unknown sweep axis '" + cfg.sweep_axis + "' (expected J or mc_samples)");
      }
      fs::create_directories(dir);
      Json hashed = to_json(cfg);
      hashed["seed"] = seed;
      if (cfg.sweep_axis == "mc_samples") hashed["reference"] = reference;
      const auto hash = config_hash(hashed);
      Json j = stamped({{"config", hashed}, {"rows", Json::array()}}, hash, seed);
      for (const auto& r : rows) j["rows"].push_back(sweep_row_json(r));
      write_json(j, dir / "sweep.json");
      write_text(stamp_csv(sweep_csv(rows, digits), hash, seed), dir / "sweep.csv");
      write_text(stamp_csv(sweep_long_csv(rows, digits), hash, seed), dir / "sweep_long.csv");
      int code = 0;
      for (const auto& r : rows) {
        if (r.ok) {
          out << r.axis << "=" << r.value << ": mean_ll " << format_number(r.eval.mean_per_event, digits);
          if (r.axis == "mc_samples") out << " |delta| " << format_number(r.abs_delta, digits);
          out << "\n";
        } else {
          err << r.axis << "=" << r.value << " failed: " << r.error << "\n";
          if (code == 0) code = r.exit_code;
        }
      }
      return code;
    }

    if (rep->parsed()) {
      apply_model(ov, report_model);
      if (models) ropts.models = split_list(*models);
      if (datasets) ropts.datasets = split_list(*datasets);
      const auto cfg = resolve_config(file, ov);
      const auto seed = cfg.required_seed();
      const fs::path dir = g.out.value_or("report");
      fs::create_directories(dir);
      const auto rows = run_report(cfg, ropts, dir, g.jobs);
      Json hashed = {{"config", to_json(cfg)},
                     {"sequences", ropts.sequences},
                     {"events", ropts.events},
                     {"models", ropts.models},
                     {"datasets", ropts.datasets}};
      const auto hash = config_hash(hashed);
      Json j = stamped({{"config", hashed}, {"rows", Json::array()}}, hash, seed);
      for (const auto& r : rows) {
        Json row = {{"model", r.model}, {"dataset", r.dataset}, {"ok", r.ok}};
        if (r.ok) {
          row["eval"] = to_json(r.eval);
          row["tv"] = r.tv;
          row["best"] = r.best;
          if (r.best) row["p_vs_runner_up"] = r.p_vs_runner_up;
        } else {
          row["error"] = r.error;
        }
        j["rows"].push_back(row);
      }
      write_json(j, dir / "report.json");
      write_text(stamp_csv(report_csv(rows, digits), hash, seed), dir / "table.csv");
      write_text(stamp_csv(report_tv_csv(rows, digits), hash, seed), dir / "tv.csv");
      out << report_csv(rows, digits);
      for (const auto& r : rows) {
        if (!r.ok) {
          err << r.model << " on " << r.dataset << " failed: " << r.error << "\n";
          return r.exit_code;
        }
      }
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return 1;
}

} // namespace unipoint
