#pragma once

#include "unipoint/events.hpp"
#include "unipoint/metrics.hpp"
#include "unipoint/processes.hpp"
#include "unipoint/serialize.hpp"
#include "unipoint/train.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace unipoint {

/// Either a dataset file or a generator.
struct DataSpec {
  std::optional<std::string> path;
  std::optional<ParametricProcess> process;
  std::size_t sequences = 2048;
  std::size_t events = 128;
  std::optional<double> t_end; ///< horizon instead of an event count
};

struct ModelSpec {
  std::string kind = "unipoint"; ///< unipoint | rmtpp | exphawkes | plhawkes
  std::string basis = "EXP";
  std::string transfer = "SOFTPLUS";
  std::size_t J = 64;
  std::size_t hidden = 48;
  std::string cell = "RNN";
  bool normalize_eval_times = false;
};

struct ExperimentConfig {
  std::optional<std::uint64_t> seed;
  DataSpec data;
  ModelSpec model;
  TrainConfig train;
  std::size_t eval_mc_samples = 64;
  std::size_t tv_mc_samples = 256;
  std::size_t mle_max_steps = 5000;
  std::string sweep_axis = "J";
  std::vector<std::size_t> sweep_values;

  /// The seed, or ConfigError naming the field.
  [[nodiscard]] std::uint64_t required_seed() const;
};

/// Resolved config as JSON; the config hash is computed from this.
[[nodiscard]] Json to_json(const ExperimentConfig& cfg);
/// Strict: unknown keys and missing process parameters raise ConfigError naming the field.
[[nodiscard]] ExperimentConfig experiment_from_json(const Json& j);
/// defaults <- file <- overrides, by JSON merge patch.
[[nodiscard]] ExperimentConfig resolve_config(const Json& file, const Json& overrides);

/// Process parameters from a flat object such as {"nu":1,"gamma":1}; `where` prefixes field names in errors.
[[nodiscard]] ParametricProcess process_from_params(ProcessKind kind, const Json& params, const std::string& where);

/// Loads `data.path` or simulates `data.process` (sequence i seeded with seed + i).
[[nodiscard]] Dataset materialize(const DataSpec& data, std::uint64_t seed);
[[nodiscard]] std::string dataset_id(const DataSpec& data);

struct TrainOutcome {
  Checkpoint checkpoint;
  Json fit;             ///< FitReport or MleResult, with seed and config hash
  EvalReport test_eval; ///< holdout LL on the test split
};

/// Split, norm stats from the training split, fit, best checkpoint, test evaluation.
[[nodiscard]] TrainOutcome run_train(const ExperimentConfig& cfg, const Dataset& data);

/// Scores `which` ("test" uses the checkpoint's split; "all" scores every sequence).
[[nodiscard]] EvalReport run_evaluate(const Checkpoint& ckpt, const Dataset& data, const std::string& which,
                                      std::size_t mc_samples, std::uint64_t seed, std::size_t jobs = 1);

/// Total variation of a stored model against `truth` on each sequence.
[[nodiscard]] std::vector<double> total_variation_per_sequence(const ParametricProcess& truth, const AnyModel& model,
                                                               std::span<const EventSequence> seqs, std::size_t n_mc,
                                                               std::uint64_t seed);

struct SweepRow {
  std::string axis;
  std::size_t value = 0;
  std::string model;
  std::string dataset;
  EvalReport eval;
  double abs_delta = 0.0;      ///< mc axis: mean |LL(S) - LL(reference)| per event
  double abs_delta_ci95 = 0.0;
  bool ok = false;
  int exit_code = 0;
  std::string error;
};

/// Retrains one model per J value; cells are written under out/J_<value>/.
[[nodiscard]] std::vector<SweepRow> sweep_basis_count(const ExperimentConfig& cfg, const Dataset& data,
                                                      const std::filesystem::path& out, std::size_t jobs);
/// Re-evaluates the checkpoint's test split with S MC samples and differences against `reference` samples.
[[nodiscard]] std::vector<SweepRow> sweep_mc_samples(const Checkpoint& ckpt, const Dataset& data,
                                                     const std::vector<std::size_t>& values, std::size_t reference,
                                                     std::uint64_t seed, std::size_t jobs);

/// Table rows for the comparison report.
struct ReportRow {
  std::string model;
  std::string dataset;
  EvalReport eval;
  std::vector<double> tv;
  bool best = false;
  double p_vs_runner_up = 1.0;
  bool ok = false;
  int exit_code = 0;
  std::string error;
};

struct ReportOptions {
  std::size_t sequences = 2048;
  std::size_t events = 128;
  std::vector<std::string> datasets{"SELF_CORRECTING", "EXP_HAWKES", "DECAYING_SINE"};
  std::vector<std::string> models{"EXP", "PL", "COS", "SIG", "RELU", "MIXED", "exphawkes", "plhawkes", "rmtpp"};
};

/// Trains every model on every synthetic generator and scores LL and total variation on the test split.
[[nodiscard]] std::vector<ReportRow> run_report(const ExperimentConfig& cfg, const ReportOptions& opts,
                                                const std::filesystem::path& out, std::size_t jobs);

/// The paper's generator settings for a synthetic dataset name.
[[nodiscard]] ParametricProcess synthetic_process(const std::string& name);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads; the first exception is rethrown after all workers join.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

/// Exit code for an exception: 2 config, 3 divergence, 4 I/O, 1 otherwise.
[[nodiscard]] int exit_code_for(const std::exception& e);

/// %.{digits}g formatting for CSV cells.
[[nodiscard]] std::string format_number(double x, int digits);
[[nodiscard]] std::string csv_escape(const std::string& s);

[[nodiscard]] std::string sweep_csv(const std::vector<SweepRow>& rows, int digits);
[[nodiscard]] std::string sweep_long_csv(const std::vector<SweepRow>& rows, int digits);
[[nodiscard]] std::string report_csv(const std::vector<ReportRow>& rows, int digits);
[[nodiscard]] std::string report_tv_csv(const std::vector<ReportRow>& rows, int digits);
[[nodiscard]] std::string eval_csv(const std::vector<EvalReport>& reports, int digits);

} // namespace unipoint
