#include "unipoint/train.hpp"

#include "unipoint/error.hpp"
#include "unipoint/rng.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace unipoint {

double validation_nll(const UniPointModel& model, std::span<const EventSequence> val, std::size_t mc_samples,
                      std::uint64_t seed) {
  Rng rng(seed);
  double total = 0.0;
  std::size_t events = 0;
  for (const auto& seq : val) {
    total += nll(model, seq, mc_samples, rng);
    events += seq.size();
  }
  return total / static_cast<double>(std::max<std::size_t>(events, 1));
}

double validation_nll(const RmtppModel& model, std::span<const EventSequence> val) {
  double total = 0.0;
  std::size_t events = 0;
  for (const auto& seq : val) {
    total += nll(model, seq);
    events += seq.size();
  }
  return total / static_cast<double>(std::max<std::size_t>(events, 1));
}

namespace {

constexpr std::uint64_t kValidationStream = 0x5eed'0000'0000'0001ULL;

struct UniPointOps {
  const TrainConfig& cfg;
  std::uint64_t val_seed;

  double step_loss(UniPointModel& model, std::span<const EventSequence> batch, Rng& rng, UniPointModel& grad) const {
    auto tape = forward(model, batch, cfg.mc_samples_train, rng);
    const double loss = tape.loss();
    if (std::isfinite(loss)) grad = backward(tape);
    return loss;
  }
  double validate(const UniPointModel& model, std::span<const EventSequence> val) const {
    return validation_nll(model, val, cfg.mc_samples_eval, val_seed);
  }
};

struct RmtppOps {
  double step_loss(RmtppModel& model, std::span<const EventSequence> batch, Rng&, RmtppModel& grad) const {
    auto tape = forward(model, batch);
    const double loss = tape.loss();
    if (std::isfinite(loss)) grad = backward(tape);
    return loss;
  }
  double validate(const RmtppModel& model, std::span<const EventSequence> val) const {
    return validation_nll(model, val);
  }
};

template <class Model>
std::vector<std::span<double>> param_spans(Model& m) {
  std::vector<std::span<double>> out;
  Model::visit(m, [&](const std::string&, const Shape&, std::span<double> v) { out.push_back(v); });
  return out;
}

template <class Model>
std::vector<std::span<const double>> const_param_spans(const Model& m) {
  std::vector<std::span<const double>> out;
  Model::visit(m, [&](const std::string&, const Shape&, std::span<const double> v) { out.push_back(v); });
  return out;
}

template <class Model, class Ops>
FitReport run_training(Model& model, std::span<const EventSequence> train_set, std::span<const EventSequence> val_set,
                       const TrainConfig& cfg, const Ops& ops) {
  if (train_set.empty()) throw PreconditionError("training set is empty");
  if (val_set.empty()) throw PreconditionError("validation set is empty");
  if (cfg.batch_size == 0 || cfg.mc_samples_train == 0 || cfg.mc_samples_eval == 0 || cfg.early_stop_patience == 0 ||
      cfg.max_epochs == 0) {
    throw ConfigError("train config values must be positive");
  }

  FitReport report;
  report.seed = cfg.seed;
  AdamState adam;
  adam.config = cfg.adam;
  EarlyStopper stopper(cfg.early_stop_delta, cfg.early_stop_patience);
  Model best = model;
  Model grad = zeros_like(model);

  std::vector<std::size_t> order(train_set.size());
  std::vector<EventSequence> batch;
  for (std::size_t epoch = 0; epoch < cfg.max_epochs && !report.early_stopped; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(stream_seed(cfg.seed, 2 * epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.index(i)]);

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t k = start; k < stop; ++k) batch.push_back(train_set[order[k]]);

      Rng mc_rng(stream_seed(cfg.seed, 2 * report.steps + 1));
      const double loss = ops.step_loss(model, batch, mc_rng, grad);
      ++report.steps;
      if (!std::isfinite(loss)) {
        throw DivergenceError("non-finite training loss at mini-batch " + std::to_string(report.steps) +
                              " (epoch " + std::to_string(epoch + 1) + ")");
      }
      report.train_loss.push_back(loss);
      const auto params = param_spans(model);
      const auto grads = const_param_spans(grad);
      adam_step(adam, params, grads);

      const double val = ops.validate(model, val_set);
      report.val_loss.push_back(val);
      if (val < report.best_val_loss) {
        report.best_val_loss = val;
        report.best_step = report.steps;
        best = model;
      }
      if (stopper.update(val)) {
        report.early_stopped = true;
        break;
      }
    }
    report.epochs = epoch + 1;
  }
  model = std::move(best);
  return report;
}

} // namespace

FitReport train(UniPointModel& model, std::span<const EventSequence> train_set, std::span<const EventSequence> val_set,
                const TrainConfig& cfg) {
  return run_training(model, train_set, val_set, cfg, UniPointOps{cfg, stream_seed(cfg.seed, kValidationStream)});
}

FitReport train(RmtppModel& model, std::span<const EventSequence> train_set, std::span<const EventSequence> val_set,
                const TrainConfig& cfg) {
  return run_training(model, train_set, val_set, cfg, RmtppOps{});
}

FitReport train(UniPointModel& model, const Dataset& data, const Split& split, const TrainConfig& cfg) {
  const auto tr = data.subset(split.train);
  const auto va = data.subset(split.val);
  return train(model, std::span<const EventSequence>(tr), std::span<const EventSequence>(va), cfg);
}

FitReport train(RmtppModel& model, const Dataset& data, const Split& split, const TrainConfig& cfg) {
  const auto tr = data.subset(split.train);
  const auto va = data.subset(split.val);
  return train(model, std::span<const EventSequence>(tr), std::span<const EventSequence>(va), cfg);
}

} // namespace unipoint
