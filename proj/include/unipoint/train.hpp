#pragma once

#include "unipoint/events.hpp"
#include "unipoint/model.hpp"
#include "unipoint/nn.hpp"
#include "unipoint/rmtpp.hpp"

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace unipoint {

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t mc_samples_train = 1;
  std::size_t mc_samples_eval = 64;
  double early_stop_delta = 1e-4;
  std::size_t early_stop_patience = 100; ///< counted in mini-batches
  std::size_t max_epochs = 200;
  std::uint64_t seed = 0;
  AdamConfig adam;
};

/// Patience-based stopping on a stream of validation losses.
///
/// A loss counts as an improvement only if it beats the reference value by more
/// than `delta`; the reference moves only on such improvements.
class EarlyStopper {
public:
  EarlyStopper(double delta, std::size_t patience) : delta_(delta), patience_(patience) {}

  /// Feeds one validation loss; returns true when training should stop.
  bool update(double loss) {
    if (!seen_ || loss < reference_ - delta_) {
      reference_ = loss;
      stale_ = 0;
      seen_ = true;
    } else {
      ++stale_;
    }
    return stale_ >= patience_;
  }

  [[nodiscard]] std::size_t stale() const { return stale_; }
  [[nodiscard]] double reference() const { return reference_; }

private:
  double delta_;
  std::size_t patience_;
  double reference_ = std::numeric_limits<double>::infinity();
  std::size_t stale_ = 0;
  bool seen_ = false;
};

struct FitReport {
  std::vector<double> train_loss; ///< mean per-sequence NLL of each mini-batch
  std::vector<double> val_loss;   ///< validation NLL per event after each mini-batch
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::size_t best_step = 0;      ///< 1-based mini-batch index of the kept checkpoint
  std::size_t steps = 0;
  std::size_t epochs = 0;
  bool early_stopped = false;
  std::uint64_t seed = 0;

  friend bool operator==(const FitReport&, const FitReport&) = default;
};

/// Mini-batch Adam on the per-sequence NLL with validation after every mini-batch.
/// On return `model` holds the parameters with the best validation loss.
/// Throws DivergenceError if a training loss is non-finite.
FitReport train(UniPointModel& model, std::span<const EventSequence> train_set,
                std::span<const EventSequence> val_set, const TrainConfig& cfg);
FitReport train(RmtppModel& model, std::span<const EventSequence> train_set,
                std::span<const EventSequence> val_set, const TrainConfig& cfg);

/// Convenience overloads taking a dataset and split indices.
FitReport train(UniPointModel& model, const Dataset& data, const Split& split, const TrainConfig& cfg);
FitReport train(RmtppModel& model, const Dataset& data, const Split& split, const TrainConfig& cfg);

/// Validation criterion: total NLL / total events. The MC stream is re-seeded from `seed`
/// on every call so successive checks use common random numbers.
[[nodiscard]] double validation_nll(const UniPointModel& model, std::span<const EventSequence> val,
                                    std::size_t mc_samples, std::uint64_t seed);
[[nodiscard]] double validation_nll(const RmtppModel& model, std::span<const EventSequence> val);

} // namespace unipoint
