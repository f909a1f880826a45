#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace unipoint {

/// Ordered event times on the observation window (0, t_end].
///
/// Construction validates the invariants; the object is immutable afterwards.
class EventSequence {
public:
  EventSequence() = default;
  /// Throws ValidationError unless times are strictly increasing, lie in (0, t_end] and t_end > 0.
  EventSequence(std::vector<double> times, double t_end);

  [[nodiscard]] std::span<const double> times() const { return times_; }
  [[nodiscard]] double t_end() const { return t_end_; }
  [[nodiscard]] std::size_t size() const { return times_.size(); }
  [[nodiscard]] bool empty() const { return times_.empty(); }
  [[nodiscard]] double operator[](std::size_t i) const { return times_[i]; }

  /// times[i] - times[i-1], with times[-1] taken as 0.
  [[nodiscard]] double interarrival(std::size_t i) const {
    return i == 0 ? times_[0] : times_[i] - times_[i - 1];
  }
  /// Length of the final event-free interval (t_N, t_end]; zero when t_end is the last event.
  [[nodiscard]] double tail() const { return t_end_ - (times_.empty() ? 0.0 : times_.back()); }

  friend bool operator==(const EventSequence&, const EventSequence&) = default;

private:
  std::vector<double> times_;
  double t_end_ = 1.0;
};

/// Interarrival statistics used to standardize RNN inputs and (optionally) rescale evaluation times.
struct NormStats {
  double mean_tau = 0.0;
  double std_tau = 1.0;
  bool normalize_eval_times = false;

  [[nodiscard]] double standardize(double tau) const { return (tau - mean_tau) / std_tau; }
  /// Time scaling applied before intensity evaluation.
  [[nodiscard]] double eval_time(double tau) const {
    return normalize_eval_times ? tau / std_tau : tau;
  }
  [[nodiscard]] double eval_scale() const { return normalize_eval_times ? 1.0 / std_tau : 1.0; }

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

struct Dataset {
  std::vector<EventSequence> sequences;
  std::optional<NormStats> norm;

  [[nodiscard]] std::size_t size() const { return sequences.size(); }
  [[nodiscard]] std::size_t total_events() const;
  [[nodiscard]] std::vector<EventSequence> subset(std::span<const std::size_t> indices) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

inline constexpr std::array<double, 3> kDefaultSplitFractions{0.6, 0.2, 0.2};

/// Reads the JSON-lines dataset format. Errors carry the 1-based line number.
[[nodiscard]] Dataset load_dataset(const std::filesystem::path& path);
[[nodiscard]] Dataset parse_dataset(std::string_view text);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
[[nodiscard]] std::string format_dataset(const Dataset& dataset);
/// One JSONL record, doubles printed with 17 significant digits.
[[nodiscard]] std::string format_sequence(const EventSequence& seq);

/// Pooled sample mean and (n-1) standard deviation of all interarrivals.
[[nodiscard]] NormStats compute_norm_stats(std::span<const EventSequence> train,
                                           bool normalize_eval_times = false);

/// Seeded shuffle then contiguous partition: floor(f0*N), floor(f1*N), remainder.
[[nodiscard]] Split split_dataset(std::size_t n, std::array<double, 3> fractions, std::uint64_t seed);
[[nodiscard]] inline Split split_dataset(const Dataset& d, std::array<double, 3> fractions,
                                         std::uint64_t seed) {
  return split_dataset(d.size(), fractions, seed);
}

} // namespace unipoint
