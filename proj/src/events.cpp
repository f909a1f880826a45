#include "unipoint/events.hpp"

#include "unipoint/error.hpp"
#include "unipoint/rng.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace unipoint {

using nlohmann::json;

EventSequence::EventSequence(std::vector<double> times, double t_end)
    : times_(std::move(times)), t_end_(t_end) {
  if (!(std::isfinite(t_end_) && t_end_ > 0.0)) {
    throw ValidationError("t_end must be finite and positive");
  }
  double prev = 0.0;
  for (std::size_t i = 0; i < times_.size(); ++i) {
    const double t = times_[i];
    if (!std::isfinite(t)) {
      throw ValidationError("event " + std::to_string(i) + " is not finite");
    }
    if (t <= prev) {
      throw ValidationError(i == 0 ? "event times must be positive"
                                   : "event times must be strictly increasing (index " +
                                         std::to_string(i) + ")");
    }
    if (t > t_end_) {
      throw ValidationError("event " + std::to_string(i) + " lies after t_end");
    }
    prev = t;
  }
}

std::size_t Dataset::total_events() const {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.size();
  return n;
}

std::vector<EventSequence> Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<EventSequence> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(sequences.at(i));
  return out;
}

namespace {

EventSequence parse_record(const std::string& line, std::size_t lineno) {
  const auto where = "line " + std::to_string(lineno) + ": ";
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(where + "malformed JSON (" + e.what() + ")");
  }
  if (!obj.is_object() || !obj.contains("times") || !obj.contains("t_end")) {
    throw ParseError(where + "expected an object with \"times\" and \"t_end\"");
  }
  const auto& jt = obj["times"];
  const auto& jend = obj["t_end"];
  if (!jt.is_array() || !jend.is_number()) {
    throw ParseError(where + "\"times\" must be an array and \"t_end\" a number");
  }
  std::vector<double> times;
  times.reserve(jt.size());
  for (const auto& v : jt) {
    if (!v.is_number()) throw ParseError(where + "non-numeric event time");
    times.push_back(v.get<double>());
  }
  try {
    return EventSequence(std::move(times), jend.get<double>());
  } catch (const ValidationError& e) {
    throw ValidationError(where + e.what());
  }
}

bool blank(const std::string& s) {
  return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

void append_double(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

} // namespace

Dataset parse_dataset(std::string_view text) {
  Dataset d;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    d.sequences.push_back(parse_record(line, lineno));
  }
  if (d.sequences.empty()) throw ValidationError("empty dataset");
  return d;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str());
}

std::string format_sequence(const EventSequence& seq) {
  std::string out = "{\"times\":[";
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) out += ',';
    append_double(out, seq[i]);
  }
  out += "],\"t_end\":";
  append_double(out, seq.t_end());
  out += '}';
  return out;
}

std::string format_dataset(const Dataset& dataset) {
  std::string out;
  for (const auto& s : dataset.sequences) {
    out += format_sequence(s);
    out += '\n';
  }
  return out;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset " + path.string());
  out << format_dataset(dataset);
  if (!out) throw IoError("write failed for " + path.string());
}

NormStats compute_norm_stats(std::span<const EventSequence> train, bool normalize_eval_times) {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;
  // Welford
  for (const auto& seq : train) {
    for (std::size_t i = 0; i < seq.size(); ++i) {
      const double tau = seq.interarrival(i);
      ++n;
      const double d = tau - mean;
      mean += d / static_cast<double>(n);
      m2 += d * (tau - mean);
    }
  }
  if (n < 2) throw PreconditionError("norm stats need at least 2 interarrival times");
  const double sd = std::sqrt(m2 / static_cast<double>(n - 1));
  if (!(sd > 0.0)) throw DegenerateError("interarrival standard deviation is zero");
  return NormStats{mean, sd, normalize_eval_times};
}

Split split_dataset(std::size_t n, std::array<double, 3> fractions, std::uint64_t seed) {
  for (double f : fractions) {
    if (!(f > 0.0)) throw PreconditionError("split fractions must be positive");
  }
  if (std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) > 1e-9) {
    throw PreconditionError("split fractions must sum to 1");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[rng.index(i)]);
  }
  // The epsilon absorbs products like 0.6 * 5 = 2.9999999999999996.
  const auto count = [n](double f) {
    return static_cast<std::size_t>(std::floor(f * static_cast<double>(n) + 1e-9));
  };
  const std::size_t n_train = count(fractions[0]);
  const std::size_t n_val = std::min(count(fractions[1]), n - n_train);
  Split s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
               order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return s;
}

} // namespace unipoint
