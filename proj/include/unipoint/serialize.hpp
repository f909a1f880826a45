#pragma once

#include "unipoint/events.hpp"
#include "unipoint/metrics.hpp"
#include "unipoint/model.hpp"
#include "unipoint/processes.hpp"
#include "unipoint/rmtpp.hpp"
#include "unipoint/train.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <variant>

namespace unipoint {

using Json = nlohmann::json;

inline constexpr int kCheckpointFormatVersion = 1;

using AnyModel = std::variant<UniPointModel, RmtppModel, ParametricProcess>;

struct Checkpoint {
  AnyModel model;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string dataset;
  Split split;
};

/// FNV-1a 64 of the compact dump of `config` (keys are sorted), as 16 hex digits.
[[nodiscard]] std::string config_hash(const Json& config);

[[nodiscard]] Json to_json(const ParametricProcess& proc);
[[nodiscard]] ParametricProcess process_from_json(const Json& j);

[[nodiscard]] Json to_json(const NormStats& norm);
[[nodiscard]] NormStats norm_from_json(const Json& j);

[[nodiscard]] Json to_json(const UniPointModel& model);
[[nodiscard]] UniPointModel unipoint_from_json(const Json& j);
[[nodiscard]] Json to_json(const RmtppModel& model);
[[nodiscard]] RmtppModel rmtpp_from_json(const Json& j);

[[nodiscard]] Json to_json(const Checkpoint& ckpt);
/// Throws ParseError on a malformed document or unknown format version.
[[nodiscard]] Checkpoint checkpoint_from_json(const Json& j);

[[nodiscard]] Json to_json(const FitReport& report);
[[nodiscard]] Json to_json(const MleResult& result);
[[nodiscard]] Json to_json(const EvalReport& report);
[[nodiscard]] EvalReport eval_report_from_json(const Json& j);

/// Scoring interface over a stored model; `model` must outlive the result.
[[nodiscard]] std::unique_ptr<IntensityModel> make_intensity_model(const AnyModel& model);
[[nodiscard]] std::string model_kind(const AnyModel& model);

/// Throws IoError on filesystem failures, ParseError on malformed JSON.
[[nodiscard]] Json read_json(const std::filesystem::path& path);
void write_json(const Json& j, const std::filesystem::path& path);
void write_text(const std::string& text, const std::filesystem::path& path);

} // namespace unipoint
