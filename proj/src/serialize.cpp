#include "unipoint/serialize.hpp"

#include "unipoint/error.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace unipoint {

std::string config_hash(const Json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

template <class T>
T get_field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("field '") + key + "': " + e.what());
  }
}

template <class Model>
Json params_json(const Model& m) {
  Json out = Json::object();
  Model::visit(m, [&](const std::string& name, const Shape& shape, std::span<const double> v) {
    out[name] = {{"shape", shape}, {"values", std::vector<double>(v.begin(), v.end())}};
  });
  return out;
}

template <class Model>
void load_params(Model& m, const Json& params) {
  if (!params.is_object()) throw ParseError("'params' must be an object");
  std::size_t seen = 0;
  Model::visit(m, [&](const std::string& name, const Shape& shape, std::span<double> v) {
    if (!params.contains(name)) throw ParseError("missing parameter tensor '" + name + "'");
    const auto& t = params.at(name);
    if (get_field<Shape>(t, "shape") != shape) throw ParseError("parameter '" + name + "' has the wrong shape");
    const auto values = get_field<std::vector<double>>(t, "values");
    if (values.size() != v.size()) throw ParseError("parameter '" + name + "' has the wrong size");
    std::copy(values.begin(), values.end(), v.begin());
    ++seen;
  });
  if (seen != params.size()) throw ParseError("checkpoint has unexpected parameter tensors");
}

Json split_json(const Split& s) { return {{"train", s.train}, {"val", s.val}, {"test", s.test}}; }

Split split_from_json(const Json& j) {
  Split s;
  if (j.is_null()) return s;
  s.train = get_field<std::vector<std::size_t>>(j, "train");
  s.val = get_field<std::vector<std::size_t>>(j, "val");
  s.test = get_field<std::vector<std::size_t>>(j, "test");
  return s;
}

} // namespace

Json to_json(const ParametricProcess& proc) {
  Json j = {{"kind", std::string(to_string(proc.kind()))}};
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, ExpHawkesParams>) {
          j.update({{"mu", p.mu}, {"alpha", p.alpha}, {"beta", p.beta}});
        } else if constexpr (std::is_same_v<P, PlHawkesParams>) {
          j.update({{"mu", p.mu}, {"alpha", p.alpha}, {"beta", p.beta}, {"delta", p.delta}});
        } else if constexpr (std::is_same_v<P, SelfCorrectingParams>) {
          j.update({{"nu", p.nu}, {"gamma", p.gamma}});
        } else {
          j.update({{"mu", p.mu}, {"alpha", p.alpha}, {"beta", p.beta}, {"gamma", p.gamma}});
        }
      },
      proc.params());
  return j;
}

ParametricProcess process_from_json(const Json& j) {
  ProcessKind kind;
  try {
    kind = parse_process_kind(get_field<std::string>(j, "kind"));
  } catch (const ConfigError& e) {
    throw ParseError(e.what());
  }
  const auto d = [&](const char* k) { return get_field<double>(j, k); };
  switch (kind) {
    case ProcessKind::ExpHawkes: return ParametricProcess::exp_hawkes(d("mu"), d("alpha"), d("beta"));
    case ProcessKind::PlHawkes: return ParametricProcess::pl_hawkes(d("mu"), d("alpha"), d("beta"), d("delta"));
    case ProcessKind::SelfCorrecting: return ParametricProcess::self_correcting(d("nu"), d("gamma"));
    case ProcessKind::DecayingSine:
      return ParametricProcess::decaying_sine(d("mu"), d("alpha"), d("beta"), d("gamma"));
  }
  throw ParseError("unknown process kind");
}

Json to_json(const NormStats& norm) {
  return {{"mean_tau", norm.mean_tau}, {"std_tau", norm.std_tau}, {"normalize_eval_times", norm.normalize_eval_times}};
}

NormStats norm_from_json(const Json& j) {
  return NormStats{get_field<double>(j, "mean_tau"), get_field<double>(j, "std_tau"),
                   get_field<bool>(j, "normalize_eval_times")};
}

Json to_json(const UniPointModel& model) {
  return {{"kind", "unipoint"},
          {"basis", model.basis.to_string()},
          {"transfer", std::string(to_string(model.transfer))},
          {"cell", std::string(to_string(cell_type(model.encoder)))},
          {"hidden", model.hidden()},
          {"J", model.basis.terms()},
          {"norm", to_json(model.norm)},
          {"params", params_json(model)}};
}

UniPointModel unipoint_from_json(const Json& j) {
  try {
    const auto basis = BasisSpec::parse(get_field<std::string>(j, "basis"), get_field<std::size_t>(j, "J"));
    auto m = UniPointModel::create(basis, parse_transfer_kind(get_field<std::string>(j, "transfer")),
                                   parse_cell_type(get_field<std::string>(j, "cell")),
                                   get_field<std::size_t>(j, "hidden"), norm_from_json(j.at("norm")), 0);
    if (m.basis.terms() != get_field<std::size_t>(j, "J")) throw ParseError("basis term count does not match J");
    load_params(m, j.at("params"));
    return m;
  } catch (const ConfigError& e) {
    throw ParseError(e.what());
  }
}

Json to_json(const RmtppModel& model) {
  return {{"kind", "rmtpp"}, {"hidden", model.hidden()}, {"norm", to_json(model.norm)},
          {"params", params_json(model)}};
}

RmtppModel rmtpp_from_json(const Json& j) {
  auto m = RmtppModel::create(get_field<std::size_t>(j, "hidden"), norm_from_json(j.at("norm")), 0);
  load_params(m, j.at("params"));
  return m;
}

std::string model_kind(const AnyModel& model) {
  switch (model.index()) {
    case 0: return "unipoint";
    case 1: return "rmtpp";
    default: return "parametric";
  }
}

Json to_json(const Checkpoint& ckpt) {
  Json model = std::visit([](const auto& m) -> Json { return to_json(m); }, ckpt.model);
  return {{"format_version", kCheckpointFormatVersion},
          {"model_kind", model_kind(ckpt.model)},
          {"model", model},
          {"seed", ckpt.seed},
          {"config_hash", ckpt.config_hash},
          {"dataset", ckpt.dataset},
          {"split", split_json(ckpt.split)}};
}

Checkpoint checkpoint_from_json(const Json& j) {
  if (get_field<int>(j, "format_version") != kCheckpointFormatVersion) {
    throw ParseError("unsupported checkpoint format_version");
  }
  const auto kind = get_field<std::string>(j, "model_kind");
  const Json& m = j.at("model");
  Checkpoint c{kind == "unipoint" ? AnyModel(unipoint_from_json(m))
               : kind == "rmtpp"  ? AnyModel(rmtpp_from_json(m))
               : kind == "parametric"
                   ? AnyModel(process_from_json(m))
                   : throw ParseError("unknown model_kind '" + kind + "'"),
               0, "", "", {}};
  c.seed = get_field<std::uint64_t>(j, "seed");
  c.config_hash = get_field<std::string>(j, "config_hash");
  c.dataset = get_field<std::string>(j, "dataset");
  c.split = split_from_json(j.value("split", Json()));
  return c;
}

Json to_json(const FitReport& r) {
  return {{"train_loss", r.train_loss}, {"val_loss", r.val_loss}, {"best_val_loss", r.best_val_loss},
          {"best_step", r.best_step},   {"steps", r.steps},       {"epochs", r.epochs},
          {"early_stopped", r.early_stopped}, {"seed", r.seed}};
}

Json to_json(const MleResult& r) {
  return {{"process", to_json(r.process)}, {"nll", r.nll},           {"nll_per_event", r.nll_per_event},
          {"grad_norm", r.grad_norm},      {"steps", r.steps},       {"converged", r.converged},
          {"warning", r.warning}};
}

Json to_json(const EvalReport& r) {
  return {{"model", r.model},
          {"dataset", r.dataset},
          {"seed", r.seed},
          {"mc_samples", r.mc_samples},
          {"n", r.n()},
          {"mean_ll", r.mean},
          {"ci95", r.ci95},
          {"mean_ll_per_event", r.mean_per_event},
          {"ci95_per_event", r.ci95_per_event},
          {"ll", r.ll},
          {"ll_per_event", r.ll_per_event}};
}

EvalReport eval_report_from_json(const Json& j) {
  EvalReport r;
  r.model = get_field<std::string>(j, "model");
  r.dataset = get_field<std::string>(j, "dataset");
  r.seed = get_field<std::uint64_t>(j, "seed");
  r.mc_samples = get_field<std::size_t>(j, "mc_samples");
  r.mean = get_field<double>(j, "mean_ll");
  r.ci95 = get_field<double>(j, "ci95");
  r.mean_per_event = get_field<double>(j, "mean_ll_per_event");
  r.ci95_per_event = get_field<double>(j, "ci95_per_event");
  r.ll = get_field<std::vector<double>>(j, "ll");
  r.ll_per_event = get_field<std::vector<double>>(j, "ll_per_event");
  return r;
}

std::unique_ptr<IntensityModel> make_intensity_model(const AnyModel& model) {
  return std::visit(
      [](const auto& m) -> std::unique_ptr<IntensityModel> {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, UniPointModel>) {
          return std::make_unique<UniPointAdapter>(m);
        } else if constexpr (std::is_same_v<M, RmtppModel>) {
          return std::make_unique<RmtppAdapter>(m);
        } else {
          return std::make_unique<ParametricModel>(m);
        }
      },
      model);
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return Json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_text(const std::string& text, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void write_json(const Json& j, const std::filesystem::path& path) { write_text(j.dump(2) + "\n", path); }

} // namespace unipoint
