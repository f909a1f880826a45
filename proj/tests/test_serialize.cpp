#include <doctest.h>

#include "unipoint/error.hpp"
#include "unipoint/serialize.hpp"

#include <filesystem>

using namespace unipoint;

namespace {

template <class Model>
std::vector<double> flat(const Model& m) {
  std::vector<double> out;
  Model::visit(m, [&](const std::string&, const Shape&, std::span<const double> v) {
    out.insert(out.end(), v.begin(), v.end());
  });
  return out;
}

} // namespace

TEST_CASE("UNIPoint checkpoint round trip") {
  for (CellType cell : {CellType::Rnn, CellType::Lstm}) {
    const auto m = UniPointModel::create(BasisSpec::parse("MIXED(PL3+RELU2)", 5), TransferKind::MaxSig, cell, 4,
                                         NormStats{0.7, 1.3, true}, 11);
    Checkpoint c{m, 42, "abc", "data.jsonl", Split{{0, 2}, {1}, {3}}};
    const auto j = to_json(c);
    CHECK(j["format_version"] == kCheckpointFormatVersion);
    CHECK(j["model"]["basis"] == "MIXED(PL3+RELU2)");
    CHECK(j["model"]["params"]["head.A"]["shape"] == Json::array({10, 4}));
    const auto back = checkpoint_from_json(Json::parse(j.dump()));
    const auto& m2 = std::get<UniPointModel>(back.model);
    CHECK(flat(m2) == flat(m));
    CHECK(m2.norm == m.norm);
    CHECK(m2.basis == m.basis);
    CHECK(m2.transfer == m.transfer);
    CHECK(back.seed == 42);
    CHECK(back.split.train == c.split.train);
    CHECK(back.dataset == "data.jsonl");
  }
}

TEST_CASE("RMTPP and parametric checkpoints") {
  const auto r = RmtppModel::create(3, NormStats{0.2, 0.5, false}, 4);
  const auto rb = checkpoint_from_json(to_json(Checkpoint{r}));
  CHECK(flat(std::get<RmtppModel>(rb.model)) == flat(r));

  for (const auto& p : {ParametricProcess::exp_hawkes(0.5, 0.8, 1.0), ParametricProcess::pl_hawkes(0.1, 0.2, 0.3, 0.5),
                        ParametricProcess::self_correcting(1.0, 2.0),
                        ParametricProcess::decaying_sine(0.5, 3.0, 2.0, 1.0)}) {
    const auto back = process_from_json(to_json(p));
    CHECK(to_json(back) == to_json(p));
  }
}

TEST_CASE("malformed checkpoints") {
  const auto m = UniPointModel::create(BasisSpec(BasisKind::Exp, 2), TransferKind::Softplus, CellType::Rnn, 2,
                                       NormStats{}, 1);
  auto j = to_json(Checkpoint{m});
  auto bad_version = j;
  bad_version["format_version"] = 99;
  CHECK_THROWS_AS((void)checkpoint_from_json(bad_version), ParseError);
  auto bad_shape = j;
  bad_shape["model"]["params"]["head.A"]["shape"] = Json::array({2, 2});
  CHECK_THROWS_AS((void)checkpoint_from_json(bad_shape), ParseError);
  auto missing = j;
  missing["model"]["params"].erase("rnn.W");
  CHECK_THROWS_AS((void)checkpoint_from_json(missing), ParseError);
  auto kind = j;
  kind["model_kind"] = "transformer";
  CHECK_THROWS_AS((void)checkpoint_from_json(kind), ParseError);
  auto basis = j;
  basis["model"]["basis"] = "GAUSS";
  CHECK_THROWS_AS((void)checkpoint_from_json(basis), ParseError);
}

TEST_CASE("config hash") {
  const Json a = {{"b", 1}, {"a", {1, 2}}};
  const Json b = Json::parse(R"({"a":[1,2],"b":1})");
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  CHECK(config_hash(a) != config_hash(Json{{"b", 2}, {"a", {1, 2}}}));
}

TEST_CASE("reports and files") {
  EvalReport r;
  r.model = "X";
  r.dataset = "d";
  r.seed = 3;
  r.ll = {-1.0, -2.5};
  r.ll_per_event = {-0.5, -1.25};
  r.mean = -1.75;
  r.ci95 = 0.3;
  CHECK(eval_report_from_json(to_json(r)) == r);

  const auto dir = std::filesystem::temp_directory_path() / "unipoint_serialize_test";
  std::filesystem::create_directories(dir);
  write_json(to_json(r), dir / "r.json");
  CHECK(eval_report_from_json(read_json(dir / "r.json")) == r);
  write_text("{nope", dir / "bad.json");
  CHECK_THROWS_AS((void)read_json(dir / "bad.json"), ParseError);
  CHECK_THROWS_AS((void)read_json(dir / "missing.json"), IoError);
  CHECK_THROWS_AS(write_text("x", dir / "no" / "such" / "dir.json"), IoError);
  std::filesystem::remove_all(dir);
}
