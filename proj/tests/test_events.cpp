#include <doctest.h>

#include "unipoint/error.hpp"
#include "unipoint/events.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

using namespace unipoint;

TEST_CASE("event sequence invariants") {
  const EventSequence s({0.5, 1.2}, 2.0);
  CHECK(s.size() == 2);
  CHECK(s.interarrival(0) == 0.5);
  CHECK(s.interarrival(1) == doctest::Approx(0.7));
  CHECK(s.tail() == doctest::Approx(0.8));

  CHECK_THROWS_AS(EventSequence({1.2, 0.5}, 2.0), ValidationError);
  CHECK_THROWS_AS(EventSequence({0.5, 0.5}, 2.0), ValidationError);
  CHECK_THROWS_AS(EventSequence({0.0}, 2.0), ValidationError);
  CHECK_THROWS_AS(EventSequence({2.5}, 2.0), ValidationError);
  CHECK_THROWS_AS(EventSequence({}, 0.0), ValidationError);
  CHECK_NOTHROW(EventSequence({2.0}, 2.0));
  CHECK(EventSequence({}, 3.0).tail() == 3.0);
}

TEST_CASE("parse dataset lines") {
  const auto d = parse_dataset("{\"times\":[0.5,1.2],\"t_end\":2.0}\n");
  REQUIRE(d.size() == 1);
  CHECK(d.sequences[0].size() == 2);
  CHECK(d.sequences[0].t_end() == 2.0);

  const auto marks = parse_dataset("{\"times\":[1],\"t_end\":2,\"marks\":[3]}\n\n{\"times\":[],\"t_end\":1}\n");
  CHECK(marks.size() == 2);
  CHECK(marks.sequences[1].empty());
}

TEST_CASE("parse errors carry the line number") {
  try {
    (void)parse_dataset("{\"times\":[0.5],\"t_end\":2.0}\n{\"times\":[1.2,0.5],\"t_end\":2.0}\n");
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  try {
    (void)parse_dataset("{\"times\":[0.5],\"t_end\":2.0}\n{oops\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS((void)parse_dataset("{\"times\":\"x\",\"t_end\":2.0}"), ParseError);
  CHECK_THROWS_AS((void)parse_dataset("[1,2]"), ParseError);
}

TEST_CASE("empty dataset") {
  try {
    (void)parse_dataset("");
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("empty dataset") != std::string::npos);
  }
  CHECK_THROWS_AS((void)parse_dataset("\n\n"), ValidationError);
}

TEST_CASE("dataset round trip") {
  Dataset d;
  d.sequences.emplace_back(std::vector<double>{0.1, 1.0 / 3.0, 2.718281828459045}, 3.14159);
  d.sequences.emplace_back(std::vector<double>{}, 1.0);
  d.sequences.emplace_back(std::vector<double>{1e-300, 1e-10, 7.0}, 7.0);

  const auto text = format_dataset(d);
  CHECK(parse_dataset(text) == d);
  CHECK(format_dataset(parse_dataset(text)) == text);

  const auto path = std::filesystem::temp_directory_path() / "unipoint_events_roundtrip.jsonl";
  save_dataset(d, path);
  CHECK(load_dataset(path) == d);
  std::filesystem::remove(path);

  CHECK_THROWS_AS((void)load_dataset("/nonexistent/dir/file.jsonl"), IoError);
}

TEST_CASE("norm stats") {
  SUBCASE("zero variance") {
    const std::vector<EventSequence> s{EventSequence({1, 2, 3}, 3)};
    CHECK_THROWS_AS((void)compute_norm_stats(s), DegenerateError);
  }
  SUBCASE("pooled sample statistics") {
    // interarrivals {1, 2, 2}: mean 5/3, sample variance ((2/3)^2 + 2 (1/3)^2) / 2 = 1/3
    const std::vector<EventSequence> s{EventSequence({1, 3}, 3), EventSequence({2}, 2)};
    const auto n = compute_norm_stats(s);
    CHECK(n.mean_tau == doctest::Approx(5.0 / 3.0).epsilon(1e-14));
    CHECK(n.std_tau == doctest::Approx(std::sqrt(1.0 / 3.0)).epsilon(1e-14));
    CHECK_FALSE(n.normalize_eval_times);
    CHECK(compute_norm_stats(s, true).normalize_eval_times);
  }
  SUBCASE("single interarrival") {
    const std::vector<EventSequence> s{EventSequence({1}, 3)};
    CHECK_THROWS_AS((void)compute_norm_stats(s), PreconditionError);
  }
  SUBCASE("standardized interarrivals have unit sd") {
    const std::vector<EventSequence> s{EventSequence({0.3, 0.4, 2.0, 2.05}, 3), EventSequence({1.5, 9.0}, 9)};
    const auto n = compute_norm_stats(s);
    std::vector<double> z;
    for (const auto& q : s)
      for (std::size_t i = 0; i < q.size(); ++i) z.push_back(n.standardize(q.interarrival(i)));
    const double mean = std::accumulate(z.begin(), z.end(), 0.0) / static_cast<double>(z.size());
    double ss = 0.0;
    for (double v : z) ss += (v - mean) * (v - mean);
    CHECK(std::abs(mean) < 1e-12);
    CHECK(std::abs(std::sqrt(ss / static_cast<double>(z.size() - 1)) - 1.0) < 1e-9);
  }
}

TEST_CASE("split sizes") {
  const auto a = split_dataset(10, kDefaultSplitFractions, 1);
  CHECK(a.train.size() == 6);
  CHECK(a.val.size() == 2);
  CHECK(a.test.size() == 2);
  const auto b = split_dataset(5, kDefaultSplitFractions, 1);
  CHECK(b.train.size() == 3);
  CHECK(b.val.size() == 1);
  CHECK(b.test.size() == 1);

  const auto c = split_dataset(10, kDefaultSplitFractions, 1);
  CHECK(a.train == c.train);
  CHECK(a.val == c.val);
  CHECK(a.test == c.test);

  CHECK_THROWS_AS((void)split_dataset(10, {0.5, 0.2, 0.2}, 1), PreconditionError);
  CHECK_THROWS_AS((void)split_dataset(10, {1.0, 0.0, 0.0}, 1), PreconditionError);
}

TEST_CASE("split is a partition for any size and seed") {
  for (std::size_t n = 3; n < 60; n += 7) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto s = split_dataset(n, kDefaultSplitFractions, seed);
      std::vector<std::size_t> all;
      all.insert(all.end(), s.train.begin(), s.train.end());
      all.insert(all.end(), s.val.begin(), s.val.end());
      all.insert(all.end(), s.test.begin(), s.test.end());
      std::sort(all.begin(), all.end());
      std::vector<std::size_t> expect(n);
      std::iota(expect.begin(), expect.end(), std::size_t{0});
      CHECK(all == expect);
    }
  }
}
