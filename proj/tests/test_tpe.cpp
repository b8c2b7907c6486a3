#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "sprintopt/errors.hpp"
#include "sprintopt/tpe.hpp"

using namespace sprintopt;

namespace {

std::vector<Trial> history_1d(const SearchSpace& space, int n, std::uint64_t seed) {
  std::vector<Trial> ts;
  for (int i = 0; i < n; ++i) {
    Trial t;
    t.id = i;
    t.point = sample_uniform(space, derive_seed(seed, static_cast<std::uint64_t>(i)));
    t.status = TrialStatus::complete;
    const double x = to_unit(space.dimensions()[0], as_real(t.point.at(space.dimensions()[0].name)));
    t.final_score = std::pow(x - 0.35, 2);
    ts.push_back(t);
  }
  return ts;
}

}  // namespace

TEST_SUITE("tpe") {
  TEST_CASE("good split size is max(1, ceil(gamma n))") {
    for (std::size_t n = 2; n <= 100; ++n) {
      CHECK(good_count(n, 0.1) == std::max<std::size_t>(1, (n + 9) / 10));
      CHECK(good_count(n, 0.25) == std::max<std::size_t>(1, (n + 3) / 4));
      CHECK(good_count(n, 0.5) == std::max<std::size_t>(1, (n + 1) / 2));
    }
  }

  TEST_CASE("split puts the lowest scores first") {
    SearchSpace space("s", {Dimension::uniform("x", 0, 1)});
    const auto ts = history_1d(space, 20, 1);
    const auto split = split_trials(ts, 0.25);
    REQUIRE(split.good.size() == 5);
    CHECK(split.bad.size() == 15);
    for (std::size_t i = 1; i < split.good.size(); ++i)
      CHECK(*ts[split.good[i - 1]].final_score <= *ts[split.good[i]].final_score);
    for (auto b : split.bad) CHECK(*ts[b].final_score >= *ts[split.good.back()].final_score);
    CHECK_THROWS_AS(split_trials(std::span<const Trial>(ts.data(), 1), 0.25), InsufficientData);
  }

  TEST_CASE("parzen density matches the oracle and integrates to one") {
    const auto dim = Dimension::uniform("x", 0, 1);
    for (std::vector<double> us : {std::vector<double>{0.5}, {0.0, 0.02, 0.9}, {0.1, 0.1, 0.3, 0.97, 0.5}}) {
      std::vector<Value> vals(us.begin(), us.end());
      const auto d = fit_parzen(vals, dim);
      const oracle::Parzen ref(us);
      for (double u = 0.0; u <= 1.0; u += 0.01) CHECK(d.pdf(u) == doctest::Approx(ref.pdf(u)).epsilon(1e-12));
      CHECK(oracle::simpson([&](double u) { return d.pdf(u); }, 0.0, 1.0, 20000) == doctest::Approx(1.0).epsilon(1e-6));
    }
  }

  TEST_CASE("categorical density uses add-one smoothing") {
    const auto dim = Dimension::categorical("c", {"a", "b", "c"});
    std::vector<Value> vals{std::string("a"), std::string("a"), std::string("c")};
    const auto d = fit_parzen(vals, dim);
    CHECK(d.probability(0) == doctest::Approx(3.0 / 6.0));
    CHECK(d.probability(1) == doctest::Approx(1.0 / 6.0));
    CHECK(d.probability(2) == doctest::Approx(2.0 / 6.0));
  }

  TEST_CASE("proposal picks the candidate with the largest density ratio") {
    const auto dim = Dimension::uniform("x", 0, 1);
    std::vector<double> good{0.3, 0.35, 0.4}, bad{0.05, 0.6, 0.8, 0.95, 0.7};
    const auto l = fit_parzen(std::vector<Value>(good.begin(), good.end()), dim);
    const auto g = fit_parzen(std::vector<Value>(bad.begin(), bad.end()), dim);
    const oracle::Parzen lo(good), go(bad);
    Rng rng(12);
    const auto p = propose_dimension(l, g, dim, 64, rng);
    double best = -1e300;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < p.candidates.size(); ++i) {
      const double u = std::get<double>(p.candidates[i]);
      const double s = std::log(lo.pdf(u)) - std::log(go.pdf(u));
      if (s > best) best = s, arg = i;
    }
    CHECK(p.chosen == arg);
  }

  TEST_CASE("startup phase samples uniformly") {
    SearchSpace space("s", {Dimension::uniform("x", 0, 1)});
    const auto ts = history_1d(space, 3, 2);
    TpeConfig config;
    config.n_startup = 5;
    CHECK(tpe_suggest(ts, space, config, 9) == sample_uniform(space, 9));
  }

  TEST_CASE("suggestions respect frozen and categorical dimensions") {
    SearchSpace space("s", {Dimension::uniform("x", 0, 1), Dimension::categorical("c", {"a", "b"}),
                            Dimension::integer("n", 1, 5)});
    space = freeze_dimension(space, "n", std::int64_t{3});
    std::vector<Trial> ts;
    for (int i = 0; i < 30; ++i) {
      Trial t;
      t.id = i;
      t.point = sample_uniform(space, static_cast<std::uint64_t>(i));
      t.status = TrialStatus::complete;
      t.final_score = std::get<std::string>(t.point.at("c")) == "a" ? 0.1 * i : 10.0 + i;
      ts.push_back(t);
    }
    const auto p = tpe_suggest(ts, space, {}, 4);
    CHECK(contains(space, p));
    CHECK(std::get<std::int64_t>(p.at("n")) == 3);
  }

  TEST_CASE("config validation") {
    TpeConfig c;
    c.gamma = 1.0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = {};
    c.n_candidates = 0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
  }
}
