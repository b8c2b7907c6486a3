#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "sprintopt/errors.hpp"
#include "sprintopt/space.hpp"
#include "sprintopt/trial.hpp"

using namespace sprintopt;

namespace {

SearchSpace mixed_space() {
  return SearchSpace("mixed", {Dimension::log_uniform("lr", 1e-6, 1e-2), Dimension::uniform("dropout", 0.0, 0.5),
                               Dimension::integer("layers", 1, 12),
                               Dimension::categorical("opt", {"adam", "sgd", "lamb", "adagrad"})});
}

Trial complete(std::int64_t id, HPoint p, double score) {
  Trial t;
  t.id = id;
  t.point = std::move(p);
  t.status = TrialStatus::complete;
  t.final_score = score;
  return t;
}

}  // namespace

TEST_SUITE("space") {
  TEST_CASE("dimension validation rejects bad ranges") {
    CHECK_THROWS_AS(Dimension::log_uniform("x", 0.0, 1.0).validate(), InvalidArgument);
    CHECK_THROWS_AS(Dimension::uniform("x", 1.0, 0.5).validate(), InvalidArgument);
    CHECK_THROWS_AS(Dimension::categorical("x", {}).validate(), InvalidArgument);
    CHECK_THROWS_AS(Dimension::categorical("x", {"a", "a"}).validate(), InvalidArgument);
    CHECK_THROWS_AS(Dimension::integer("x", 3, 3), InvalidArgument);
    CHECK_NOTHROW(Dimension::integer("x", 3, 4).validate());
  }

  TEST_CASE("admits checks kind and range") {
    const auto lr = Dimension::log_uniform("lr", 1e-5, 1e-3);
    CHECK(lr.admits(Value{1e-4}));
    CHECK_FALSE(lr.admits(Value{1e-2}));
    CHECK_FALSE(lr.admits(Value{std::int64_t{1}}));
    const auto layers = Dimension::integer("layers", 1, 4);
    CHECK(layers.admits(Value{std::int64_t{4}}));
    CHECK_FALSE(layers.admits(Value{std::int64_t{5}}));
    const auto opt = Dimension::categorical("opt", {"adam", "sgd"});
    CHECK(opt.admits(Value{std::string("sgd")}));
    CHECK_FALSE(opt.admits(Value{std::string("lamb")}));
  }

  TEST_CASE("unit mapping uses log coordinates for log dimensions") {
    const auto lr = Dimension::log_uniform("lr", 1e-6, 1e-2);
    CHECK(to_unit(lr, 1e-4) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::get<double>(from_unit(lr, 0.25)) == doctest::Approx(1e-5).epsilon(1e-12));
    const auto k = Dimension::integer("k", 0, 10);
    CHECK(std::get<std::int64_t>(from_unit(k, 0.34)) == 3);
    CHECK(std::get<std::int64_t>(from_unit(k, 1.7)) == 10);
  }

  TEST_CASE("uniform samples stay inside the space and are reproducible") {
    const auto space = mixed_space();
    for (std::uint64_t s = 0; s < 200; ++s) {
      const auto p = sample_uniform(space, s);
      CHECK(contains(space, p));
      CHECK(p == sample_uniform(space, s));
    }
  }

  TEST_CASE("frozen dimensions always sample their value") {
    const auto frozen = freeze_dimension(mixed_space(), "layers", std::int64_t{7});
    CHECK(frozen.version() == 2);
    CHECK(frozen.parent() == 1);
    for (std::uint64_t s = 0; s < 50; ++s) CHECK(std::get<std::int64_t>(sample_uniform(frozen, s).at("layers")) == 7);
    CHECK_THROWS_AS(freeze_dimension(mixed_space(), "layers", std::int64_t{40}), InvalidArgument);
    CHECK_THROWS_AS(freeze_dimension(mixed_space(), "nope", 1.0), NotFound);
  }

  TEST_CASE("prune keeps the top-k hull with margins") {
    const auto space = mixed_space();
    std::vector<Trial> trials;
    // scores decrease with id among the first five, the rest are worse
    trials.push_back(complete(0, {{{"lr", 1e-4}, {"dropout", 0.2}, {"layers", std::int64_t{4}}, {"opt", std::string("adam")}}}, 0.1));
    trials.push_back(complete(1, {{{"lr", 2e-4}, {"dropout", 0.3}, {"layers", std::int64_t{6}}, {"opt", std::string("sgd")}}}, 0.2));
    trials.push_back(complete(2, {{{"lr", 5e-3}, {"dropout", 0.0}, {"layers", std::int64_t{1}}, {"opt", std::string("lamb")}}}, 0.9));
    const auto pruned = prune_to_top_k(space, trials, 2);
    CHECK(pruned.version() == 2);
    const auto& lr = pruned.dimension("lr");
    CHECK(lr.low == 1e-4 / 1.5);
    CHECK(lr.high == 2e-4 * 1.5);
    const auto& dropout = pruned.dimension("dropout");
    CHECK(dropout.low == 0.2 - 0.01);
    CHECK(dropout.high == 0.3 + 0.01);
    const auto& layers = pruned.dimension("layers");
    CHECK(layers.low == 3);
    CHECK(layers.high == 7);
    CHECK(pruned.dimension("opt").categories == std::vector<std::string>{"adam", "sgd"});
  }

  TEST_CASE("prune clips margins to the current bounds") {
    const auto space = mixed_space();
    std::vector<Trial> trials;
    trials.push_back(complete(0, {{{"lr", 1e-6}, {"dropout", 0.5}, {"layers", std::int64_t{12}}, {"opt", std::string("adam")}}}, 0.1));
    const auto pruned = prune_to_top_k(space, trials, 1);
    CHECK(pruned.dimension("lr").low == 1e-6);
    CHECK(pruned.dimension("dropout").high == 0.5);
    CHECK(pruned.dimension("layers").high == 12);
  }

  TEST_CASE("prune with fewer usable trials than k is an error") {
    std::vector<Trial> trials{complete(0, sample_uniform(mixed_space(), 1), 0.5)};
    Trial failed;
    failed.id = 1;
    failed.status = TrialStatus::failed;
    trials.push_back(failed);
    CHECK_THROWS_AS(prune_to_top_k(mixed_space(), trials, 2), InsufficientData);
  }

  TEST_CASE("prune ignores frozen dimensions") {
    const auto frozen = freeze_dimension(mixed_space(), "layers", std::int64_t{5});
    std::vector<Trial> trials;
    for (int i = 0; i < 5; ++i) trials.push_back(complete(i, sample_uniform(frozen, i), i));
    const auto pruned = prune_to_top_k(frozen, trials, 3);
    CHECK(pruned.dimension("layers") == frozen.dimension("layers"));
  }

  TEST_CASE("widening moves one bound outward") {
    const auto space = mixed_space();
    const auto wider = widen_dimension(space, "dropout", Side::high, 0.25);
    CHECK(wider.dimension("dropout").high == doctest::Approx(0.75));
    const auto log_wider = widen_dimension(space, "lr", Side::low, 10.0);
    CHECK(log_wider.dimension("lr").low == doctest::Approx(1e-7));
  }

  TEST_CASE("categories can be added") {
    const auto space = add_category(mixed_space(), "opt", "rmsprop");
    CHECK(space.dimension("opt").categories.back() == "rmsprop");
    CHECK_THROWS_AS(add_category(mixed_space(), "opt", "adam"), InvalidArgument);
  }

  TEST_CASE("replace dimension unfreezes with new bounds") {
    const auto frozen = freeze_dimension(mixed_space(), "layers", std::int64_t{7});
    const auto open = replace_dimension(frozen, Dimension::integer("layers", 6, 8), 3);
    CHECK_FALSE(open.dimension("layers").is_frozen());
    CHECK(open.dimension("layers").low == 6);
    CHECK(open.version() == 3);
  }
}

TEST_SUITE("space") {
  TEST_CASE("rotate_subset partitions the items") {
    for (int k : {1, 2, 4, 6}) {
      std::vector<int> seen(103, 0);
      std::set<std::size_t> sizes;
      for (int r = 0; r < k; ++r) {
        const auto subset = rotate_subset(103, k, r, 9);
        sizes.insert(subset.size());
        for (auto i : subset) seen[i]++;
      }
      CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
      CHECK(*sizes.rbegin() - *sizes.begin() <= 1);
    }
  }

  TEST_CASE("rotate_subset cycles with the rotation index") {
    CHECK(rotate_subset(50, 4, 1, 3) == rotate_subset(50, 4, 5, 3));
    CHECK(rotate_subset(50, 4, 1, 3) != rotate_subset(50, 4, 2, 3));
    CHECK(rotate_subset(50, 1, 17, 3).size() == 50);
  }

  TEST_CASE("fidelity designations parse and print") {
    const auto f = FidelitySpec::parse("T6_V4_M25");
    CHECK(f.train_denominator == 6);
    CHECK(f.val_denominator == 4);
    CHECK(f.max_epochs == 25);
    CHECK(f.designation() == "T6_V4_M25");
    CHECK_FALSE(f.is_full_data());
    CHECK_THROWS_AS(FidelitySpec::parse("T0_V1_M1"), InvalidArgument);
    CHECK_THROWS_AS(FidelitySpec::parse("T1_V1"), InvalidArgument);
  }

  TEST_CASE("rank_usable orders by score then id and skips unusable trials") {
    std::vector<Trial> ts;
    ts.push_back(complete(0, {}, 0.5));
    ts.push_back(complete(1, {}, 0.2));
    ts.push_back(complete(2, {}, 0.2));
    ts.push_back(complete(3, {}, std::nan("")));
    Trial pruned = complete(4, {}, 0.0);
    pruned.status = TrialStatus::pruned;
    ts.push_back(pruned);
    CHECK(rank_usable(ts) == std::vector<std::size_t>{1, 2, 0});
  }
}
