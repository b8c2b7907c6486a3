#include <doctest.h>

#include <cmath>

#include "sprintopt/errors.hpp"
#include "sprintopt/losses.hpp"
#include "sprintopt/serialize.hpp"
#include "sprintopt/testbed.hpp"

using namespace sprintopt;

namespace {

template <typename T>
T round_trip(const T& v) {
  return json::parse(json(v).dump()).get<T>();
}

SearchSpace sample_space() {
  SearchSpace s("demo", {Dimension::log_uniform("lr", 1e-6, 1e-3), Dimension::uniform("p", 0.0, 0.5),
                         Dimension::integer("n", 1, 12), Dimension::categorical("opt", {"adam", "sgd"})});
  return freeze_dimension(s, "n", std::int64_t{7});
}

Trial sample_trial() {
  Trial t;
  t.id = 4;
  t.point = sample_uniform(sample_space(), 3);
  t.fidelity = FidelitySpec::parse("T6_V4_M25");
  t.fidelity.scheduler_enabled = true;
  t.fidelity.early_stop = EarlyStop::end_of_warmup;
  t.status = TrialStatus::pruned;
  t.ticks = {{1, 0.5, false}, {10, 0.25, true}};
  t.rungs = {{4, 32.0 / 27.0, 0.4}};
  t.final_score = 0.1 + 0.2;
  t.provenance = {ProvenanceKind::cold_primed, "s1", 9};
  t.source = SuggestionSource::primed;
  t.seed = 0xFFFFFFFFFFFFFFFFull;
  t.rotation_index = 5;
  t.started_at = "2026-01-01T00:00:00.000001Z";
  return t;
}

}  // namespace

TEST_SUITE("serialize") {
  TEST_CASE("values keep integer and real alternatives") {
    CHECK(std::holds_alternative<std::int64_t>(value_from_json(value_to_json(Value{std::int64_t{3}}))));
    CHECK(std::holds_alternative<double>(value_from_json(value_to_json(Value{3.0}))));
    CHECK(std::get<std::string>(value_from_json(value_to_json(Value{std::string("x")}))) == "x");
  }

  TEST_CASE("spaces round-trip exactly") {
    const auto s = sample_space();
    CHECK(round_trip(s) == s);
    CHECK(json(s)["dimensions"][3]["low"].is_null());
    CHECK(json(s)["parent"] == 1);
  }

  TEST_CASE("doubles keep full precision") {
    const auto t = sample_trial();
    const auto back = round_trip(t);
    CHECK(back == t);
    CHECK(*back.final_score == 0.1 + 0.2);
    CHECK(back.seed == 0xFFFFFFFFFFFFFFFFull);
  }

  TEST_CASE("non-finite scores serialize as null") {
    Trial t = sample_trial();
    t.final_score = std::numeric_limits<double>::infinity();
    CHECK(json(t)["final_score"].is_null());
    t.final_score.reset();
    CHECK(round_trip(t) == t);
  }

  TEST_CASE("sprint config and names round-trip") {
    SprintConfig c;
    c.sampler = SamplerKind::tpe;
    c.pruner = PrunerKind::hyperband;
    c.fidelity = FidelitySpec::parse("T1_V1_M25");
    c.n_calls = 9;
    c.n_random = 0;
    c.seed = 77;
    c.init = {3, 1200};
    c.calibration_epochs = 7;
    c.gp.smoothness = gp::Smoothness::three_halves;
    c.tpe.gamma = 0.1;
    const auto back = round_trip(c);
    CHECK(json(back) == json(c));
    SprintNameParts parts{"SpERT", "base", "GLOBAL", FidelitySpec::parse("T6_V4_M1"), {0, 0}, "v2"};
    CHECK(json(round_trip(parts)) == json(parts));
  }

  TEST_CASE("threads and sprints round-trip") {
    Thread th;
    th.id = "t1";
    th.objective = "multitask_sim";
    th.grouping = "GLOBAL";
    th.spaces.emplace(1, SearchSpace("GLOBAL", {Dimension::uniform("x", 0, 1)}));
    th.spaces.emplace(2, sample_space());
    th.sprint_ids = {"s1"};
    CHECK(json(round_trip(th)) == json(th));

    Sprint sp;
    sp.id = "s1";
    sp.thread_id = "t1";
    sp.name = "a.b.c.T1_V1_M1.E0_S0";
    sp.trials = {sample_trial()};
    sp.queue = {{sample_trial().point, "s0", 2}};
    sp.primed_from = {"s0"};
    sp.status = SprintStatus::complete;
    CHECK(json(round_trip(sp)) == json(sp));
  }

  TEST_CASE("corpus serializes for inspection") {
    const auto c = generate_corpus(1, 5, 4);
    const json j = c;
    CHECK(j["validation"].size() == 5);
    CHECK(json(round_trip(c)) == j);
  }

  TEST_CASE("fit reports serialize") {
    calibrate::FitReport r;
    r.final_thresholds = calibrate::ThresholdSet::uniform(0.4, 3);
    r.best_validation_f1 = -std::numeric_limits<double>::infinity();
    const json j = r;
    CHECK(j["best_validation_f1"].is_null());
    CHECK(j["final_thresholds"]["relation"].size() == 3);
    CHECK(round_trip(r.final_thresholds) == r.final_thresholds);
  }

  TEST_CASE("malformed documents are rejected") {
    CHECK_THROWS(json::parse(R"({"name":"x"})").get<SearchSpace>());
    CHECK_THROWS(json::parse(R"({"kind":"nonsense","name":"x"})").get<Dimension>());
  }
}

TEST_SUITE("serialize") {
  TEST_CASE("sprint names") {
    SprintNameParts p{"SpERT", "base", "GLOBAL", FidelitySpec::parse("T6_V4_M1"), {2, 300}, ""};
    CHECK(sprint_name(p) == "SpERT.base.GLOBAL.T6_V4_M1.E2_S300");
    p.suffix = "v3";
    const auto name = sprint_name(p);
    CHECK(name == "SpERT.base.GLOBAL.T6_V4_M1.E2_S300.v3");
    CHECK(parse_sprint_name(name) == p);
    CHECK_THROWS_AS(parse_sprint_name("a.b.c"), InvalidArgument);
    CHECK_THROWS_AS(parse_sprint_name("a.b.c.T1_V1_M1.X2"), InvalidArgument);
    p.variant = "has.dot";
    CHECK_THROWS_AS(sprint_name(p), InvalidArgument);
  }

  TEST_CASE("sprint config validation") {
    SprintConfig c;
    c.n_calls = 0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = {};
    c.eta = 1;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = {};
    c.n_random = 50;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c.n_random = 10;
    CHECK_NOTHROW(c.validate());
  }
}
