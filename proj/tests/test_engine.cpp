#include <doctest.h>

#include <atomic>
#include <cmath>

#include "sprintopt/engine.hpp"
#include "sprintopt/errors.hpp"
#include "sprintopt/service.hpp"
#include "sprintopt/testbed.hpp"

using namespace sprintopt;

namespace {

SearchSpace small_space() {
  return SearchSpace("small", {Dimension::log_uniform("lr", 1e-5, 1e-2), Dimension::uniform("weight_decay", 0.0, 0.1),
                               Dimension::integer("lr_warmup", 1, 12)});
}

SprintConfig config(const std::string& fidelity, std::size_t calls, std::size_t random, std::uint64_t seed = 1) {
  SprintConfig c;
  c.fidelity = FidelitySpec::parse(fidelity);
  c.n_calls = calls;
  c.n_random = random;
  c.seed = seed;
  c.gp.n_candidates = 200;
  c.gp.restarts = 2;
  return c;
}

struct Fixture {
  Store store;
  Engine engine{store};
  std::unique_ptr<ObjectiveHandle> objective;

  explicit Fixture(const std::string& landscape = "quadratic_bowl") {
    engine.create_thread("t", landscape, "GLOBAL", small_space());
    objective = make_objective(landscape, small_space());
  }

  Sprint sprint(const std::string& id) {
    return store.read([&](const StoreState& s) { return s.sprint(id); });
  }
};

// Fails every evaluation whose lr lies above a cut.
class Flaky final : public ObjectiveHandle {
 public:
  explicit Flaky(double cut) : cut_(cut) {}
  std::string name() const override { return "flaky"; }
  double evaluate(const HPoint& p, const EvalContext&, const Reporter& report) const override {
    if (std::get<double>(p.at("lr")) > cut_) throw std::runtime_error("diverged");
    const double s = std::get<double>(p.at("weight_decay"));
    report(1, s, false);
    return s;
  }

 private:
  double cut_;
};

}  // namespace

TEST_SUITE("engine") {
  TEST_CASE("sprints get sequential ids and descriptive names") {
    Fixture f;
    const auto a = f.engine.create_sprint("t", config("T6_V4_M1", 4, 2));
    const auto b = f.engine.create_sprint("t", config("T1_V1_M25", 4, 2));
    CHECK(a == "s1");
    CHECK(b == "s2");
    CHECK(f.sprint(a).name == "quadratic_bowl.t.GLOBAL.T6_V4_M1.E0_S0.v1");
    CHECK(f.sprint(a).status == SprintStatus::pending);
    CHECK_THROWS_AS(f.engine.create_sprint("nope", config("T1_V1_M1", 2, 1)), NotFound);
    CHECK_THROWS_AS(f.engine.create_sprint("t", config("T1_V1_M1", 2, 1), 9), NotFound);
  }

  TEST_CASE("a sprint runs its budget and finds a good point") {
    Fixture f;
    const auto id = f.engine.create_sprint("t", config("T1_V1_M1", 16, 8));
    const auto r = f.engine.run_sprint(id, *f.objective);
    CHECK(r.status == SprintStatus::complete);
    REQUIRE(r.trials.size() == 16);
    for (std::size_t i = 0; i < r.trials.size(); ++i) {
      CHECK(r.trials[i].id == static_cast<std::int64_t>(i));
      CHECK(r.trials[i].status == TrialStatus::complete);
      CHECK(r.trials[i].rotation_index == static_cast<std::int64_t>(i));
      CHECK(r.trials[i].source == (i < 8 ? SuggestionSource::random : SuggestionSource::surrogate));
    }
    REQUIRE(r.incumbent);
    for (const auto& t : r.trials) CHECK(*r.incumbent->final_score <= *t.final_score);
    CHECK(r.scatter.size() == 3);
  }

  TEST_CASE("identical seeds give identical sprints") {
    Fixture a, b;
    const auto ra = a.engine.run_sprint(a.engine.create_sprint("t", config("T6_V4_M1", 10, 5, 9)), *a.objective);
    const auto rb = b.engine.run_sprint(b.engine.create_sprint("t", config("T6_V4_M1", 10, 5, 9)), *b.objective);
    REQUIRE(ra.trials.size() == rb.trials.size());
    for (std::size_t i = 0; i < ra.trials.size(); ++i) {
      CHECK(ra.trials[i].point == rb.trials[i].point);
      CHECK(ra.trials[i].final_score == rb.trials[i].final_score);
    }
  }

  TEST_CASE("a worker pool runs every trial") {
    Fixture f;
    const auto r = f.engine.run_sprint(f.engine.create_sprint("t", config("T1_V1_M1", 12, 12)), *f.objective, 4);
    CHECK(r.status == SprintStatus::complete);
    CHECK(r.trials.size() == 12);
    CHECK(f.sprint(r.sprint_id).worker_limit == 4);
  }

  TEST_CASE("tpe sampler with hyperband pruning") {
    Fixture f("multitask_sim");
    auto c = config("T1_V1_M25", 12, 3, 5);
    c.sampler = SamplerKind::tpe;
    c.pruner = PrunerKind::hyperband;
    c.fidelity.scheduler_enabled = true;
    c.calibration_epochs = 7;
    c.tpe.n_startup = 3;
    const auto r = f.engine.run_sprint(f.engine.create_sprint("t", c), *f.objective);
    CHECK(r.status == SprintStatus::complete);
    std::size_t pruned = 0;
    for (const auto& t : r.trials) {
      CHECK((t.status == TrialStatus::complete || t.status == TrialStatus::pruned));
      if (t.status == TrialStatus::pruned) {
        ++pruned;
        CHECK(t.ticks.back().prunable);
        CHECK(t.ticks.back().epoch < 25);
        CHECK_FALSE(t.rungs.empty());
      } else {
        CHECK(t.ticks.back().epoch == 32);
      }
    }
    CHECK(pruned > 0);
  }

  TEST_CASE("a compressed schedule needs early stopping") {
    Fixture f;
    auto c = config("T6_V4_M5", 4, 2);
    c.fidelity.scheduler_enabled = true;
    CHECK_THROWS_AS(f.engine.create_sprint("t", c), InvalidArgument);
    c.fidelity.early_stop = EarlyStop::end_of_warmup;
    CHECK_NOTHROW(f.engine.create_sprint("t", c));
    c.fidelity = FidelitySpec::parse("T6_V4_M5");
    CHECK_NOTHROW(f.engine.create_sprint("t", c));
  }

  TEST_CASE("failures are recorded and too many fail the sprint") {
    Fixture f;
    const auto some = f.engine.run_sprint(f.engine.create_sprint("t", config("T1_V1_M1", 10, 10, 3)), Flaky(3e-3));
    CHECK(some.failed_trials > 0);
    CHECK(some.failed_trials * 2 <= some.trials.size());
    CHECK(some.status == SprintStatus::complete);
    for (const auto& t : some.trials)
      if (t.status == TrialStatus::failed) CHECK(t.error == "diverged");

    const auto all = f.engine.run_sprint(f.engine.create_sprint("t", config("T1_V1_M1", 10, 10, 3)), Flaky(0.0));
    CHECK(all.status == SprintStatus::failed);
    CHECK_FALSE(all.error.empty());
    CHECK(all.trials.size() < 10);
  }

  TEST_CASE("claims are exclusive") {
    Fixture f;
    const auto a = f.engine.create_sprint("t", config("T1_V1_M1", 3, 3));
    const auto b = f.engine.create_sprint("t", config("T1_V1_M1", 3, 3));
    f.engine.claim(a, 1);
    CHECK_THROWS_AS(f.engine.claim(a, 1), Conflict);
    CHECK_THROWS_AS(f.engine.claim(b, 1), Conflict);  // one running sprint per thread
    f.engine.run_claimed(a, *f.objective);
    CHECK_THROWS_AS(f.engine.run_sprint(a, *f.objective), Conflict);
    CHECK(f.engine.run_sprint(b, *f.objective).status == SprintStatus::complete);
  }

  TEST_CASE("pruning a sprint stores a new space version") {
    Fixture f;
    const auto id = f.engine.create_sprint("t", config("T1_V1_M1", 12, 12));
    CHECK_THROWS_AS(f.engine.prune_sprint(id, 10), Conflict);
    const auto r = f.engine.run_sprint(id, *f.objective);
    const auto pruned = f.engine.prune_sprint(id, 10, {}, {{"lr_warmup", std::int64_t{7}}});
    CHECK(pruned.version() == 2);
    CHECK(pruned.parent() == 1);
    CHECK(pruned.dimension("lr_warmup").frozen == Value{std::int64_t{7}});
    const auto lib = prune_to_top_k(small_space(), r.trials, 10, {}, 2);
    CHECK(pruned.dimension("lr") == lib.dimension("lr"));
    CHECK_THROWS_AS(f.engine.prune_sprint(id, 20), InsufficientData);
    CHECK(f.engine.next_space_version("t") == 3);
  }

  TEST_CASE("space versions must be added in order") {
    Fixture f;
    CHECK_THROWS_AS(f.engine.add_space("t", freeze_dimension(small_space(), "lr_warmup", std::int64_t{3}, 5)),
                    InvalidArgument);
    f.engine.add_space("t", freeze_dimension(small_space(), "lr_warmup", std::int64_t{3}, 2));
    const auto id = f.engine.create_sprint("t", config("T1_V1_M1", 3, 3));
    CHECK(f.sprint(id).space_version == 2);
  }
}

TEST_SUITE("engine") {
  TEST_CASE("warm priming imports scores at the same fidelity") {
    Fixture f;
    const auto src = f.engine.create_sprint("t", config("T6_V4_M1", 8, 8));
    const auto sr = f.engine.run_sprint(src, *f.objective);
    const auto dst = f.engine.create_sprint("t", config("T6_V4_M1", 4, 2, 2), std::nullopt, "",
                                            PrimingRequest{PrimingMode::warm, src, 3});
    const auto d = f.sprint(dst);
    REQUIRE(d.trials.size() == 3);
    CHECK(d.primed_from == std::vector<std::string>{src});
    const auto ranked = rank_usable(sr.trials);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(d.trials[i].provenance.kind == ProvenanceKind::warm_primed);
      CHECK(d.trials[i].provenance.source_sprint == src);
      CHECK(d.trials[i].point == sr.trials[ranked[i]].point);
      CHECK(d.trials[i].final_score == sr.trials[ranked[i]].final_score);
    }
    const auto r = f.engine.run_sprint(dst, *f.objective);
    CHECK(r.trials.size() == 3 + 4);
  }

  TEST_CASE("warm priming across fidelities is rejected") {
    Fixture f;
    const auto src = f.engine.create_sprint("t", config("T6_V4_M1", 4, 4));
    f.engine.run_sprint(src, *f.objective);
    try {
      f.engine.create_sprint("t", config("T1_V1_M25", 4, 2), std::nullopt, "", PrimingRequest{PrimingMode::warm, src, 3});
      FAIL("expected a priming error");
    } catch (const PrimingError& e) {
      CHECK(e.reason() == PrimingViolation::fidelity_mismatch);
    }
    // nothing was written
    CHECK(f.store.read([](const StoreState& s) { return s.sprints.size(); }) == 1);
  }

  TEST_CASE("cold priming re-evaluates the points first") {
    Fixture f("multitask_sim");
    const auto src = f.engine.create_sprint("t", config("T6_V4_M1", 6, 6));
    const auto sr = f.engine.run_sprint(src, *f.objective);
    const auto dst = f.engine.create_sprint("t", config("T1_V1_M1", 5, 5, 4), std::nullopt, "",
                                            PrimingRequest{PrimingMode::cold, src, 3});
    CHECK(f.sprint(dst).queue.size() == 3);
    const auto r = f.engine.run_sprint(dst, *f.objective);
    REQUIRE(r.trials.size() == 5);
    const auto ranked = rank_usable(sr.trials);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(r.trials[i].provenance.kind == ProvenanceKind::cold_primed);
      CHECK(r.trials[i].point == sr.trials[ranked[i]].point);
      CHECK(r.trials[i].final_score != sr.trials[ranked[i]].final_score);
    }
    CHECK(r.trials[3].provenance.kind == ProvenanceKind::fresh);
    CHECK(f.sprint(dst).queue.empty());
  }

  TEST_CASE("priming never crosses threads") {
    Fixture f;
    f.engine.create_thread("other", "quadratic_bowl", "GLOBAL", small_space());
    const auto src = f.engine.create_sprint("other", config("T1_V1_M1", 3, 3));
    f.engine.run_sprint(src, *f.objective);
    for (auto mode : {PrimingMode::warm, PrimingMode::cold}) {
      try {
        f.engine.create_sprint("t", config("T1_V1_M1", 3, 3), std::nullopt, "", PrimingRequest{mode, src, 3});
        FAIL("expected a priming error");
      } catch (const PrimingError& e) {
        CHECK(e.reason() == PrimingViolation::thread_isolation);
      }
    }
  }

  TEST_CASE("initialization checkpoints must match unless allowed") {
    Fixture f;
    const auto src = f.engine.create_sprint("t", config("T1_V1_M1", 3, 3));
    f.engine.run_sprint(src, *f.objective);
    auto c = config("T1_V1_M1", 3, 3);
    c.init = {1, 500};
    try {
      f.engine.create_sprint("t", c, std::nullopt, "", PrimingRequest{PrimingMode::cold, src, 3});
      FAIL("expected a priming error");
    } catch (const PrimingError& e) {
      CHECK(e.reason() == PrimingViolation::init_mismatch);
    }
    c.allow_init_mismatch = true;
    CHECK_NOTHROW(f.engine.create_sprint("t", c, std::nullopt, "", PrimingRequest{PrimingMode::cold, src, 3}));
  }

  TEST_CASE("priming filters points outside the target space") {
    Fixture f;
    const auto src = f.engine.create_sprint("t", config("T1_V1_M1", 10, 10));
    const auto sr = f.engine.run_sprint(src, *f.objective);
    const auto best = sr.trials[rank_usable(sr.trials)[0]];
    const auto v2 = freeze_dimension(small_space(), "lr_warmup", best.point.at("lr_warmup"), 2);
    f.engine.add_space("t", v2);
    const auto dst = f.engine.create_sprint("t", config("T1_V1_M1", 3, 3), 2, "", PrimingRequest{PrimingMode::warm, src, 10});
    const auto d = f.sprint(dst);
    CHECK_FALSE(d.trials.empty());
    for (const auto& t : d.trials) CHECK(contains(v2, t.point));
  }

  TEST_CASE("priming targets must be pending") {
    Fixture f;
    const auto src = f.engine.create_sprint("t", config("T1_V1_M1", 3, 3));
    f.engine.run_sprint(src, *f.objective);
    const auto dst = f.engine.create_sprint("t", config("T1_V1_M1", 3, 3));
    f.engine.run_sprint(dst, *f.objective);
    CHECK_THROWS_AS(f.engine.warm_prime(dst, src, 2), Conflict);
  }

  TEST_CASE("scatter series carry the hull once k trials exist") {
    Fixture f;
    const auto empty = f.engine.create_sprint("t", config("T1_V1_M1", 3, 3));
    const auto es = scatter_series(f.sprint(empty), small_space(), "lr");
    CHECK(es.points.empty());
    CHECK_FALSE(es.hull);
    const auto r = f.engine.run_sprint(f.engine.create_sprint("t", config("T1_V1_M1", 12, 12)), *f.objective);
    const auto s = scatter_series(f.sprint(r.sprint_id), small_space(), "lr", 10);
    CHECK(s.points.size() == 12);
    REQUIRE(s.hull);
    REQUIRE(s.proposed);
    CHECK(*s.proposed == prune_to_top_k(small_space(), r.trials, 10).dimension("lr"));
    CHECK(s.hull->low >= s.proposed->low);
    CHECK_FALSE(scatter_series(f.sprint(r.sprint_id), small_space(), "lr", 13).hull);
  }
}
