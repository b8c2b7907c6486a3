#include <doctest.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <thread>

#include "sprintopt/errors.hpp"
#include "sprintopt/service.hpp"
#include "sprintopt/testbed.hpp"

using namespace sprintopt;

namespace {

// Holds every evaluation until opened, so a sprint can be observed running.
struct Gate {
  std::mutex mu;
  std::condition_variable cv;
  bool open = true;

  void close() {
    std::lock_guard lock(mu);
    open = false;
  }
  void release() {
    {
      std::lock_guard lock(mu);
      open = true;
    }
    cv.notify_all();
  }
  void wait() {
    std::unique_lock lock(mu);
    cv.wait(lock, [&] { return open; });
  }
};

class GatedObjective final : public ObjectiveHandle {
 public:
  GatedObjective(std::unique_ptr<ObjectiveHandle> inner, Gate& gate) : inner_(std::move(inner)), gate_(gate) {}
  std::string name() const override { return inner_->name(); }
  int nominal_epochs() const override { return inner_->nominal_epochs(); }
  double evaluate(const HPoint& p, const EvalContext& c, const Reporter& r) const override {
    gate_.wait();
    return inner_->evaluate(p, c, r);
  }

 private:
  std::unique_ptr<ObjectiveHandle> inner_;
  Gate& gate_;
};

struct Fixture {
  Store store;
  Engine engine{store};
  Gate gate;
  Service service{engine, [this](const Thread& t) -> std::unique_ptr<ObjectiveHandle> {
                    return std::make_unique<GatedObjective>(default_objective(t), gate);
                  }};

  HttpResponse get(const std::string& path, const std::map<std::string, std::string>& q = {}) {
    return service.handle("GET", path, q);
  }
  HttpResponse post(const std::string& path, const json& body) { return service.handle("POST", path, {}, body.dump()); }

  std::string sprint(const std::string& thread, const std::string& fidelity, std::size_t calls, std::size_t random,
                     json extra = json::object()) {
    json body = {{"thread", thread}, {"fidelity", fidelity}, {"n_calls", calls}, {"n_random", random}, {"seed", 3},
                 {"gp", {{"n_candidates", 100}, {"restarts", 1}}}};
    body.update(extra);
    const auto r = post("/sprints", body);
    REQUIRE_MESSAGE(r.status == 201, r.body.dump());
    return r.body["id"].get<std::string>();
  }

  void run_to_end(const std::string& id, int workers = 1) {
    REQUIRE(post("/sprints/" + id + "/run", {{"worker_limit", workers}}).status == 202);
    service.wait_idle();
  }
};

}  // namespace

TEST_SUITE("service") {
  TEST_CASE("threads are created and listed") {
    Fixture f;
    const auto r = f.post("/threads", {{"id", "t1"}, {"objective", "quadratic_bowl"}, {"grouping", "LR0-L2"}});
    CHECK(r.status == 201);
    CHECK(r.body["grouping"] == GroupingScheme::lr0_l2().name());
    CHECK(f.post("/threads", {{"id", "t2"}, {"objective", "quadratic_bowl"}}).status == 201);
    CHECK(f.post("/threads", {{"id", "t1"}, {"objective", "quadratic_bowl"}}).status == 409);
    CHECK(f.post("/threads", {{"id", "../x"}}).status == 400);
    CHECK(f.post("/threads", {{"id", "t3"}, {"objective", "imagenet"}}).status == 400);
    const auto list = f.get("/threads", {{"limit", "1"}, {"offset", "1"}});
    CHECK(list.status == 200);
    CHECK(list.body["total"] == 2);
    REQUIRE(list.body["items"].size() == 1);
    CHECK(list.body["items"][0]["id"] == "t2");
    const auto one = f.get("/threads/t1");
    CHECK(one.body["space_versions"] == json::array({1}));
    CHECK(f.get("/threads/t1/spaces/1").body["name"] == GroupingScheme::lr0_l2().name());
  }

  TEST_CASE("unknown resources are 404 and bad input 400") {
    Fixture f;
    CHECK(f.get("/sprints/s404").status == 404);
    CHECK(f.get("/threads/none").status == 404);
    CHECK(f.get("/nothing/here").status == 404);
    CHECK(f.service.handle("POST", "/threads", {}, "{not json").status == 400);
    CHECK(f.get("/threads", {{"limit", "-1"}}).status == 400);
    CHECK(f.service.handle("DELETE", "/threads").status == 405);
    f.post("/threads", {{"id", "t"}, {"objective", "quadratic_bowl"}});
    CHECK(f.post("/sprints", {{"thread", "t"}, {"n_calls", 0}}).status == 400);
    const std::string id = f.sprint("t", "T1_V1_M1", 2, 2);
    CHECK(f.get("/sprints/" + id + "/dimensions/nope/scatter").status == 404);
  }

  TEST_CASE("priming violations are 422 with a reason") {
    Fixture f;
    f.post("/threads", {{"id", "t"}, {"objective", "quadratic_bowl"}});
    f.post("/threads", {{"id", "u"}, {"objective", "quadratic_bowl"}});
    const auto src = f.sprint("t", "T6_V4_M1", 3, 3);
    f.run_to_end(src);
    auto r = f.post("/sprints", {{"thread", "t"}, {"fidelity", "T1_V1_M25"}, {"priming", {{"mode", "warm"}, {"source", src}}}});
    CHECK(r.status == 422);
    CHECK(r.body["reason"] == "fidelity-mismatch");
    r = f.post("/sprints", {{"thread", "u"}, {"fidelity", "T6_V4_M1"}, {"priming", {{"mode", "cold"}, {"source", src}}}});
    CHECK(r.status == 422);
    CHECK(r.body["reason"] == "thread-isolation");
    r = f.post("/sprints", {{"thread", "t"}, {"fidelity", "T1_V1_M1"}, {"init", {{"epoch", 2}, {"step", 9}}},
                            {"priming", {{"mode", "cold"}, {"source", src}, {"top_n", 2}}}});
    CHECK(r.status == 422);
    CHECK(r.body["reason"] == "init-mismatch");
    r = f.post("/sprints", {{"thread", "t"}, {"fidelity", "T1_V1_M1"}, {"priming", {{"mode", "cold"}, {"source", src}, {"top_n", 2}}}});
    CHECK(r.status == 201);
    CHECK(r.body["queued"].size() == 2);
    CHECK(r.body["primed_from"] == json::array({src}));
  }

  TEST_CASE("prune over http equals the library prune") {
    Fixture f;
    f.post("/threads", {{"id", "t"}, {"objective", "multitask_sim"}});
    const auto id = f.sprint("t", "T1_V1_M1", 24, 24);
    CHECK(f.post("/sprints/" + id + "/prune", {{"k", 10}}).status == 409);
    f.run_to_end(id);
    const auto r = f.post("/sprints/" + id + "/prune", {{"k", 10}, {"freezes", {{{"dim", "lr_warmup"}, {"value", 5}}}}});
    REQUIRE(r.status == 201);
    const auto [trials, space] = f.store.read([&](const StoreState& s) {
      return std::make_pair(s.sprint(id).trials, s.thread("t").space(1));
    });
    const auto lib = prune_to_top_k(space, trials, 10, {}, 2);
    const auto frozen = freeze_dimension(SearchSpace(lib.name(), lib.dimensions(), 1), "lr_warmup", std::int64_t{5}, 2);
    CHECK(r.body["dimensions"].dump() == json(frozen)["dimensions"].dump());
    CHECK(r.body["version"] == 2);
    CHECK(r.body["parent"] == 1);
    CHECK(f.get("/threads/t/spaces/2").body == r.body);
    CHECK(f.post("/sprints/" + id + "/prune", {{"k", 25}}).status == 422);
  }

  TEST_CASE("run is asynchronous and exclusive") {
    Fixture f;
    f.post("/threads", {{"id", "t"}, {"objective", "quadratic_bowl"}});
    const auto a = f.sprint("t", "T1_V1_M1", 4, 4);
    const auto b = f.sprint("t", "T1_V1_M1", 4, 4);
    f.gate.close();
    CHECK(f.post("/sprints/" + a + "/run", json::object()).status == 202);
    CHECK(f.post("/sprints/" + a + "/run", json::object()).status == 409);
    CHECK(f.post("/sprints/" + b + "/run", json::object()).status == 409);
    CHECK(f.get("/sprints/" + a).body["status"] == "running");
    CHECK(f.get("/sprints/" + a, {{"consistent", "true"}}).status == 409);
    CHECK(f.get("/threads/t").body["running"] == true);
    f.gate.release();
    f.service.wait_idle();
    const auto done = f.get("/sprints/" + a, {{"consistent", "true"}});
    CHECK(done.status == 200);
    CHECK(done.body["status"] == "complete");
    CHECK(done.body["finished_trials"] == 4);
    CHECK_FALSE(done.body["incumbent"].is_null());
    CHECK(f.post("/sprints/" + a + "/run", json::object()).status == 409);
  }

  TEST_CASE("trial lists are paged") {
    Fixture f;
    f.post("/threads", {{"id", "t"}, {"objective", "quadratic_bowl"}});
    const auto id = f.sprint("t", "T1_V1_M1", 7, 7);
    f.run_to_end(id);
    const auto r = f.get("/sprints/" + id + "/trials", {{"limit", "3"}, {"offset", "5"}});
    CHECK(r.body["total"] == 7);
    REQUIRE(r.body["items"].size() == 2);
    CHECK(r.body["items"][0]["id"] == 5);
    CHECK(f.get("/sprints/" + id + "/trials", {{"offset", "70"}}).body["items"].empty());
    CHECK(f.get("/threads/t/sprints").body["items"][0]["id"] == id);
  }

  TEST_CASE("scatter carries every usable trial and the hull") {
    Fixture f;
    f.post("/threads", {{"id", "t"}, {"objective", "multitask_sim"}});
    const auto id = f.sprint("t", "T6_V4_M1", 120, 120);
    f.run_to_end(id, 3);
    const auto r = f.get("/sprints/" + id + "/dimensions/lr/scatter");
    REQUIRE(r.status == 200);
    CHECK(r.body["points"].size() == 120);
    CHECK(r.body["total"] == 120);
    CHECK(r.body["k"] == 10);
    REQUIRE_FALSE(r.body["hull"].is_null());
    CHECK(r.body["hull"]["low"].get<double>() >= r.body["current"]["low"].get<double>());
    CHECK(r.body["proposed"]["low"].get<double>() <= r.body["hull"]["low"].get<double>());
    const auto paged = f.get("/sprints/" + id + "/dimensions/lr/scatter", {{"limit", "20"}, {"offset", "100"}});
    CHECK(paged.body["points"].size() == 20);
    CHECK(paged.body["points"][0] == r.body["points"][100]);
  }

  TEST_CASE("a worker limit of one runs trials serially") {
    Fixture f;
    f.post("/threads", {{"id", "t"}, {"objective", "quadratic_bowl"}});
    const auto id = f.sprint("t", "T1_V1_M1", 6, 6);
    f.run_to_end(id, 1);
    const auto trials = f.get("/sprints/" + id + "/trials").body["items"];
    REQUIRE(trials.size() == 6);
    for (std::size_t i = 1; i < trials.size(); ++i)
      CHECK(trials[i]["started_at"].get<std::string>() >= trials[i - 1]["finished_at"].get<std::string>());
    CHECK(f.get("/sprints/" + id).body["worker_limit"] == 1);
  }

  TEST_CASE("name parts must agree with the config") {
    Fixture f;
    f.post("/threads", {{"id", "t"}, {"objective", "quadratic_bowl"}});
    json parts = {{"model_type", "SpERT"}, {"variant", "base"}, {"grouping", "GLOBAL"}, {"fidelity", "T6_V4_M1"},
                  {"init", {{"epoch", 0}, {"step", 0}}}, {"suffix", "a"}};
    auto r = f.post("/sprints", {{"thread", "t"}, {"fidelity", "T1_V1_M1"}, {"name_parts", parts}});
    CHECK(r.status == 400);
    r = f.post("/sprints", {{"thread", "t"}, {"fidelity", "T6_V4_M1"}, {"name_parts", parts}});
    CHECK(r.status == 201);
    CHECK(r.body["name"] == "SpERT.base.GLOBAL.T6_V4_M1.E0_S0.a");
  }
}
