#include "sprintopt/engine.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <map>
#include <set>
#include <thread>

#include "sprintopt/errors.hpp"
#include "sprintopt/hyperband.hpp"

namespace sprintopt {

namespace {

// seed streams of a sprint
constexpr std::uint64_t kSampleStream = 1;
constexpr std::uint64_t kEvalStream = 2;

Sprint copy_sprint(const Store& store, const std::string& id) {
  return store.read([&](const StoreState& s) { return s.sprint(id); });
}

Thread copy_thread(const Store& store, const std::string& id) {
  return store.read([&](const StoreState& s) { return s.thread(id); });
}

}  // namespace

const char* to_string(PrimingMode m) { return m == PrimingMode::warm ? "warm" : "cold"; }

PrimingMode priming_mode_from_string(const std::string& s) {
  if (s == "warm") return PrimingMode::warm;
  if (s == "cold") return PrimingMode::cold;
  throw InvalidArgument("unknown priming mode '" + s + "' (warm|cold)");
}

ScatterSeries scatter_series(const Sprint& sprint, const SearchSpace& space, const std::string& dimension,
                             std::size_t k, const MarginPolicy& margins) {
  ScatterSeries out;
  out.dimension = dimension;
  out.current = space.dimension(dimension);
  const auto ranked = rank_usable(sprint.trials);
  for (auto i : ranked) {
    const Trial& t = sprint.trials[i];
    auto it = t.point.values.find(dimension);
    if (it == t.point.values.end()) continue;
    out.points.push_back({it->second, *t.final_score, t.id, t.provenance.kind});
  }
  std::sort(out.points.begin(), out.points.end(),
            [](const ScatterPoint& a, const ScatterPoint& b) { return a.trial_id < b.trial_id; });
  if (k == 0 || ranked.size() < k || out.current.is_frozen()) return out;

  Dimension hull = out.current;
  if (hull.kind == DimensionKind::categorical) {
    std::set<std::string> seen;
    for (std::size_t r = 0; r < k; ++r) seen.insert(std::get<std::string>(sprint.trials[ranked[r]].point.at(dimension)));
    std::vector<std::string> kept;
    for (const auto& c : hull.categories)
      if (seen.count(c)) kept.push_back(c);
    hull.categories = std::move(kept);
  } else {
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t r = 0; r < k; ++r) {
      const double v = as_real(sprint.trials[ranked[r]].point.at(dimension));
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    hull.low = lo;
    hull.high = hi;
  }
  out.hull = std::move(hull);
  out.proposed = prune_to_top_k(space, sprint.trials, k, margins).dimension(dimension);
  return out;
}

Engine::Engine(Store& store, EngineOptions options) : store_(store), options_(std::move(options)) {}

void Engine::create_thread(const std::string& id, const std::string& objective, const std::string& grouping,
                           SearchSpace initial, int nominal_epochs, std::string model_config_id) {
  Store::check_id(id);
  if (initial.dimensions().empty()) throw InvalidArgument("a thread needs a non-empty space");
  if (nominal_epochs < 1) throw InvalidArgument("nominal epochs must be >= 1");
  std::lock_guard lock(create_mutex_);
  if (store_.read([&](const StoreState& s) { return s.threads.count(id) > 0; }))
    throw Conflict("thread '" + id + "' already exists");
  Thread t;
  t.id = id;
  t.model_config_id = model_config_id.empty() ? id : std::move(model_config_id);
  t.objective = objective;
  t.grouping = grouping;
  t.nominal_epochs = nominal_epochs;
  initial = SearchSpace(initial.name(), initial.dimensions(), 1, std::nullopt, initial.audit());
  t.spaces.emplace(1, initial);
  store_.commit({{"kind", "thread-created"}, {"thread", id}, {"thread_state", t}});
}

std::int64_t Engine::next_space_version(const std::string& thread) const {
  return copy_thread(store_, thread).latest_version() + 1;
}

void Engine::add_space(const std::string& thread, const SearchSpace& space) {
  std::lock_guard lock(create_mutex_);
  const Thread t = copy_thread(store_, thread);
  if (space.version() != t.latest_version() + 1)
    throw InvalidArgument("space version " + std::to_string(space.version()) + " is not the next version " +
                          std::to_string(t.latest_version() + 1));
  if (space.parent() && !t.spaces.count(*space.parent()))
    throw NotFound("parent space version " + std::to_string(*space.parent()) + " is not in thread '" + thread + "'");
  for (const auto& d : space.dimensions()) d.validate();
  store_.commit({{"kind", "space-created"}, {"thread", thread}, {"space", space}});
}

SearchSpace Engine::prune_sprint(const std::string& sprint_id, std::size_t k, const MarginPolicy& margins,
                                 const std::vector<std::pair<std::string, Value>>& freezes) {
  const Sprint sprint = copy_sprint(store_, sprint_id);
  if (sprint.status != SprintStatus::complete)
    throw Conflict("sprint '" + sprint_id + "' is " + to_string(sprint.status) + "; only complete sprints can be pruned");
  const Thread thread = copy_thread(store_, sprint.thread_id);
  const SearchSpace& base = thread.space(sprint.space_version);
  const std::int64_t version = thread.latest_version() + 1;
  SearchSpace pruned = prune_to_top_k(base, sprint.trials, k, margins, version);
  std::vector<SpaceEdit> audit = pruned.audit();
  for (const auto& [dim, value] : freezes) {
    // the freezes land in the same version as the prune
    pruned = freeze_dimension(SearchSpace(pruned.name(), pruned.dimensions(), base.version()), dim, value, version);
    audit.insert(audit.end(), pruned.audit().begin(), pruned.audit().end());
  }
  SearchSpace out(base.name(), pruned.dimensions(), version, base.version(), std::move(audit));
  add_space(sprint.thread_id, out);
  return out;
}

void Engine::check_priming(const Sprint& target, const Sprint& source, PrimingMode mode) const {
  if (target.thread_id != source.thread_id)
    throw PrimingError(PrimingViolation::thread_isolation,
                       "sprint '" + source.id + "' belongs to thread '" + source.thread_id +
                           "'; threads stay isolated from each other");
  if (!(target.config.init == source.config.init) && !target.config.allow_init_mismatch)
    throw PrimingError(PrimingViolation::init_mismatch,
                       "priming requires identical initialization checkpoints (E" +
                           std::to_string(source.config.init.epoch) + "_S" + std::to_string(source.config.init.step) +
                           " vs E" + std::to_string(target.config.init.epoch) + "_S" +
                           std::to_string(target.config.init.step) + ")");
  if (mode == PrimingMode::warm && !(target.config.fidelity == source.config.fidelity))
    throw PrimingError(PrimingViolation::fidelity_mismatch,
                       "warm priming requires identical fidelity (" + source.config.fidelity.designation() + " vs " +
                           target.config.fidelity.designation() + "); use cold priming");
  if (source.status == SprintStatus::running) throw Conflict("source sprint '" + source.id + "' is still running");
  if (target.status != SprintStatus::pending) throw Conflict("sprint '" + target.id + "' is no longer pending");
}

json Engine::prime_event(const Sprint& target, const Sprint& source, PrimingMode mode, std::size_t top_n,
                         const SearchSpace& target_space) const {
  json trials = json::array(), queued = json::array();
  std::int64_t next_id = 0;
  for (const auto& t : target.trials) next_id = std::max(next_id, t.id + 1);
  const auto ranked = rank_usable(source.trials);
  for (std::size_t r = 0; r < std::min(top_n, ranked.size()); ++r) {
    const Trial& src = source.trials[ranked[r]];
    if (!contains(target_space, src.point)) continue;
    if (mode == PrimingMode::warm) {
      Trial t = src;
      t.id = next_id++;
      t.ticks.clear();
      t.rungs.clear();
      t.provenance = {ProvenanceKind::warm_primed, source.id, src.id};
      t.source = SuggestionSource::primed;
      trials.push_back(t);
    } else {
      queued.push_back(QueuedPoint{src.point, source.id, src.id});
    }
  }
  return {{"kind", "sprint-primed"}, {"thread", target.thread_id}, {"sprint", target.id},
          {"mode", to_string(mode)},  {"source", source.id},        {"requested", top_n},
          {"trials", trials},         {"queued", queued}};
}

std::string Engine::create_sprint(const std::string& thread_id, const SprintConfig& config,
                                  std::optional<std::int64_t> space_version, std::string name,
                                  std::optional<PrimingRequest> priming) {
  config.validate();
  std::lock_guard lock(create_mutex_);
  const auto [thread, created] = store_.read([&](const StoreState& s) {
    return std::make_pair(s.thread(thread_id), s.sprints_created);
  });
  const std::int64_t version = space_version.value_or(thread.latest_version());
  const SearchSpace& space = thread.space(version);
  const FidelitySpec& f = config.fidelity;
  if (f.scheduler_enabled && f.max_epochs < thread.nominal_epochs && f.early_stop == EarlyStop::none)
    throw InvalidArgument("the learning-rate schedule spans " + std::to_string(thread.nominal_epochs) +
                          " epochs; capping it at " + std::to_string(f.max_epochs) +
                          " would compress the cycle. Keep max_epochs nominal and stop early instead");

  Sprint s;
  s.id = "s" + std::to_string(created + 1);
  s.thread_id = thread_id;
  s.config = config;
  s.space_version = version;
  if (name.empty())
    name = sprint_name({thread.objective, thread_id, thread.grouping.empty() ? "NONE" : thread.grouping, f, config.init,
                        "v" + std::to_string(thread.sprint_ids.size() + 1)});
  else
    parse_sprint_name(name);
  s.name = std::move(name);

  std::optional<json> primed;
  if (priming) {
    const Sprint source = copy_sprint(store_, priming->source);
    check_priming(s, source, priming->mode);
    primed = prime_event(s, source, priming->mode, priming->top_n, space);
  }
  store_.commit({{"kind", "sprint-created"}, {"thread", thread_id}, {"sprint", s.id}, {"sprint_state", s}});
  if (primed) store_.commit(*primed);
  return s.id;
}

std::size_t Engine::warm_prime(const std::string& target, const std::string& source, std::size_t top_n) {
  std::lock_guard lock(create_mutex_);
  const Sprint t = copy_sprint(store_, target);
  const Sprint src = copy_sprint(store_, source);
  check_priming(t, src, PrimingMode::warm);
  if (top_n == 0) return 0;
  const json e = prime_event(t, src, PrimingMode::warm, top_n, copy_thread(store_, t.thread_id).space(t.space_version));
  store_.commit(e);
  return e.at("trials").size();
}

std::size_t Engine::cold_prime(const std::string& target, const std::string& source, std::size_t top_n) {
  std::lock_guard lock(create_mutex_);
  const Sprint t = copy_sprint(store_, target);
  const Sprint src = copy_sprint(store_, source);
  check_priming(t, src, PrimingMode::cold);
  if (top_n == 0) return 0;
  const json e = prime_event(t, src, PrimingMode::cold, top_n, copy_thread(store_, t.thread_id).space(t.space_version));
  store_.commit(e);
  return e.at("queued").size();
}

void Engine::claim(const std::string& sprint_id, int worker_limit) {
  if (worker_limit < 1) throw InvalidArgument("worker_limit must be >= 1");
  std::lock_guard lock(create_mutex_);
  const auto [sprint, busy] = store_.read([&](const StoreState& s) {
    const Sprint& sp = s.sprint(sprint_id);
    bool other = false;
    for (const auto& id : s.thread(sp.thread_id).sprint_ids)
      if (id != sprint_id && s.sprint(id).status == SprintStatus::running) other = true;
    return std::make_pair(sp, other);
  });
  if (sprint.status != SprintStatus::pending)
    throw Conflict("sprint '" + sprint_id + "' is " + to_string(sprint.status) + ", not pending");
  if (busy) throw Conflict("thread '" + sprint.thread_id + "' already has a running sprint");
  const SearchSpace& space = copy_thread(store_, sprint.thread_id).space(sprint.space_version);
  // an all-frozen space is legal: every trial evaluates the same point
  if (space.dimensions().empty()) throw InvalidArgument("no active dimensions");
  store_.commit({{"kind", "sprint-started"}, {"thread", sprint.thread_id}, {"sprint", sprint_id},
                 {"worker_limit", worker_limit}});
}

SprintResult Engine::run_sprint(const std::string& sprint_id, const ObjectiveHandle& objective, int worker_limit) {
  claim(sprint_id, worker_limit);
  return run_claimed(sprint_id, objective);
}

SprintResult Engine::run_claimed(const std::string& sprint_id, const ObjectiveHandle& objective) {
  const Sprint initial = copy_sprint(store_, sprint_id);
  if (initial.status != SprintStatus::running) throw Conflict("sprint '" + sprint_id + "' was not claimed");
  const SprintConfig& cfg = initial.config;
  const SearchSpace space = copy_thread(store_, initial.thread_id).space(initial.space_version);
  const std::string& thread_id = initial.thread_id;
  const auto workers = static_cast<std::size_t>(std::max(initial.worker_limit, 1));

  std::optional<HyperbandPruner> pruner;
  if (cfg.pruner == PrunerKind::hyperband)
    pruner.emplace(derive_config(cfg.fidelity.max_epochs + cfg.calibration_epochs, cfg.eta));

  struct Done {
    std::int64_t id;
    TrialStatus status;
    std::optional<double> score;
    std::string error;
  };
  std::mutex mu;
  std::condition_variable cv;
  std::deque<Done> done;
  std::map<std::int64_t, std::thread> running;
  std::map<std::pair<int, double>, std::vector<RungRecord>> rung_table;  // (bracket, resource)
  std::map<std::int64_t, std::vector<RungRecord>> held;

  std::int64_t next_id = 0;
  for (const auto& t : initial.trials) next_id = std::max(next_id, t.id + 1);
  std::size_t launched = 0, fresh = 0, failures = 0, finished = 0;
  std::string error;

  auto evaluate = [&, thread_id](Trial trial, int bracket) {
    EvalContext ctx{cfg.fidelity, trial.seed, trial.rotation_index, cfg.train_stride, cfg.calibration_epochs};
    bool stop_requested = false;
    Reporter reporter = [&, id = trial.id, bracket](int epoch, double score, bool prunable) {
      json ev{{"kind", "tick"}, {"thread", thread_id}, {"sprint", sprint_id}, {"trial", id},
              {"epoch", epoch}, {"score", score},      {"prunable", prunable}};
      bool keep = true;
      if (pruner && prunable && std::isfinite(score)) {
        std::lock_guard lock(mu);
        json rungs = json::array();
        for (const auto& r : pruner->crossings(id, bracket, epoch, score, held[id])) {
          held[id].push_back(r);
          auto& history = rung_table[{bracket, r.resource}];
          history.push_back(r);
          rungs.push_back(r);
          if (should_prune(history, score, cfg.eta)) keep = false;
        }
        ev["rungs"] = std::move(rungs);
      }
      store_.commit(std::move(ev));
      if (!keep) stop_requested = true;
      return keep;
    };
    Done d{trial.id, TrialStatus::complete, std::nullopt, ""};
    try {
      const double score = objective.evaluate(trial.point, ctx, reporter);
      d.score = score;
      if (!std::isfinite(score)) {
        d.status = TrialStatus::failed;
        d.score.reset();
        d.error = "non-finite score";
      } else if (stop_requested) {
        d.status = TrialStatus::pruned;
      }
    } catch (const std::exception& e) {
      d.status = TrialStatus::failed;
      d.error = e.what();
    }
    {
      std::lock_guard lock(mu);
      done.push_back(std::move(d));
    }
    cv.notify_all();
  };

  auto finish_one = [&](std::unique_lock<std::mutex>& lock) {
    cv.wait(lock, [&] { return !done.empty(); });
    Done d = std::move(done.front());
    done.pop_front();
    std::thread worker = std::move(running.at(d.id));
    running.erase(d.id);
    lock.unlock();
    worker.join();
    store_.commit({{"kind", "trial-finished"},
                   {"thread", thread_id},
                   {"sprint", sprint_id},
                   {"trial", d.id},
                   {"status", to_string(d.status)},
                   {"final_score", d.score ? json(*d.score) : json(nullptr)},
                   {"error", d.error}});
    ++finished;
    if (d.status == TrialStatus::failed) ++failures;
    lock.lock();
  };

  try {
    std::unique_lock lock(mu);
    while (true) {
      const bool budget_left = launched < cfg.n_calls && 2 * failures <= cfg.n_calls;
      if (budget_left && running.size() < workers) {
        lock.unlock();
        const Sprint committed = copy_sprint(store_, sprint_id);
        const auto ordinal = static_cast<std::uint64_t>(launched);
        Trial trial;
        trial.id = next_id++;
        trial.fidelity = cfg.fidelity;
        trial.status = TrialStatus::running;
        trial.seed = derive_seed(derive_seed(cfg.seed, kEvalStream), ordinal);
        trial.rotation_index = static_cast<std::int64_t>(ordinal);
        const std::uint64_t sample_seed = derive_seed(derive_seed(cfg.seed, kSampleStream), ordinal);
        bool dequeued = false;
        if (!committed.queue.empty()) {
          const QueuedPoint& q = committed.queue.front();
          trial.point = q.point;
          trial.provenance = {ProvenanceKind::cold_primed, q.source_sprint, q.source_trial};
          trial.source = SuggestionSource::primed;
          dequeued = true;
        } else if (fresh < cfg.n_random) {
          trial.point = sample_uniform(space, sample_seed);
          trial.source = SuggestionSource::random;
        } else if (cfg.sampler == SamplerKind::gp) {
          trial.point = gp_suggest(space, committed.trials, cfg.gp, sample_seed).point;
          trial.source = SuggestionSource::surrogate;
        } else {
          trial.point = tpe_suggest(committed.trials, space, cfg.tpe, sample_seed);
          trial.source = SuggestionSource::surrogate;
        }
        if (!dequeued) ++fresh;
        const int bracket = pruner ? pruner->bracket_of(static_cast<std::int64_t>(ordinal)) : 0;
        store_.commit({{"kind", "trial-started"},
                       {"thread", thread_id},
                       {"sprint", sprint_id},
                       {"trial", trial.id},
                       {"dequeued", dequeued},
                       {"bracket", bracket},
                       {"trial_state", trial}});
        ++launched;
        lock.lock();
        running.emplace(trial.id, std::thread(evaluate, std::move(trial), bracket));
        continue;
      }
      if (running.empty()) break;
      finish_one(lock);
    }
  } catch (const std::exception& e) {
    error = e.what();
    std::unique_lock lock(mu);
    while (!running.empty()) finish_one(lock);
  }

  SprintStatus status = SprintStatus::complete;
  if (!error.empty()) {
    status = SprintStatus::failed;
  } else if (2 * failures > finished) {
    status = SprintStatus::failed;
    error = std::to_string(failures) + " of " + std::to_string(finished) + " trials failed";
  }
  if (options_.fault_hook) options_.fault_hook("before-sprint-summary", sprint_id);
  store_.commit({{"kind", "sprint-finished"}, {"thread", thread_id}, {"sprint", sprint_id},
                 {"status", to_string(status)}, {"error", error}});
  return result(sprint_id);
}

SprintResult Engine::result(const std::string& sprint_id) const {
  const Sprint sprint = copy_sprint(store_, sprint_id);
  const SearchSpace space = copy_thread(store_, sprint.thread_id).space(sprint.space_version);
  SprintResult r;
  r.sprint_id = sprint.id;
  r.status = sprint.status;
  if (auto i = sprint.incumbent()) r.incumbent = sprint.trials[*i];
  r.trials = sprint.trials;
  for (const auto& t : sprint.trials) r.failed_trials += t.status == TrialStatus::failed ? 1 : 0;
  for (const auto& d : space.dimensions()) r.scatter.push_back(scatter_series(sprint, space, d.name));
  r.error = sprint.error;
  return r;
}

}  // namespace sprintopt
