#include "sprintopt/three_phase.hpp"

#include "sprintopt/errors.hpp"

namespace sprintopt {

ThreePhaseConfig ThreePhaseConfig::defaults(const std::string& thread, std::uint64_t seed, int nominal_epochs) {
  ThreePhaseConfig c;
  c.thread = thread;
  c.seed = seed;

  c.phase1.sampler = SamplerKind::gp;
  c.phase1.fidelity = FidelitySpec::parse("T6_V4_M1");
  c.phase1.n_calls = 120;
  c.phase1.n_random = 60;

  c.phase2.sampler = SamplerKind::gp;
  c.phase2.fidelity = FidelitySpec::parse("T6_V4_M" + std::to_string(nominal_epochs));
  c.phase2.fidelity.scheduler_enabled = true;
  c.phase2.fidelity.early_stop = EarlyStop::end_of_warmup;
  c.phase2.n_calls = 90;
  c.phase2.n_random = 30;

  c.phase3.sampler = SamplerKind::tpe;
  c.phase3.pruner = PrunerKind::hyperband;
  c.phase3.fidelity = FidelitySpec::parse("T1_V1_M" + std::to_string(nominal_epochs));
  c.phase3.fidelity.scheduler_enabled = true;
  c.phase3.n_calls = 9;
  c.phase3.n_random = 0;
  c.phase3.calibration_epochs = 7;

  // the three primed points are the whole history when phase 3 starts
  c.tpe.n_startup = 3;
  return c;
}

namespace {

SprintConfig sprint_config(const ThreePhaseConfig& c, const PhaseSettings& p, std::uint64_t stream) {
  SprintConfig s;
  s.sampler = p.sampler;
  s.pruner = p.pruner;
  s.fidelity = p.fidelity;
  s.n_calls = p.n_calls;
  s.n_random = p.n_random;
  s.seed = derive_seed(c.seed, stream);
  s.calibration_epochs = p.calibration_epochs;
  s.gp = c.gp;
  s.tpe = c.tpe;
  return s;
}

PhaseOutcome outcome(const std::string& name, const SprintResult& r, std::int64_t space_version) {
  PhaseOutcome o;
  o.name = name;
  o.sprint_id = r.sprint_id;
  o.status = r.status;
  o.space_version = space_version;
  o.incumbent = r.incumbent;
  for (auto i : rank_usable(r.trials)) o.ranking.push_back(r.trials[i].id);
  return o;
}

}  // namespace

PhaseReport run_three_phase(Engine& engine, const ObjectiveHandle& objective, const ThreePhaseConfig& config) {
  PhaseReport report;
  report.thread = config.thread;
  const Thread thread = engine.store().read([&](const StoreState& s) { return s.thread(config.thread); });
  const SearchSpace start = thread.space(thread.latest_version());
  const bool has_warmup = start.find(config.warmup_dimension) != nullptr;

  auto run_phase = [&](const std::string& name, const PhaseSettings& settings, std::int64_t version,
                       std::uint64_t stream, std::optional<PrimingRequest> priming) {
    const std::string id = engine.create_sprint(config.thread, sprint_config(config, settings, stream), version, "",
                                                std::move(priming));
    const SprintResult r = engine.run_sprint(id, objective, config.worker_limit);
    report.phases.push_back(outcome(name, r, version));
    if (r.status != SprintStatus::complete) throw Error(name + " sprint " + id + " failed: " + r.error);
    return r;
  };

  try {
    // Phase 1: the scheduler is off, so the warmup length is meaningless
    std::int64_t v1 = start.version();
    if (has_warmup) {
      v1 = engine.next_space_version(config.thread);
      engine.add_space(config.thread, freeze_dimension(start, config.warmup_dimension, config.phase1_warmup, v1));
    }
    const SprintResult p1 = run_phase("phase1", config.phase1, v1, 1, std::nullopt);
    const SearchSpace pruned = engine.prune_sprint(p1.sprint_id, config.prune_k, config.margins);
    report.pruned_space_version = pruned.version();

    // Phase 2: warmup becomes a tuned dimension within its bounds
    std::int64_t v2 = pruned.version();
    if (has_warmup) {
      v2 = engine.next_space_version(config.thread);
      Dimension warmup = Dimension::integer(config.warmup_dimension, config.warmup_low, config.warmup_high);
      engine.add_space(config.thread, replace_dimension(pruned, warmup, v2));
    }
    const SprintResult p2 = run_phase("phase2", config.phase2, v2, 2, std::nullopt);

    // Phase 3: full fidelity, the best phase-2 points re-evaluated first
    run_phase("phase3", config.phase3, v2, 3, PrimingRequest{PrimingMode::cold, p2.sprint_id, config.prime_top_n});
    report.complete = true;
  } catch (const std::exception& e) {
    report.error = e.what();
  }
  return report;
}

void to_json(json& j, const PhaseOutcome& p) {
  j = json{{"name", p.name},
           {"sprint", p.sprint_id},
           {"status", to_string(p.status)},
           {"space_version", p.space_version},
           {"incumbent", p.incumbent ? json(*p.incumbent) : json(nullptr)},
           {"ranking", p.ranking}};
}

void to_json(json& j, const PhaseReport& r) {
  j = json{{"thread", r.thread},
           {"phases", r.phases},
           {"pruned_space_version", r.pruned_space_version ? json(*r.pruned_space_version) : json(nullptr)},
           {"complete", r.complete},
           {"error", r.error}};
}

}  // namespace sprintopt
