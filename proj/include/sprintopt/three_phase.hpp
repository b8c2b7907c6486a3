#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sprintopt/engine.hpp"
#include "sprintopt/serialize.hpp"

namespace sprintopt {

struct PhaseSettings {
  SamplerKind sampler = SamplerKind::gp;
  PrunerKind pruner = PrunerKind::none;
  FidelitySpec fidelity;
  std::size_t n_calls = 0;
  std::size_t n_random = 0;
  int calibration_epochs = 0;
};

/// Baseline tuning process on one thread:
///   1. subspace definition: GP at one epoch on data subsets, scheduler off,
///      warmup frozen; then prune to the top-k hull;
///   2. warmup tuning: GP on the pruned space with the scheduler on, stopping
///      at the end of the warmup;
///   3. full cycle: TPE with Hyperband at full fidelity, cold-primed with the
///      best phase-2 points.
struct ThreePhaseConfig {
  std::string thread;
  std::uint64_t seed = 0;
  int worker_limit = 1;
  std::size_t prune_k = 10;
  MarginPolicy margins;
  std::string warmup_dimension = "lr_warmup";
  std::int64_t phase1_warmup = 7;  // frozen value while the scheduler is off
  std::int64_t warmup_low = 6;
  std::int64_t warmup_high = 8;
  std::size_t prime_top_n = 3;
  PhaseSettings phase1;
  PhaseSettings phase2;
  PhaseSettings phase3;
  GpSettings gp;
  TpeConfig tpe;

  /// 120 calls (60 random), 90 calls (30 random), 9 trials with 7
  /// calibration epochs; `nominal_epochs` is the full schedule length.
  static ThreePhaseConfig defaults(const std::string& thread, std::uint64_t seed, int nominal_epochs = 25);
};

struct PhaseOutcome {
  std::string name;
  std::string sprint_id;
  SprintStatus status = SprintStatus::pending;
  std::int64_t space_version = 0;
  std::optional<Trial> incumbent;
  std::vector<std::int64_t> ranking;  // usable trial ids, best first
};

struct PhaseReport {
  std::string thread;
  std::vector<PhaseOutcome> phases;
  std::optional<std::int64_t> pruned_space_version;
  bool complete = false;
  std::string error;
};

/// Runs the three phases in order; a failed phase stops the run and the
/// partial report is returned.
PhaseReport run_three_phase(Engine& engine, const ObjectiveHandle& objective, const ThreePhaseConfig& config);

void to_json(json& j, const PhaseOutcome& p);
void to_json(json& j, const PhaseReport& r);

}  // namespace sprintopt
