#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sprintopt/trial.hpp"

namespace sprintopt {

struct HyperbandConfig {
  int max_resource = 1;  // R, epochs
  int eta = 3;           // downsampling rate
  int s_max = 0;         // floor(log_eta R)
  int budget = 1;        // B = (s_max + 1) R
};

HyperbandConfig derive_config(int max_resource, int eta);

struct Rung {
  std::int64_t n_configs;
  double resource;

  bool operator==(const Rung&) const = default;
};

struct Bracket {
  int s = 0;
  std::vector<Rung> rungs;
};

/// Classical Hyperband bracket s: n = ceil((B/R) eta^s / (s+1)) configurations
/// at r = R eta^-s, keeping floor(n eta^-i) at r eta^i for i = 0..s.
Bracket bracket_schedule(const HyperbandConfig& config, int s);

/// Decides whether a trial that just reported `score` at a rung should stop.
/// `rung_history` holds every record at this rung, including this trial's.
/// Keeps the best max(1, floor(n/eta)); the trial is pruned only when strictly
/// worse than the last kept score. A lone record is never pruned.
bool should_prune(std::span<const RungRecord> rung_history, double score, int eta);

struct ResourceTick {
  int epoch;
  bool prunable;
  enum class Kind { train, validation, calibration } kind;

  bool operator==(const ResourceTick&) const = default;
};

/// Reporting schedule: a prunable training checkpoint every `train_stride`
/// epochs, a non-prunable validation report every epoch, then the
/// calibration epochs as non-prunable reports.
std::vector<ResourceTick> resource_ticks(int max_epochs, int train_stride, int calibration_epochs);

/// Asynchronous Hyperband: trials are assigned round-robin to brackets, each
/// bracket running successive halving with rungs at R eta^(i - s).
class HyperbandPruner {
 public:
  explicit HyperbandPruner(HyperbandConfig config) : config_(config) {}

  const HyperbandConfig& config() const noexcept { return config_; }
  int bracket_of(std::int64_t trial_ordinal) const;
  /// Rung resources of bracket s, ascending.
  std::vector<double> rung_resources(int s) const;

  /// Rung records the trial earns by reporting `score` at `epoch`, given the
  /// rungs it already holds.
  std::vector<RungRecord> crossings(std::int64_t trial_id, int bracket, int epoch, double score,
                                    std::span<const RungRecord> already) const;

 private:
  HyperbandConfig config_;
};

}  // namespace sprintopt
