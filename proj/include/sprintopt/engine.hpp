#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sprintopt/objective.hpp"
#include "sprintopt/space.hpp"
#include "sprintopt/sprint.hpp"
#include "sprintopt/store.hpp"

namespace sprintopt {

enum class PrimingMode { warm, cold };
const char* to_string(PrimingMode m);
PrimingMode priming_mode_from_string(const std::string& s);

struct PrimingRequest {
  PrimingMode mode = PrimingMode::cold;
  std::string source;
  std::size_t top_n = 3;
};

struct ScatterPoint {
  Value value;
  double score = 0.0;
  std::int64_t trial_id = 0;
  ProvenanceKind provenance = ProvenanceKind::fresh;
};

/// Score against value for one dimension, with the top-k hull and the range a
/// prune would produce.
struct ScatterSeries {
  std::string dimension;
  std::vector<ScatterPoint> points;  // usable trials only
  Dimension current;
  std::optional<Dimension> hull;      // top-k values, no margin
  std::optional<Dimension> proposed;  // what prune_to_top_k would give
};

ScatterSeries scatter_series(const Sprint& sprint, const SearchSpace& space, const std::string& dimension,
                             std::size_t k = 10, const MarginPolicy& margins = {});

struct SprintResult {
  std::string sprint_id;
  SprintStatus status = SprintStatus::pending;
  std::optional<Trial> incumbent;
  std::vector<Trial> trials;
  std::vector<ScatterSeries> scatter;
  std::size_t failed_trials = 0;
  std::string error;
};

struct EngineOptions {
  /// Called at named points of run_sprint; a throwing hook simulates a crash
  /// there. Stage names: "before-sprint-summary".
  std::function<void(const std::string& stage, const std::string& sprint_id)> fault_hook;
};

/// Sprint and thread orchestration over a Store. Every state change is an
/// event committed to the store.
class Engine {
 public:
  explicit Engine(Store& store, EngineOptions options = {});

  Store& store() noexcept { return store_; }

  /// Registers a thread with its initial space (stored as version 1).
  void create_thread(const std::string& id, const std::string& objective, const std::string& grouping,
                     SearchSpace initial, int nominal_epochs = 25, std::string model_config_id = "");

  /// Next free space version of a thread.
  std::int64_t next_space_version(const std::string& thread) const;
  /// Records a derived space; its version must be next_space_version().
  void add_space(const std::string& thread, const SearchSpace& space);

  /// prune_to_top_k over a complete sprint's trials plus optional freezes,
  /// stored as one new space version.
  SearchSpace prune_sprint(const std::string& sprint_id, std::size_t k, const MarginPolicy& margins = {},
                           const std::vector<std::pair<std::string, Value>>& freezes = {});

  /// Creates a pending sprint on a space version (latest by default) and
  /// applies the optional priming. Priming rules are checked before anything
  /// is written. Returns the sprint id.
  std::string create_sprint(const std::string& thread, const SprintConfig& config,
                            std::optional<std::int64_t> space_version = std::nullopt, std::string name = "",
                            std::optional<PrimingRequest> priming = std::nullopt);

  /// Imports the source's top_n usable trials with their scores. Returns the
  /// number imported after filtering by the target space.
  std::size_t warm_prime(const std::string& target, const std::string& source, std::size_t top_n);
  /// Queues the source's top_n points for re-evaluation. Returns the number queued.
  std::size_t cold_prime(const std::string& target, const std::string& source, std::size_t top_n);

  SprintResult run_sprint(const std::string& sprint_id, const ObjectiveHandle& objective, int worker_limit = 1);

  /// Marks a pending sprint as running so no other caller can start it. At
  /// most one sprint per thread runs at a time.
  void claim(const std::string& sprint_id, int worker_limit);
  /// Executes a sprint previously claimed.
  SprintResult run_claimed(const std::string& sprint_id, const ObjectiveHandle& objective);

  SprintResult result(const std::string& sprint_id) const;

 private:
  void check_priming(const Sprint& target, const Sprint& source, PrimingMode mode) const;
  json prime_event(const Sprint& target, const Sprint& source, PrimingMode mode, std::size_t top_n,
                   const SearchSpace& target_space) const;

  Store& store_;
  EngineOptions options_;
  std::mutex create_mutex_;  // id allocation and claim checks
};

}  // namespace sprintopt
