#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sprintopt/gp_minimize.hpp"
#include "sprintopt/space.hpp"
#include "sprintopt/tpe.hpp"
#include "sprintopt/trial.hpp"

namespace sprintopt {

enum class SamplerKind { gp, tpe };
enum class PrunerKind { none, hyperband };
enum class SprintStatus { pending, running, complete, failed };

const char* to_string(SamplerKind s);
const char* to_string(PrunerKind p);
const char* to_string(SprintStatus s);
SamplerKind sampler_from_string(const std::string& s);
PrunerKind pruner_from_string(const std::string& s);
SprintStatus sprint_status_from_string(const std::string& s);

/// Epoch and step of the checkpoint a sprint's trials start from.
struct InitCheckpoint {
  int epoch = 0;
  int step = 0;

  bool operator==(const InitCheckpoint&) const = default;
};

/// The six parts of a sprint name:
/// ModelType.Variant.Grouping.T{kT}_V{kV}_M{E}.E{e}_S{s}.suffix
struct SprintNameParts {
  std::string model_type;
  std::string variant;
  std::string grouping;
  FidelitySpec fidelity;
  InitCheckpoint init;
  std::string suffix;  // may be empty

  bool operator==(const SprintNameParts& o) const {
    return model_type == o.model_type && variant == o.variant && grouping == o.grouping &&
           fidelity.designation() == o.fidelity.designation() && init == o.init && suffix == o.suffix;
  }
};

std::string sprint_name(const SprintNameParts& parts);
SprintNameParts parse_sprint_name(const std::string& name);

struct SprintConfig {
  SamplerKind sampler = SamplerKind::gp;
  PrunerKind pruner = PrunerKind::none;
  FidelitySpec fidelity;
  std::size_t n_calls = 10;
  std::size_t n_random = 5;
  std::uint64_t seed = 0;
  InitCheckpoint init;
  int calibration_epochs = 0;
  int train_stride = 10;
  int eta = 3;
  GpSettings gp;
  TpeConfig tpe;
  bool allow_init_mismatch = false;  // override for the compatible-initialization rule

  void validate() const;
};

/// A point queued by cold priming, evaluated before any fresh suggestion.
struct QueuedPoint {
  HPoint point;
  std::string source_sprint;
  std::int64_t source_trial = -1;

  bool operator==(const QueuedPoint&) const = default;
};

struct Sprint {
  std::string id;
  std::string thread_id;
  std::string name;
  SprintConfig config;
  std::int64_t space_version = 1;
  SprintStatus status = SprintStatus::pending;
  std::vector<Trial> trials;
  std::vector<QueuedPoint> queue;
  std::vector<std::string> primed_from;
  int worker_limit = 0;
  std::string error;
  std::string created_at;
  std::string finished_at;

  /// Index into `trials` of the best usable trial.
  std::optional<std::size_t> incumbent() const;
  Trial* find_trial(std::int64_t id);
  const Trial* find_trial(std::int64_t id) const;
  bool mutating() const noexcept { return status == SprintStatus::running; }
};

struct Thread {
  std::string id;
  std::string model_config_id;
  std::string objective;
  std::string grouping;
  int nominal_epochs = 25;
  std::vector<std::string> sprint_ids;
  std::map<std::int64_t, SearchSpace> spaces;  // by version
  std::string created_at;

  const SearchSpace& space(std::int64_t version) const;
  std::int64_t latest_version() const;
};

}  // namespace sprintopt
