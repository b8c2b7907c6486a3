#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sprintopt/space.hpp"

namespace sprintopt {

enum class EarlyStop { none, end_of_warmup };

/// Cost/accuracy level of an evaluation: 1/k_T of the training data, 1/k_V
/// of the validation data, and an epoch cap.
struct FidelitySpec {
  int train_denominator = 1;
  int val_denominator = 1;
  int max_epochs = 1;
  bool scheduler_enabled = false;
  EarlyStop early_stop = EarlyStop::none;

  /// "T{k_T}_V{k_V}_M{max_epochs}"
  std::string designation() const;
  bool is_full_data() const noexcept { return train_denominator == 1 && val_denominator == 1; }

  /// Parses a designation; scheduler and early-stop take their defaults.
  static FidelitySpec parse(const std::string& designation);

  bool operator==(const FidelitySpec&) const = default;
};

/// Subset `rotation_index mod denominator` of a fixed contiguous partition of
/// a seed-shuffled permutation of [0, n_items). Sizes differ by at most one.
std::vector<std::size_t> rotate_subset(std::size_t n_items, int denominator, std::int64_t rotation_index,
                                       std::uint64_t seed = 0);

const char* to_string(EarlyStop e);
EarlyStop early_stop_from_string(const std::string& s);

enum class TrialStatus { pending, running, pruned, failed, complete };
const char* to_string(TrialStatus s);
TrialStatus trial_status_from_string(const std::string& s);

enum class ProvenanceKind { fresh, warm_primed, cold_primed };
const char* to_string(ProvenanceKind p);
ProvenanceKind provenance_from_string(const std::string& s);

struct Provenance {
  ProvenanceKind kind = ProvenanceKind::fresh;
  std::string source_sprint;
  std::int64_t source_trial = -1;

  bool operator==(const Provenance&) const = default;
};

/// How the point of a fresh trial was chosen.
enum class SuggestionSource { random, surrogate, primed };
const char* to_string(SuggestionSource s);
SuggestionSource suggestion_source_from_string(const std::string& s);

struct RungRecord {
  std::int64_t trial_id = 0;
  double resource = 0.0;
  double score = 0.0;

  bool operator==(const RungRecord&) const = default;
};

struct TickRecord {
  int epoch = 0;
  double score = 0.0;
  bool prunable = false;

  bool operator==(const TickRecord&) const = default;
};

struct Trial {
  std::int64_t id = 0;
  HPoint point;
  FidelitySpec fidelity;
  TrialStatus status = TrialStatus::pending;
  std::vector<TickRecord> ticks;
  std::vector<RungRecord> rungs;
  std::optional<double> final_score;
  Provenance provenance;
  SuggestionSource source = SuggestionSource::random;
  std::uint64_t seed = 0;
  std::int64_t rotation_index = 0;
  std::string error;
  std::string started_at;
  std::string finished_at;

  /// Completed with a finite score; the only trials samplers learn from.
  bool usable() const;

  bool operator==(const Trial&) const = default;
};

/// Indices of usable trials ordered best-first (score ascending, then id).
std::vector<std::size_t> rank_usable(std::span<const Trial> trials);

}  // namespace sprintopt
