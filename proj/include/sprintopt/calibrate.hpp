#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sprintopt::calibrate {

/// Mention, coreference and per-class relation thresholds. An instance is
/// predicted positive when its probability is strictly above the threshold.
struct ThresholdSet {
  double mention = 0.5;
  double coref = 0.5;
  std::vector<double> relation;

  static ThresholdSet uniform(double value, std::size_t relation_classes);
  void validate(std::optional<std::size_t> relation_classes = std::nullopt) const;
  bool operator==(const ThresholdSet&) const = default;
};

enum class Component { mention = 0, coref = 1, relation = 2 };
using ComponentMask = std::array<bool, 3>;

const char* to_string(Component c);

/// {base, base - delta, base + delta} clipped to [0, 1] and deduplicated, base first.
struct CandidateSet {
  double base = 0.5;
  double delta = 0.05;

  std::vector<double> values() const;
};

struct ScoredInstance {
  double probability = 0.0;
  bool gold = false;
  std::int32_t class_id = 0;
};

double micro_f_beta(std::int64_t tp, std::int64_t fp, std::int64_t fn, double beta = 1.0);

struct ScutResult {
  double threshold = 1.0;
  double f_beta = 0.0;  // at the unguarded optimum
  bool guarded = false;
};

/// Best F-beta cut over midpoints of consecutive distinct probabilities plus
/// 0 and 1, smallest cut on ties, 1.0 when nothing can be captured; then
/// raised to `low_bound`.
ScutResult scut(std::span<const ScoredInstance> instances, double beta = 1.0, double low_bound = 0.05);

struct PerClassThresholds {
  std::vector<double> thresholds;
  std::vector<std::int32_t> empty_classes;  // defaulted to low_bound
};

PerClassThresholds scut_per_class(std::span<const ScoredInstance> instances, std::size_t n_classes,
                                  double beta = 1.0, double low_bound = 0.05);

/// Either a perturbation triplet or a fixed value for one component.
struct ComponentChoice {
  double base = 0.5;
  std::optional<double> delta;  // nullopt = fixed

  static ComponentChoice fixed(double v) { return {v, std::nullopt}; }
  static ComponentChoice triplet(double base, double delta) { return {base, delta}; }
};

/// Cartesian product of the component choices. The relation vector is shifted
/// elementwise by the common offsets {0, -delta, +delta} (clipped), so each
/// component contributes at most three options.
std::vector<ThresholdSet> permutations(const ComponentChoice& mention, const ComponentChoice& coref,
                                       const std::vector<double>& relation_base,
                                       std::optional<double> relation_delta);

struct CalibrationPolicy {
  int start_epoch = 11;                        // first fit epoch with hill-climbing
  std::array<int, 3> component_start{1, 11, 11};
  std::vector<ComponentMask> fit_rotation{{false, true, false}, {false, false, true}, {false, true, true}};
  std::vector<ComponentMask> calib_rotation{{true, true, true}};
  bool relation_scut = true;                   // per-class SCut on p^r every fit epoch from its start
  double fit_delta = 0.05;
  double calib_delta = 0.025;
  int max_calib_iters = 7;
  int patience = 1;
  double beta = 1.0;
  double low_bound = 0.05;

  void validate() const;
  /// Components perturbed at fit epoch `epoch` (1-based); all false before start.
  ComponentMask fit_mask(int epoch) const;
  ComponentMask calib_mask(int iteration) const;
};

/// Scores every threshold set of one validation pass.
using BatchEvaluator = std::function<std::vector<double>(std::span<const ThresholdSet>)>;

struct ClimbStep {
  int iteration = 0;
  std::size_t n_permutations = 0;
  double iteration_best = 0.0;
  double best_so_far = 0.0;
  ThresholdSet thresholds;
};

struct ClimbResult {
  ThresholdSet best;
  double best_score = 0.0;
  int iterations = 0;
  std::vector<ClimbStep> trace;
  bool failed = false;
  std::string error;
};

/// Iterative hill-climbing over threshold permutations: each iteration
/// evaluates all permutations around the current set in one pass and moves
/// to the arg-max; stops after `patience` iterations without improvement.
ClimbResult hill_climb(const BatchEvaluator& evaluate, const ThresholdSet& start, const CalibrationPolicy& policy);

/// Per-epoch outputs of training: retained probabilities.
struct EpochPredictions {
  std::vector<ScoredInstance> mention;
  std::vector<ScoredInstance> coref;
  std::vector<ScoredInstance> relation;
};

struct TestScores {
  double relation_f1 = 0.0;
  double mention_f1 = 0.0;
  double coref_f1 = 0.0;
};

class CalibratableModel {
 public:
  virtual ~CalibratableModel() = default;
  virtual std::size_t relation_classes() const = 0;
  /// Trains one epoch (1-based) and returns the retained probabilities.
  /// Stages forward only what passes `current`, so downstream predictions
  /// cover the instances the upstream thresholds let through.
  virtual EpochPredictions train_epoch(int epoch, const ThresholdSet& current) = 0;
  /// Relation F-beta on validation data for every set, in one pass.
  virtual std::vector<double> validate(std::span<const ThresholdSet> sets) = 0;
  virtual TestScores test(const ThresholdSet& thresholds) = 0;
  virtual void save_checkpoint() = 0;
  virtual void restore_checkpoint() = 0;
};

struct EpochRecord {
  int epoch = 0;
  std::size_t n_permutations = 0;
  double validation_f1 = 0.0;
  ThresholdSet thresholds;
  bool checkpoint = false;
};

struct FitReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_validation_f1 = 0.0;
  ClimbResult calibration;
  ThresholdSet final_thresholds;
  TestScores test;
  bool stopped = false;  // the progress hook asked to stop
  bool failed = false;
  std::string error;
};

/// Train-calibrate-validate for `epochs` epochs, then hill-climbing
/// calibration on the best checkpoint, then test.
FitReport fit_with_calibration(CalibratableModel& model, int epochs, const CalibrationPolicy& policy,
                               const ThresholdSet& initial);

/// Callback invoked after every fit epoch and calibration iteration with
/// (tick epoch, validation F1); returning false stops the fit early.
using ProgressHook = std::function<bool(int epoch, double validation_f1, bool calibration)>;

FitReport fit_with_calibration(CalibratableModel& model, int epochs, const CalibrationPolicy& policy,
                               const ThresholdSet& initial, const ProgressHook& hook);

}  // namespace sprintopt::calibrate
