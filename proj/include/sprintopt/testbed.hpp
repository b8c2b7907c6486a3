#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sprintopt/calibrate.hpp"
#include "sprintopt/objective.hpp"
#include "sprintopt/space.hpp"

namespace sprintopt {

enum class Landscape { quadratic_bowl, branin_like, multitask_sim };

const char* to_string(Landscape l);
Landscape landscape_from_string(const std::string& s);

/// Closed-form stand-in for a trainable model. The per-epoch score is
///
///   score(e) = asymptote(x) + warmup_penalty(x) + C exp(-e_eff / tau(lr))
///              + subset_offset(rotation) + noise
///
/// where e_eff counts epochs at full learning rate (a linear warmup ramps it
/// when the scheduler is on) and tau shrinks with lr. Lower is better.
struct SyntheticObjective {
  Landscape landscape = Landscape::quadratic_bowl;
  SearchSpace space;
  HPoint optimum;                     // planted; asymptote is minimal here
  double noise_sd = 0.0;
  double base_score = 0.1;
  double curvature = 1.0;             // asymptote = base + curvature * |u - u*|^2
  double transient = 0.3;             // C
  double tau0 = 6.0;                  // epochs
  double tau_lr_slope = 0.3;          // tau = tau0 exp(-slope (u_lr - u*_lr))
  double warmup_penalty = 0.002;      // per squared epoch away from the planted warmup
  double subset_amplitude = 0.001;
  double calibration_gain = 0.002;
  std::uint64_t subset_seed = 0x5eed;
  int nominal_epochs = 25;
  std::string lr_dimension = "lr";
  std::string warmup_dimension = "lr_warmup";

  /// Plants the optimum at deterministic interior coordinates unless given.
  static SyntheticObjective make(Landscape landscape, SearchSpace space,
                                 std::optional<HPoint> optimum = std::nullopt);

  /// Normalized coordinate of every non-categorical, non-warmup dimension
  /// of the objective's space, in space order.
  std::vector<double> unit_coordinates(const HPoint& point) const;
  /// Euclidean distance to the planted optimum in those coordinates.
  double distance_to_optimum(const HPoint& point) const;

  double asymptote(const HPoint& point) const;
  double warmup_term(const HPoint& point, const FidelitySpec& fidelity) const;
  double tau(const HPoint& point) const;
  /// Deterministic offset of the data subsets picked by `rotation_index`;
  /// zero at full data. |offset| <= 2 * subset_amplitude.
  double subset_offset(const FidelitySpec& fidelity, std::int64_t rotation_index) const;
  /// Warmup length in epochs, or 0 when the scheduler is off.
  int warmup_epochs(const HPoint& point, const FidelitySpec& fidelity) const;
  /// Number of training epochs actually run (early stop at warmup end).
  int epochs_run(const HPoint& point, const FidelitySpec& fidelity) const;
  /// Training-epoch scores 1..epochs_run, before calibration.
  std::vector<double> trajectory(const HPoint& point, const EvalContext& context) const;
};

/// Effective full-rate epochs after `epoch` epochs with a linear warmup of
/// `warmup` epochs (0 = no warmup).
double effective_epochs(int epoch, int warmup);

/// Emits the resource ticks of the run through `reporter` and returns the
/// last reported score.
double evaluate_synthetic(const SyntheticObjective& objective, const HPoint& point, const EvalContext& context,
                          const Reporter& reporter);

class SyntheticHandle final : public ObjectiveHandle {
 public:
  explicit SyntheticHandle(SyntheticObjective objective) : objective_(std::move(objective)) {}
  std::string name() const override { return to_string(objective_.landscape); }
  int nominal_epochs() const override { return objective_.nominal_epochs; }
  double evaluate(const HPoint& point, const EvalContext& context, const Reporter& reporter) const override {
    return evaluate_synthetic(objective_, point, context, reporter);
  }
  const SyntheticObjective& objective() const noexcept { return objective_; }

 private:
  SyntheticObjective objective_;
};

// ---------------------------------------------------------------------------
// Toy chained multi-task pipeline

struct ToySpan {
  double latent = 0.0;
  bool gold = false;
};

struct ToyPair {
  std::int32_t a = 0;
  std::int32_t b = 0;
  double latent = 0.0;
  bool gold = false;
};

struct ToyRelation {
  std::int32_t pair = 0;
  std::int32_t class_id = 0;
  double latent = 0.0;
  bool gold = false;
};

struct ToyDocument {
  std::vector<ToySpan> spans;
  std::vector<ToyPair> pairs;
  std::vector<ToyRelation> relations;
};

/// Synthetic documents with planted stage thresholds: a probability equals
/// its planted threshold exactly when the instance latent is zero.
struct ToyCorpus {
  std::uint64_t seed = 0;
  int relation_classes = 0;
  double planted_mention = 0.4;
  double planted_coref = 0.55;
  std::vector<double> planted_relation;
  std::vector<ToyDocument> train;
  std::vector<ToyDocument> validation;
  std::vector<ToyDocument> test;

  std::size_t gold_relations(const std::vector<ToyDocument>& docs) const;
};

/// `n_docs` validation and test documents and four times as many training
/// documents; relation classes follow a Zipf law so rare classes have only a
/// handful of positives.
ToyCorpus generate_corpus(std::uint64_t seed, int n_docs, int relation_classes);

struct StageCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;

  double f1() const;
};

struct ChainCounts {
  StageCounts mention;
  StageCounts coref;
  StageCounts relation;
};

/// Stage probabilities of one split at one epoch, aligned with its documents.
struct SplitProbabilities {
  std::vector<std::vector<double>> mention;
  std::vector<std::vector<double>> coref;
  std::vector<std::vector<double>> relation;
};

/// Chained filtering: spans above the mention threshold feed coref, pairs
/// with both spans kept and above the coref threshold feed relations.
ChainCounts toy_predict(const std::vector<ToyDocument>& docs, const SplitProbabilities& probabilities,
                        const calibrate::ThresholdSet& thresholds);

struct ToyPipelineOptions {
  double max_quality = 0.6;   // latent separation reached after long training
  double quality_rate = 5.0;  // epochs to approach it
  double jitter = 0.15;        // per-epoch prediction wobble
  int train_denominator = 1;
  int val_denominator = 1;
  std::int64_t rotation_index = 0;
};

/// Reference CalibratableModel over a ToyCorpus.
class ToyPipeline final : public calibrate::CalibratableModel {
 public:
  explicit ToyPipeline(ToyCorpus corpus, ToyPipelineOptions options = {});

  std::size_t relation_classes() const override;
  calibrate::EpochPredictions train_epoch(int epoch, const calibrate::ThresholdSet& current) override;
  std::vector<double> validate(std::span<const calibrate::ThresholdSet> sets) override;
  calibrate::TestScores test(const calibrate::ThresholdSet& thresholds) override;
  void save_checkpoint() override { checkpoint_ = epoch_; }
  void restore_checkpoint() override { epoch_ = checkpoint_; }

  const ToyCorpus& corpus() const noexcept { return corpus_; }
  int epoch() const noexcept { return epoch_; }
  /// Number of validation passes so far.
  int validation_passes() const noexcept { return validation_passes_; }
  double quality(int epoch) const;
  SplitProbabilities probabilities(const std::vector<ToyDocument>& docs, int epoch, int split_tag) const;
  const std::vector<ToyDocument>& validation_docs() const noexcept { return val_docs_; }
  const std::vector<ToyDocument>& test_docs() const noexcept { return corpus_.test; }

 private:
  ToyCorpus corpus_;
  ToyPipelineOptions options_;
  std::vector<ToyDocument> train_docs_;
  std::vector<ToyDocument> val_docs_;
  int epoch_ = 0;
  int checkpoint_ = 0;
  int validation_passes_ = 0;
};

/// Engine objective that fits the toy pipeline with calibration. Learning
/// rate and weight decay move the reachable quality; the score is the
/// negated validation relation F1.
class ToyPipelineObjective final : public ObjectiveHandle {
 public:
  ToyPipelineObjective(std::uint64_t corpus_seed, int n_docs, int relation_classes);
  std::string name() const override { return "toy_pipeline"; }
  double evaluate(const HPoint& point, const EvalContext& context, const Reporter& reporter) const override;

 private:
  ToyCorpus corpus_;
};

/// Objective by name over `space` (quadratic_bowl | branin_like |
/// multitask_sim | toy_pipeline).
std::unique_ptr<ObjectiveHandle> make_objective(const std::string& name, const SearchSpace& space);

}  // namespace sprintopt
