#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "sprintopt/space.hpp"
#include "sprintopt/trial.hpp"

namespace sprintopt {

/// Receives (epoch, score, prunable) ticks; returning false asks the
/// objective to stop. Stop requests are honored at prunable ticks only.
using Reporter = std::function<bool(int epoch, double score, bool prunable)>;

struct EvalContext {
  FidelitySpec fidelity;
  std::uint64_t seed = 0;
  std::int64_t rotation_index = 0;  // selects the data subsets
  int train_stride = 10;            // epochs between prunable ticks
  int calibration_epochs = 0;
};

/// What the engine optimizes. Lower scores are better; implementations must
/// be deterministic given (point, context).
class ObjectiveHandle {
 public:
  virtual ~ObjectiveHandle() = default;
  virtual std::string name() const = 0;
  /// Design length of the learning-rate schedule, in epochs.
  virtual int nominal_epochs() const { return 25; }
  /// Runs the evaluation and returns the last reported score.
  virtual double evaluate(const HPoint& point, const EvalContext& context, const Reporter& reporter) const = 0;
};

}  // namespace sprintopt
