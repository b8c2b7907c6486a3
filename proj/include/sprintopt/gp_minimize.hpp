#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "sprintopt/gp.hpp"
#include "sprintopt/space.hpp"
#include "sprintopt/trial.hpp"

namespace sprintopt {

/// Maps points of a space to the GP's coordinate vector: numeric dimensions to
/// [0, 1] (log dimensions in log coordinates), categorical dimensions one-hot.
/// Frozen dimensions take no coordinates.
class SpaceEncoder {
 public:
  explicit SpaceEncoder(const SearchSpace& space);

  Eigen::Index width() const noexcept { return width_; }
  Eigen::VectorXd encode(const HPoint& point) const;
  /// Clamps to the unit cube, rounds integers, and takes the arg-max of each
  /// one-hot block.
  HPoint decode(const Eigen::Ref<const Eigen::VectorXd>& coords) const;

 private:
  struct Slot {
    Dimension dim;
    Eigen::Index offset;
    Eigen::Index width;
  };
  std::vector<Slot> slots_;
  std::vector<Dimension> frozen_;
  Eigen::Index width_ = 0;
};

struct GpSettings {
  gp::Smoothness smoothness = gp::Smoothness::five_halves;
  std::size_t n_candidates = 1000;
  std::size_t n_perturbed = 10;
  double perturb_sd = 0.05;
  double xi = 0.01;
  double kappa = 1.96;
  double noise_variance = 1e-6;
  bool fit_noise = true;
  int restarts = 5;
  int max_iterations = 25;
};

struct GpSuggestion {
  HPoint point;
  gp::Acquisition acquisition;
};

/// One surrogate-guided proposal: fit the GP to the usable history, draw an
/// acquisition function uniformly from {PI, EI, LCB}, and maximize it over
/// random plus perturbed-incumbent candidates. Falls back to a uniform sample
/// when the history has no usable trials. Deterministic given the seed.
GpSuggestion gp_suggest(const SearchSpace& space, std::span<const Trial> history, const GpSettings& settings,
                        std::uint64_t seed);

/// Objective used by the standalone loop; throwing marks the trial failed.
using ScalarObjective = std::function<double(const HPoint&)>;

struct MinimizeResult {
  std::vector<Trial> trials;
  std::optional<std::size_t> incumbent;
  std::vector<gp::Acquisition> acquisitions;  // one per surrogate-guided trial
};

/// Sequential GP minimization: `n_random` uniform points, then one
/// surrogate-guided point per call. Failed evaluations are recorded and kept
/// out of the surrogate.
MinimizeResult gp_minimize(const ScalarObjective& objective, const SearchSpace& space, std::size_t n_calls,
                           std::size_t n_random, std::uint64_t hedge_seed, const GpSettings& settings = {});

}  // namespace sprintopt
