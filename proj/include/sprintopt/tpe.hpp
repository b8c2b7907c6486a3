#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sprintopt/space.hpp"
#include "sprintopt/trial.hpp"

namespace sprintopt {

struct TpeConfig {
  double gamma = 0.25;             // fraction of trials treated as "good"
  std::size_t n_candidates = 24;   // draws from l(x) per dimension
  std::size_t n_startup = 10;      // uniform samples before the model activates
  std::string bandwidth_rule = "nearest_neighbor";

  void validate() const;
};

/// Indices into the trial list, best-first within `good`.
struct TrialSplit {
  std::vector<std::size_t> good;
  std::vector<std::size_t> bad;
};

/// Splits usable trials at the gamma quantile: the max(1, ceil(gamma * n))
/// lowest scores are good; ties go to the earlier trial id.
TrialSplit split_trials(std::span<const Trial> trials, double gamma);

std::size_t good_count(std::size_t n, double gamma);

/// Parzen estimator over one dimension. Numeric dimensions are modeled in
/// unit coordinates as an equal-weight mixture of truncated Gaussians (one per
/// observation) and a uniform prior; categorical dimensions use add-one
/// smoothed frequencies.
class ParzenDensity {
 public:
  bool categorical() const noexcept { return categorical_; }

  /// Density at unit coordinate u (0 outside [0, 1]).
  double pdf(double u) const;
  double log_pdf(double u) const;
  double sample_unit(Rng& rng) const;

  double probability(std::size_t category) const;
  std::size_t sample_category(Rng& rng) const;

  const std::vector<double>& centers() const noexcept { return centers_; }
  const std::vector<double>& bandwidths() const noexcept { return bandwidths_; }
  const std::vector<double>& category_probabilities() const noexcept { return probabilities_; }

 private:
  friend ParzenDensity fit_parzen(std::span<const Value> values, const Dimension& dim,
                                  const std::string& bandwidth_rule);
  bool categorical_ = false;
  std::vector<double> centers_;
  std::vector<double> bandwidths_;
  std::vector<double> normalizers_;  // truncated mass of each component on [0, 1]
  std::vector<double> probabilities_;
};

ParzenDensity fit_parzen(std::span<const Value> values, const Dimension& dim,
                         const std::string& bandwidth_rule = "nearest_neighbor");

/// Candidates drawn from l for one dimension, their log l - log g scores, and
/// the arg-max.
struct DimensionProposal {
  std::vector<Value> candidates;
  std::vector<double> scores;
  std::size_t chosen = 0;
};

DimensionProposal propose_dimension(const ParzenDensity& good, const ParzenDensity& bad, const Dimension& dim,
                                    std::size_t n_candidates, Rng& rng);

/// Independent per-dimension TPE proposal; uniform sampling until the
/// history holds n_startup usable trials.
HPoint tpe_suggest(std::span<const Trial> trials, const SearchSpace& space, const TpeConfig& config,
                   std::uint64_t seed);

}  // namespace sprintopt
