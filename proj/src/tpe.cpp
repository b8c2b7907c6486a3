#include "sprintopt/tpe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "sprintopt/errors.hpp"

namespace sprintopt {

namespace {

double phi(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double gaussian(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

}  // namespace

void TpeConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidArgument("TPE gamma must lie in (0, 1)");
  if (n_candidates < 1) throw InvalidArgument("TPE needs at least one candidate");
  if (bandwidth_rule != "nearest_neighbor")
    throw InvalidArgument("unknown TPE bandwidth rule '" + bandwidth_rule + "'");
}

std::size_t good_count(std::size_t n, double gamma) {
  const auto c = static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(n) - 1e-12));
  return std::max<std::size_t>(1, std::min(c, n));
}

TrialSplit split_trials(std::span<const Trial> trials, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidArgument("TPE gamma must lie in (0, 1)");
  const auto ranked = rank_usable(trials);
  if (ranked.size() < 2) throw InsufficientData("insufficient history");
  const std::size_t n_good = good_count(ranked.size(), gamma);
  TrialSplit split;
  split.good.assign(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(n_good));
  split.bad.assign(ranked.begin() + static_cast<std::ptrdiff_t>(n_good), ranked.end());
  return split;
}

ParzenDensity fit_parzen(std::span<const Value> values, const Dimension& dim, const std::string& bandwidth_rule) {
  if (bandwidth_rule != "nearest_neighbor")
    throw InvalidArgument("unknown TPE bandwidth rule '" + bandwidth_rule + "'");
  ParzenDensity d;
  if (dim.kind == DimensionKind::categorical) {
    d.categorical_ = true;
    std::vector<double> counts(dim.categories.size(), 1.0);
    for (const auto& v : values) {
      auto it = std::find(dim.categories.begin(), dim.categories.end(), std::get<std::string>(v));
      if (it == dim.categories.end()) throw InvalidArgument("category outside dimension '" + dim.name + "'");
      counts[static_cast<std::size_t>(it - dim.categories.begin())] += 1.0;
    }
    const double total = static_cast<double>(values.size() + dim.categories.size());
    for (auto& c : counts) c /= total;
    d.probabilities_ = std::move(counts);
    return d;
  }

  for (const auto& v : values) {
    const double u = to_unit(dim, as_real(v));
    if (!(u >= -1e-12 && u <= 1.0 + 1e-12)) throw InvalidArgument("value outside dimension '" + dim.name + "'");
    d.centers_.push_back(std::clamp(u, 0.0, 1.0));
  }
  const std::size_t n = d.centers_.size();
  const double floor_bw = 1.0 / static_cast<double>(n + 2);  // n Gaussians + the prior, plus one
  std::vector<double> sorted = d.centers_;
  std::sort(sorted.begin(), sorted.end());
  for (double c : d.centers_) {
    double nearest = 0.0;
    if (n > 1) {
      auto it = std::lower_bound(sorted.begin(), sorted.end(), c);
      nearest = std::numeric_limits<double>::infinity();
      // skip one copy of c itself
      const auto self = it;
      if (self != sorted.begin()) nearest = std::min(nearest, c - *(self - 1));
      if (self + 1 != sorted.end()) nearest = std::min(nearest, *(self + 1) - c);
    }
    const double bw = std::clamp(std::max(nearest, floor_bw), floor_bw, 1.0);
    d.bandwidths_.push_back(bw);
    d.normalizers_.push_back(phi((1.0 - c) / bw) - phi((0.0 - c) / bw));
  }
  return d;
}

double ParzenDensity::pdf(double u) const {
  if (categorical_) throw InvalidArgument("pdf on a categorical density");
  if (u < 0.0 || u > 1.0) return 0.0;
  double total = 1.0;  // uniform prior on [0, 1]
  for (std::size_t i = 0; i < centers_.size(); ++i)
    total += gaussian(u, centers_[i], bandwidths_[i]) / normalizers_[i];
  return total / static_cast<double>(centers_.size() + 1);
}

double ParzenDensity::log_pdf(double u) const {
  const double p = pdf(u);
  return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
}

double ParzenDensity::sample_unit(Rng& rng) const {
  if (categorical_) throw InvalidArgument("sample_unit on a categorical density");
  const std::size_t k = uniform_index(rng, centers_.size() + 1);
  const double r = uniform01(rng);
  if (k == centers_.size()) return r;
  // inverse CDF of the truncated component by bisection
  const double mu = centers_[k], sigma = bandwidths_[k];
  const double lo_mass = phi((0.0 - mu) / sigma);
  const double target = lo_mass + r * normalizers_[k];
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (phi((mid - mu) / sigma) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double ParzenDensity::probability(std::size_t category) const {
  if (!categorical_) throw InvalidArgument("probability on a numeric density");
  return probabilities_.at(category);
}

std::size_t ParzenDensity::sample_category(Rng& rng) const {
  if (!categorical_) throw InvalidArgument("sample_category on a numeric density");
  double r = uniform01(rng);
  for (std::size_t i = 0; i < probabilities_.size(); ++i) {
    if (r < probabilities_[i]) return i;
    r -= probabilities_[i];
  }
  return probabilities_.size() - 1;
}

DimensionProposal propose_dimension(const ParzenDensity& good, const ParzenDensity& bad, const Dimension& dim,
                                    std::size_t n_candidates, Rng& rng) {
  DimensionProposal p;
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n_candidates; ++i) {
    double score;
    if (good.categorical()) {
      const std::size_t c = good.sample_category(rng);
      p.candidates.emplace_back(dim.categories[c]);
      score = std::log(good.probability(c)) - std::log(bad.probability(c));
    } else {
      const double u = good.sample_unit(rng);
      const Value v = from_unit(dim, u);
      // integers are scored at the lattice point they round to
      const double uu = dim.kind == DimensionKind::integer ? to_unit(dim, as_real(v)) : u;
      p.candidates.push_back(v);
      score = good.log_pdf(uu) - bad.log_pdf(uu);
    }
    p.scores.push_back(score);
    if (score > top) {
      top = score;
      p.chosen = i;
    }
  }
  return p;
}

HPoint tpe_suggest(std::span<const Trial> trials, const SearchSpace& space, const TpeConfig& config,
                   std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const auto ranked = rank_usable(trials);
  if (ranked.size() < std::max<std::size_t>(config.n_startup, 2)) return sample_uniform(space, rng);

  const TrialSplit split = split_trials(trials, config.gamma);
  HPoint out;
  for (const auto& dim : space.dimensions()) {
    if (dim.frozen) {
      out.values.emplace(dim.name, *dim.frozen);
      continue;
    }
    auto collect = [&](const std::vector<std::size_t>& idx) {
      std::vector<Value> vals;
      for (auto i : idx) {
        auto it = trials[i].point.values.find(dim.name);
        if (it != trials[i].point.values.end() && dim.admits(it->second)) vals.push_back(it->second);
      }
      return vals;
    };
    const auto good_vals = collect(split.good);
    const auto bad_vals = collect(split.bad);
    const auto l = fit_parzen(good_vals, dim, config.bandwidth_rule);
    const auto g = fit_parzen(bad_vals, dim, config.bandwidth_rule);
    auto proposal = propose_dimension(l, g, dim, config.n_candidates, rng);
    out.values.emplace(dim.name, std::move(proposal.candidates[proposal.chosen]));
  }
  return out;
}

}  // namespace sprintopt
