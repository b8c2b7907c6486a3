#include "sprintopt/hyperband.hpp"

#include <algorithm>
#include <cmath>

#include "sprintopt/errors.hpp"

namespace sprintopt {

HyperbandConfig derive_config(int max_resource, int eta) {
  if (max_resource < 1) throw InvalidArgument("Hyperband R must be >= 1");
  if (eta < 2) throw InvalidArgument("Hyperband eta must be >= 2");
  // integer floor(log_eta R), free of floating-point rounding
  int s_max = 0;
  for (std::int64_t p = eta; p <= max_resource; p *= eta) ++s_max;
  return {max_resource, eta, s_max, (s_max + 1) * max_resource};
}

Bracket bracket_schedule(const HyperbandConfig& config, int s) {
  if (s < 0 || s > config.s_max)
    throw InvalidArgument("bracket index " + std::to_string(s) + " outside [0, " + std::to_string(config.s_max) + "]");
  std::int64_t eta_s = 1;
  for (int i = 0; i < s; ++i) eta_s *= config.eta;
  const std::int64_t brackets = config.budget / config.max_resource;  // s_max + 1
  const std::int64_t n = (brackets * eta_s + s) / (s + 1);           // ceil
  const double r = static_cast<double>(config.max_resource) / static_cast<double>(eta_s);
  Bracket b{s, {}};
  std::int64_t eta_i = 1;
  for (int i = 0; i <= s; ++i) {
    b.rungs.push_back({n / eta_i, r * static_cast<double>(eta_i)});
    eta_i *= config.eta;
  }
  // the last rung is exactly R
  b.rungs.back().resource = static_cast<double>(config.max_resource);
  return b;
}

bool should_prune(std::span<const RungRecord> rung_history, double score, int eta) {
  if (eta < 2) throw InvalidArgument("eta must be >= 2");
  const std::size_t n = rung_history.size();
  if (n <= 1) return false;
  std::vector<double> scores;
  scores.reserve(n);
  for (const auto& r : rung_history) scores.push_back(r.score);
  std::sort(scores.begin(), scores.end());
  const std::size_t keep = std::max<std::size_t>(1, n / static_cast<std::size_t>(eta));
  return score > scores[keep - 1];
}

std::vector<ResourceTick> resource_ticks(int max_epochs, int train_stride, int calibration_epochs) {
  if (train_stride < 1) throw InvalidArgument("train stride must be >= 1");
  if (max_epochs < 0 || calibration_epochs < 0) throw InvalidArgument("epoch counts must be >= 0");
  std::vector<ResourceTick> ticks;
  for (int e = 1; e <= max_epochs; ++e) {
    if (e % train_stride == 0) ticks.push_back({e, true, ResourceTick::Kind::train});
    ticks.push_back({e, false, ResourceTick::Kind::validation});
  }
  for (int c = 1; c <= calibration_epochs; ++c)
    ticks.push_back({max_epochs + c, false, ResourceTick::Kind::calibration});
  return ticks;
}

int HyperbandPruner::bracket_of(std::int64_t trial_ordinal) const {
  // most exploratory bracket first
  const auto n = static_cast<std::int64_t>(config_.s_max + 1);
  return config_.s_max - static_cast<int>(((trial_ordinal % n) + n) % n);
}

std::vector<double> HyperbandPruner::rung_resources(int s) const {
  const Bracket b = bracket_schedule(config_, s);
  std::vector<double> out;
  for (const auto& r : b.rungs) out.push_back(r.resource);
  return out;
}

std::vector<RungRecord> HyperbandPruner::crossings(std::int64_t trial_id, int bracket, int epoch, double score,
                                                   std::span<const RungRecord> already) const {
  std::vector<RungRecord> out;
  for (double r : rung_resources(bracket)) {
    if (r > static_cast<double>(epoch) + 1e-9) break;
    const bool held = std::any_of(already.begin(), already.end(), [&](const RungRecord& x) {
      return x.trial_id == trial_id && x.resource == r;
    });
    if (!held) out.push_back({trial_id, r, score});
  }
  return out;
}

}  // namespace sprintopt
