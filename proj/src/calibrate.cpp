#include "sprintopt/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sprintopt/errors.hpp"

namespace sprintopt::calibrate {

ThresholdSet ThresholdSet::uniform(double value, std::size_t relation_classes) {
  return {value, value, std::vector<double>(relation_classes, value)};
}

void ThresholdSet::validate(std::optional<std::size_t> relation_classes) const {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(mention) || !in_unit(coref)) throw InvalidArgument("thresholds must lie in [0, 1]");
  if (!std::all_of(relation.begin(), relation.end(), in_unit))
    throw InvalidArgument("relation thresholds must lie in [0, 1]");
  if (relation_classes && relation.size() != *relation_classes)
    throw InvalidArgument("relation threshold vector has " + std::to_string(relation.size()) +
                          " entries, expected " + std::to_string(*relation_classes));
}

const char* to_string(Component c) {
  switch (c) {
    case Component::mention: return "mention";
    case Component::coref: return "coref";
    case Component::relation: return "relation";
  }
  return "?";
}

std::vector<double> CandidateSet::values() const {
  if (!(delta > 0.0)) throw InvalidArgument("perturbation delta must be positive");
  std::vector<double> out;
  for (double v : {base, base - delta, base + delta}) {
    v = std::clamp(v, 0.0, 1.0);
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  }
  return out;
}

double micro_f_beta(std::int64_t tp, std::int64_t fp, std::int64_t fn, double beta) {
  if (tp < 0 || fp < 0 || fn < 0) throw InvalidArgument("counts must be non-negative");
  if (!(beta > 0.0)) throw InvalidArgument("beta must be positive");
  if (tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  const double b2 = beta * beta;
  return (1.0 + b2) * precision * recall / (b2 * precision + recall);
}

ScutResult scut(std::span<const ScoredInstance> instances, double beta, double low_bound) {
  if (instances.empty()) throw InvalidArgument("scut needs at least one instance");
  std::vector<std::pair<double, bool>> sorted;
  sorted.reserve(instances.size());
  std::int64_t positives = 0;
  for (const auto& i : instances) {
    sorted.emplace_back(i.probability, i.gold);
    positives += i.gold ? 1 : 0;
  }
  std::sort(sorted.begin(), sorted.end());
  const auto negatives = static_cast<std::int64_t>(sorted.size()) - positives;

  std::vector<double> cuts{0.0};
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i)
    if (sorted[i + 1].first > sorted[i].first) cuts.push_back(0.5 * (sorted[i].first + sorted[i + 1].first));
  cuts.push_back(1.0);

  ScutResult best{1.0, -1.0, false};
  std::size_t j = 0;
  std::int64_t tp_below = 0, fp_below = 0;
  for (double c : cuts) {
    while (j < sorted.size() && sorted[j].first <= c) {
      (sorted[j].second ? tp_below : fp_below) += 1;
      ++j;
    }
    const std::int64_t tp = positives - tp_below;
    const std::int64_t fp = negatives - fp_below;
    const double f = micro_f_beta(tp, fp, positives - tp, beta);
    if (f > best.f_beta) best = {c, f, false};
  }
  if (best.f_beta <= 0.0) best = {1.0, 0.0, false};
  if (best.threshold < low_bound) {
    best.threshold = low_bound;
    best.guarded = true;
  }
  return best;
}

PerClassThresholds scut_per_class(std::span<const ScoredInstance> instances, std::size_t n_classes, double beta,
                                  double low_bound) {
  std::vector<std::vector<ScoredInstance>> by_class(n_classes);
  for (const auto& i : instances) {
    if (i.class_id < 0 || static_cast<std::size_t>(i.class_id) >= n_classes)
      throw InvalidArgument("class id " + std::to_string(i.class_id) + " outside [0, " + std::to_string(n_classes) + ")");
    by_class[static_cast<std::size_t>(i.class_id)].push_back(i);
  }
  PerClassThresholds out;
  out.thresholds.resize(n_classes, low_bound);
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (by_class[c].empty()) {
      out.empty_classes.push_back(static_cast<std::int32_t>(c));
      continue;
    }
    out.thresholds[c] = scut(by_class[c], beta, low_bound).threshold;
  }
  return out;
}

std::vector<ThresholdSet> permutations(const ComponentChoice& mention, const ComponentChoice& coref,
                                       const std::vector<double>& relation_base,
                                       std::optional<double> relation_delta) {
  auto options = [](const ComponentChoice& c) {
    return c.delta ? CandidateSet{c.base, *c.delta}.values() : std::vector<double>{c.base};
  };
  std::vector<std::vector<double>> relation_options{relation_base};
  if (relation_delta) {
    if (!(*relation_delta > 0.0)) throw InvalidArgument("perturbation delta must be positive");
    for (double off : {-*relation_delta, *relation_delta}) {
      std::vector<double> v = relation_base;
      for (auto& x : v) x = std::clamp(x + off, 0.0, 1.0);
      if (std::find(relation_options.begin(), relation_options.end(), v) == relation_options.end())
        relation_options.push_back(std::move(v));
    }
  }
  std::vector<ThresholdSet> out;
  for (double m : options(mention))
    for (double c : options(coref))
      for (const auto& r : relation_options) out.push_back({m, c, r});
  return out;
}

void CalibrationPolicy::validate() const {
  if (!(fit_delta > 0.0) || !(calib_delta > 0.0)) throw InvalidArgument("deltas must be positive");
  if (start_epoch < 1) throw InvalidArgument("start epoch must be >= 1");
  if (fit_rotation.empty() || calib_rotation.empty()) throw InvalidArgument("rotations must not be empty");
  if (max_calib_iters < 0) throw InvalidArgument("calibration iterations must be >= 0");
  if (patience < 1) throw InvalidArgument("patience must be >= 1");
}

ComponentMask CalibrationPolicy::fit_mask(int epoch) const {
  if (epoch < start_epoch) return {false, false, false};
  ComponentMask m = fit_rotation[static_cast<std::size_t>(epoch - start_epoch) % fit_rotation.size()];
  m[0] = false;  // mention comes from SCut during fitting
  for (std::size_t c = 1; c < 3; ++c)
    if (epoch < component_start[c]) m[c] = false;
  return m;
}

ComponentMask CalibrationPolicy::calib_mask(int iteration) const {
  return calib_rotation[static_cast<std::size_t>(std::max(iteration - 1, 0)) % calib_rotation.size()];
}

namespace {

std::vector<ThresholdSet> around(const ThresholdSet& t, const ComponentMask& mask, double delta) {
  auto choice = [&](double v, bool on) { return on ? ComponentChoice::triplet(v, delta) : ComponentChoice::fixed(v); };
  return permutations(choice(t.mention, mask[0]), choice(t.coref, mask[1]), t.relation,
                      mask[2] ? std::optional<double>(delta) : std::nullopt);
}

std::size_t argmax(const std::vector<double>& scores) {
  std::size_t arg = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[arg]) arg = i;
  return arg;
}

}  // namespace

ClimbResult hill_climb(const BatchEvaluator& evaluate, const ThresholdSet& start, const CalibrationPolicy& policy) {
  policy.validate();
  ClimbResult result;
  result.best = start;
  result.best_score = -std::numeric_limits<double>::infinity();
  ThresholdSet current = start;
  int stale = 0;
  for (int j = 1; j <= policy.max_calib_iters; ++j) {
    const auto sets = around(current, policy.calib_mask(j), policy.calib_delta);
    std::vector<double> scores;
    try {
      scores = evaluate(sets);
      if (scores.size() != sets.size()) throw Error("evaluator returned a wrong number of scores");
    } catch (const std::exception& e) {
      result.failed = true;
      result.error = e.what();
      break;
    }
    const std::size_t arg = argmax(scores);
    // sets[0] is the current set, so scores[0] is the score to beat
    const bool improved = scores[arg] > scores[0];
    if (j == 1) result.best_score = scores[0];
    current = sets[arg];
    if (scores[arg] > result.best_score) {
      result.best_score = scores[arg];
      result.best = current;
    }
    result.iterations = j;
    result.trace.push_back({j, sets.size(), scores[arg], result.best_score, current});
    stale = improved ? 0 : stale + 1;
    if (stale >= policy.patience) break;
  }
  return result;
}

FitReport fit_with_calibration(CalibratableModel& model, int epochs, const CalibrationPolicy& policy,
                               const ThresholdSet& initial) {
  return fit_with_calibration(model, epochs, policy, initial, ProgressHook{});
}

FitReport fit_with_calibration(CalibratableModel& model, int epochs, const CalibrationPolicy& policy,
                               const ThresholdSet& initial, const ProgressHook& hook) {
  policy.validate();
  initial.validate(model.relation_classes());
  FitReport report;
  report.best_validation_f1 = -std::numeric_limits<double>::infinity();
  ThresholdSet current = initial;
  ThresholdSet best = initial;
  try {
    for (int epoch = 1; epoch <= epochs; ++epoch) {
      const EpochPredictions predictions = model.train_epoch(epoch, current);
      double mention = current.mention;
      if (epoch >= policy.component_start[0] && !predictions.mention.empty())
        mention = scut(predictions.mention, policy.beta, policy.low_bound).threshold;
      std::vector<double> relation = current.relation;
      if (policy.relation_scut && epoch >= policy.component_start[2] && !predictions.relation.empty())
        relation = scut_per_class(predictions.relation, model.relation_classes(), policy.beta, policy.low_bound)
                       .thresholds;
      const ComponentMask mask = policy.fit_mask(epoch);
      const auto sets = around({mention, current.coref, std::move(relation)}, mask, policy.fit_delta);
      const auto scores = model.validate(sets);
      if (scores.size() != sets.size()) throw Error("validation returned a wrong number of scores");
      const std::size_t arg = argmax(scores);
      current = sets[arg];
      EpochRecord rec{epoch, sets.size(), scores[arg], current, false};
      if (scores[arg] > report.best_validation_f1) {
        report.best_validation_f1 = scores[arg];
        report.best_epoch = epoch;
        best = current;
        model.save_checkpoint();
        rec.checkpoint = true;
      }
      report.epochs.push_back(std::move(rec));
      if (hook && !hook(epoch, scores[arg], false)) {
        report.stopped = true;
        report.final_thresholds = best;
        return report;
      }
    }
    if (report.best_epoch > 0) model.restore_checkpoint();

    int iteration = 0;
    bool stop_requested = false;
    BatchEvaluator evaluator = [&](std::span<const ThresholdSet> sets) {
      if (stop_requested) throw Error("stopped by progress hook");
      auto scores = model.validate(sets);
      ++iteration;
      const double top = scores.empty() ? 0.0 : *std::max_element(scores.begin(), scores.end());
      if (hook && !hook(epochs + iteration, top, true)) stop_requested = true;
      return scores;
    };
    report.calibration = hill_climb(evaluator, best, policy);
    report.final_thresholds = report.calibration.best_score >= report.best_validation_f1 ? report.calibration.best : best;
    if (stop_requested) {
      report.stopped = true;
      return report;
    }
    report.test = model.test(report.final_thresholds);
  } catch (const std::exception& e) {
    report.failed = true;
    report.error = e.what();
    report.final_thresholds = best;
  }
  return report;
}

}  // namespace sprintopt::calibrate
