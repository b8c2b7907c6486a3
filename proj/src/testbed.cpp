#include "sprintopt/testbed.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sprintopt/errors.hpp"
#include "sprintopt/hyperband.hpp"
#include "sprintopt/random.hpp"

namespace sprintopt {

namespace {

std::uint64_t hash_string(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  return splitmix64(s);
}

// deterministic value in [0, 1) from a hash
double unit_hash(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

double branin(double u0, double u1) {
  const double x1 = -5.0 + 15.0 * u0;
  const double x2 = 15.0 * u1;
  const double b = 5.1 / (4.0 * std::numbers::pi * std::numbers::pi);
  const double c = 5.0 / std::numbers::pi;
  const double t = 1.0 / (8.0 * std::numbers::pi);
  const double q = x2 - b * x1 * x1 + c * x1 - 6.0;
  return q * q + 10.0 * (1.0 - t) * std::cos(x1) + 10.0;
}

constexpr double kBraninMin = 0.39788735772973816;
constexpr double kBraninU0 = (std::numbers::pi + 5.0) / 15.0;
constexpr double kBraninU1 = 2.275 / 15.0;

double logit(double p) { return std::log(p / (1.0 - p)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

const char* to_string(Landscape l) {
  switch (l) {
    case Landscape::quadratic_bowl: return "quadratic_bowl";
    case Landscape::branin_like: return "branin_like";
    case Landscape::multitask_sim: return "multitask_sim";
  }
  return "?";
}

Landscape landscape_from_string(const std::string& s) {
  if (s == "quadratic_bowl") return Landscape::quadratic_bowl;
  if (s == "branin_like") return Landscape::branin_like;
  if (s == "multitask_sim") return Landscape::multitask_sim;
  throw InvalidArgument("unknown landscape '" + s + "'");
}

SyntheticObjective SyntheticObjective::make(Landscape landscape, SearchSpace space, std::optional<HPoint> optimum) {
  SyntheticObjective obj;
  obj.landscape = landscape;
  obj.space = std::move(space);
  if (landscape != Landscape::multitask_sim) obj.transient = 0.1;
  if (optimum) {
    obj.optimum = *std::move(optimum);
    for (const auto& d : obj.space.dimensions())
      if (!obj.optimum.values.count(d.name)) throw InvalidArgument("planted optimum misses '" + d.name + "'");
    return obj;
  }
  std::size_t numeric_index = 0;
  for (const auto& d : obj.space.dimensions()) {
    const double h = unit_hash(hash_string(d.name));
    if (d.kind == DimensionKind::categorical) {
      obj.optimum.values.emplace(d.name, d.categories[hash_string(d.name) % d.categories.size()]);
    } else if (d.name == obj.warmup_dimension && d.kind == DimensionKind::integer) {
      obj.optimum.values.emplace(d.name, std::clamp<std::int64_t>(7, static_cast<std::int64_t>(d.low),
                                                                  static_cast<std::int64_t>(d.high)));
    } else {
      double u = 0.25 + 0.5 * h;
      if (landscape == Landscape::branin_like && numeric_index < 2) u = numeric_index == 0 ? kBraninU0 : kBraninU1;
      obj.optimum.values.emplace(d.name, from_unit(d, u));
      ++numeric_index;
    }
  }
  return obj;
}

std::vector<double> SyntheticObjective::unit_coordinates(const HPoint& point) const {
  std::vector<double> u;
  for (const auto& d : space.dimensions())
    if (d.kind != DimensionKind::categorical && d.name != warmup_dimension)
      u.push_back(to_unit(d, as_real(point.at(d.name))));
  return u;
}

double SyntheticObjective::distance_to_optimum(const HPoint& point) const {
  const auto a = unit_coordinates(point);
  const auto b = unit_coordinates(optimum);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

double SyntheticObjective::asymptote(const HPoint& point) const {
  const auto u = unit_coordinates(point);
  const auto us = unit_coordinates(optimum);
  double s = base_score;
  std::size_t start = 0;
  if (landscape == Landscape::branin_like && u.size() >= 2) {
    const double tilt = (u[0] - us[0]) * (u[0] - us[0]) + (u[1] - us[1]) * (u[1] - us[1]);
    s += (branin(u[0], u[1]) - kBraninMin) / 50.0 + 0.05 * tilt;
    start = 2;
  }
  for (std::size_t i = start; i < u.size(); ++i) s += curvature * (u[i] - us[i]) * (u[i] - us[i]);
  for (const auto& d : space.dimensions())
    if (d.kind == DimensionKind::categorical && point.at(d.name) != optimum.at(d.name)) s += 0.05;
  return s;
}

int SyntheticObjective::warmup_epochs(const HPoint& point, const FidelitySpec& fidelity) const {
  if (!fidelity.scheduler_enabled) return 0;
  auto it = point.values.find(warmup_dimension);
  if (it == point.values.end()) return 0;
  return static_cast<int>(std::lround(as_real(it->second)));
}

double SyntheticObjective::warmup_term(const HPoint& point, const FidelitySpec& fidelity) const {
  const int w = warmup_epochs(point, fidelity);
  auto it = optimum.values.find(warmup_dimension);
  if (w == 0 || it == optimum.values.end()) return 0.0;
  const double d = w - as_real(it->second);
  return warmup_penalty * d * d;
}

double SyntheticObjective::tau(const HPoint& point) const {
  const Dimension* d = space.find(lr_dimension);
  if (!d) return tau0;
  const double du = to_unit(*d, as_real(point.at(lr_dimension))) - to_unit(*d, as_real(optimum.at(lr_dimension)));
  return tau0 * std::exp(-tau_lr_slope * du);
}

double SyntheticObjective::subset_offset(const FidelitySpec& fidelity, std::int64_t rotation_index) const {
  auto part = [&](int k, std::uint64_t salt) {
    if (k <= 1) return 0.0;
    const auto s = static_cast<std::uint64_t>(((rotation_index % k) + k) % k);
    const double h = 2.0 * unit_hash(mix(mix(subset_seed, salt), mix(static_cast<std::uint64_t>(k), s))) - 1.0;
    return subset_amplitude * (1.0 - 1.0 / k) * h;
  };
  return part(fidelity.train_denominator, 1) + part(fidelity.val_denominator, 2);
}

int SyntheticObjective::epochs_run(const HPoint& point, const FidelitySpec& fidelity) const {
  const int w = warmup_epochs(point, fidelity);
  if (fidelity.early_stop == EarlyStop::end_of_warmup && w > 0) return std::min(fidelity.max_epochs, w);
  return fidelity.max_epochs;
}

double effective_epochs(int epoch, int warmup) {
  if (warmup <= 0) return epoch;
  double e = 0.0;
  for (int k = 1; k <= epoch; ++k) e += std::min(1.0, static_cast<double>(k) / warmup);
  return e;
}

std::vector<double> SyntheticObjective::trajectory(const HPoint& point, const EvalContext& context) const {
  const auto& f = context.fidelity;
  const double floor = asymptote(point) + warmup_term(point, f) + subset_offset(f, context.rotation_index);
  const double t = tau(point);
  const int w = warmup_epochs(point, f);
  const int n = epochs_run(point, f);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int e = 1; e <= n; ++e) {
    double s = floor + transient * std::exp(-effective_epochs(e, w) / t);
    if (noise_sd > 0.0) {
      Rng rng(derive_seed(context.seed, static_cast<std::uint64_t>(e)));
      s += noise_sd * standard_normal(rng);
    }
    out.push_back(s);
  }
  return out;
}

double evaluate_synthetic(const SyntheticObjective& objective, const HPoint& point, const EvalContext& context,
                          const Reporter& reporter) {
  for (const auto& d : objective.space.dimensions())
    if (!point.values.count(d.name)) throw InvalidArgument("point misses dimension '" + d.name + "'");
  const auto traj = objective.trajectory(point, context);
  const int n = static_cast<int>(traj.size());
  double last = traj.empty() ? objective.asymptote(point) : traj.back();
  for (const auto& tick : resource_ticks(n, context.train_stride, context.calibration_epochs)) {
    double score;
    if (tick.kind == ResourceTick::Kind::calibration) {
      const int j = tick.epoch - n;
      score = (traj.empty() ? last : traj.back()) - objective.calibration_gain * (1.0 - std::pow(0.5, j));
    } else {
      score = traj[static_cast<std::size_t>(tick.epoch - 1)];
    }
    last = score;
    const bool go = reporter ? reporter(tick.epoch, score, tick.prunable) : true;
    if (!go && tick.prunable) return last;
  }
  return last;
}

// ---------------------------------------------------------------------------

std::size_t ToyCorpus::gold_relations(const std::vector<ToyDocument>& docs) const {
  std::size_t n = 0;
  for (const auto& d : docs)
    for (const auto& r : d.relations) n += r.gold ? 1 : 0;
  return n;
}

ToyCorpus generate_corpus(std::uint64_t seed, int n_docs, int relation_classes) {
  if (n_docs < 1) throw InvalidArgument("n_docs must be >= 1");
  if (relation_classes < 1) throw InvalidArgument("relation class count must be >= 1");
  ToyCorpus c;
  c.seed = seed;
  c.relation_classes = relation_classes;
  Rng rng(seed);
  for (int k = 0; k < relation_classes; ++k) c.planted_relation.push_back(0.3 + 0.4 * uniform01(rng));

  std::vector<double> zipf(static_cast<std::size_t>(relation_classes));
  double total = 0.0;
  for (int k = 0; k < relation_classes; ++k) total += 1.0 / (k + 1);
  double acc = 0.0;
  for (int k = 0; k < relation_classes; ++k) zipf[static_cast<std::size_t>(k)] = (acc += 1.0 / (k + 1) / total);

  auto draw = [&](double mean, double sd) { return mean + sd * standard_normal(rng); };
  auto make_split = [&](std::vector<ToyDocument>& docs, int count) {
    for (int d = 0; d < count; ++d) {
      ToyDocument doc;
      const auto n_spans = uniform_int(rng, 8, 12);
      for (std::int64_t i = 0; i < n_spans; ++i) {
        const bool gold = uniform01(rng) < 0.4;
        doc.spans.push_back({draw(gold ? 1.2 : -1.2, 0.8), gold});
      }
      for (std::int32_t i = 0; i < static_cast<std::int32_t>(n_spans); ++i)
        for (std::int32_t j = i + 1; j <= std::min<std::int32_t>(i + 2, static_cast<std::int32_t>(n_spans) - 1); ++j) {
          const bool both = doc.spans[static_cast<std::size_t>(i)].gold && doc.spans[static_cast<std::size_t>(j)].gold;
          const bool gold = both && uniform01(rng) < 0.7;
          // spurious mentions make plausible-looking pairs
          doc.pairs.push_back({i, j, draw(gold ? 1.0 : both ? -1.0 : -0.2, 0.8), gold});
        }
      for (std::int32_t p = 0; p < static_cast<std::int32_t>(doc.pairs.size()); ++p)
        for (int r = 0; r < 2; ++r) {
          const double u = uniform01(rng);
          const auto cls = static_cast<std::int32_t>(std::lower_bound(zipf.begin(), zipf.end(), u) - zipf.begin());
          const bool pair_gold = doc.pairs[static_cast<std::size_t>(p)].gold;
          const bool gold = pair_gold && uniform01(rng) < 0.45;
          const double z = draw(gold ? 1.0 : pair_gold ? -1.0 : -0.4, 0.8);
          doc.relations.push_back({p, std::min(cls, relation_classes - 1), z, gold});
        }
      docs.push_back(std::move(doc));
    }
  };
  make_split(c.train, 4 * n_docs);
  make_split(c.validation, n_docs);
  make_split(c.test, n_docs);
  return c;
}

double StageCounts::f1() const { return calibrate::micro_f_beta(tp, fp, fn, 1.0); }

ChainCounts toy_predict(const std::vector<ToyDocument>& docs, const SplitProbabilities& probabilities,
                        const calibrate::ThresholdSet& thresholds) {
  ChainCounts out;
  std::vector<char> span_kept, pair_kept;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const auto& doc = docs[d];
    span_kept.assign(doc.spans.size(), 0);
    for (std::size_t i = 0; i < doc.spans.size(); ++i) {
      const bool pred = probabilities.mention[d][i] > thresholds.mention;
      span_kept[i] = pred;
      auto& c = out.mention;
      if (pred) (doc.spans[i].gold ? c.tp : c.fp) += 1;
      else if (doc.spans[i].gold) c.fn += 1;
    }
    pair_kept.assign(doc.pairs.size(), 0);
    for (std::size_t i = 0; i < doc.pairs.size(); ++i) {
      const auto& p = doc.pairs[i];
      const bool pred = span_kept[static_cast<std::size_t>(p.a)] && span_kept[static_cast<std::size_t>(p.b)] &&
                        probabilities.coref[d][i] > thresholds.coref;
      pair_kept[i] = pred;
      auto& c = out.coref;
      if (pred) (p.gold ? c.tp : c.fp) += 1;
      else if (p.gold) c.fn += 1;
    }
    for (std::size_t i = 0; i < doc.relations.size(); ++i) {
      const auto& r = doc.relations[i];
      const bool pred = pair_kept[static_cast<std::size_t>(r.pair)] &&
                        probabilities.relation[d][i] > thresholds.relation[static_cast<std::size_t>(r.class_id)];
      auto& c = out.relation;
      if (pred) (r.gold ? c.tp : c.fp) += 1;
      else if (r.gold) c.fn += 1;
    }
  }
  return out;
}

ToyPipeline::ToyPipeline(ToyCorpus corpus, ToyPipelineOptions options)
    : corpus_(std::move(corpus)), options_(options) {
  auto subset = [&](const std::vector<ToyDocument>& docs, int k, std::uint64_t salt) {
    if (k <= 1) return docs;
    std::vector<ToyDocument> out;
    for (auto i : rotate_subset(docs.size(), k, options_.rotation_index, mix(corpus_.seed, salt)))
      out.push_back(docs[i]);
    return out;
  };
  train_docs_ = subset(corpus_.train, options_.train_denominator, 11);
  val_docs_ = subset(corpus_.validation, options_.val_denominator, 12);
}

std::size_t ToyPipeline::relation_classes() const { return static_cast<std::size_t>(corpus_.relation_classes); }

double ToyPipeline::quality(int epoch) const {
  const double data_factor = 1.0 - 0.2 * (1.0 - 1.0 / options_.train_denominator);
  return data_factor * (options_.max_quality * (1.0 - std::exp(-epoch / options_.quality_rate)) + 0.3);
}

SplitProbabilities ToyPipeline::probabilities(const std::vector<ToyDocument>& docs, int epoch, int split_tag) const {
  const double q = quality(epoch);
  const double lm = logit(corpus_.planted_mention);
  const double lc = logit(corpus_.planted_coref);
  std::uint64_t salt = mix(mix(corpus_.seed, static_cast<std::uint64_t>(split_tag)), static_cast<std::uint64_t>(epoch));
  auto wobble = [&](std::size_t d, std::size_t stage, std::size_t i) {
    return options_.jitter * (2.0 * unit_hash(mix(mix(salt, d), stage * 1000003ULL + i)) - 1.0);
  };
  SplitProbabilities p;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const auto& doc = docs[d];
    auto& m = p.mention.emplace_back();
    for (std::size_t i = 0; i < doc.spans.size(); ++i)
      m.push_back(sigmoid(lm + q * doc.spans[i].latent + wobble(d, 0, i)));
    auto& c = p.coref.emplace_back();
    for (std::size_t i = 0; i < doc.pairs.size(); ++i)
      c.push_back(sigmoid(lc + q * doc.pairs[i].latent + wobble(d, 1, i)));
    auto& r = p.relation.emplace_back();
    for (std::size_t i = 0; i < doc.relations.size(); ++i) {
      const double t = corpus_.planted_relation[static_cast<std::size_t>(doc.relations[i].class_id)];
      r.push_back(sigmoid(logit(t) + q * doc.relations[i].latent + wobble(d, 2, i)));
    }
  }
  return p;
}

calibrate::EpochPredictions ToyPipeline::train_epoch(int epoch, const calibrate::ThresholdSet& current) {
  if (epoch < 1) throw InvalidArgument("epochs are 1-based");
  epoch_ = epoch;
  const auto p = probabilities(train_docs_, epoch, 0);
  calibrate::EpochPredictions out;
  std::vector<char> span_kept, pair_kept;
  for (std::size_t d = 0; d < train_docs_.size(); ++d) {
    const auto& doc = train_docs_[d];
    span_kept.assign(doc.spans.size(), 0);
    for (std::size_t i = 0; i < doc.spans.size(); ++i) {
      out.mention.push_back({p.mention[d][i], doc.spans[i].gold, 0});
      span_kept[i] = p.mention[d][i] > current.mention;
    }
    pair_kept.assign(doc.pairs.size(), 0);
    for (std::size_t i = 0; i < doc.pairs.size(); ++i) {
      const auto& pr = doc.pairs[i];
      if (!span_kept[static_cast<std::size_t>(pr.a)] || !span_kept[static_cast<std::size_t>(pr.b)]) continue;
      out.coref.push_back({p.coref[d][i], pr.gold, 0});
      pair_kept[i] = p.coref[d][i] > current.coref;
    }
    for (std::size_t i = 0; i < doc.relations.size(); ++i) {
      const auto& r = doc.relations[i];
      if (pair_kept[static_cast<std::size_t>(r.pair)]) out.relation.push_back({p.relation[d][i], r.gold, r.class_id});
    }
  }
  return out;
}

std::vector<double> ToyPipeline::validate(std::span<const calibrate::ThresholdSet> sets) {
  ++validation_passes_;
  const auto p = probabilities(val_docs_, epoch_, 1);
  std::vector<double> scores;
  scores.reserve(sets.size());
  for (const auto& t : sets) scores.push_back(toy_predict(val_docs_, p, t).relation.f1());
  return scores;
}

calibrate::TestScores ToyPipeline::test(const calibrate::ThresholdSet& thresholds) {
  const auto p = probabilities(corpus_.test, epoch_, 2);
  const auto c = toy_predict(corpus_.test, p, thresholds);
  return {c.relation.f1(), c.mention.f1(), c.coref.f1()};
}

ToyPipelineObjective::ToyPipelineObjective(std::uint64_t corpus_seed, int n_docs, int relation_classes)
    : corpus_(generate_corpus(corpus_seed, n_docs, relation_classes)) {}

double ToyPipelineObjective::evaluate(const HPoint& point, const EvalContext& context, const Reporter& reporter) const {
  // rates far from their sweet spots cap how well the pipeline can learn
  double penalty = 0.0;
  for (const auto& [name, value] : point.values) {
    if (std::holds_alternative<std::string>(value)) continue;
    const double v = as_real(value);
    if (name.rfind("lr", 0) == 0 && name != "lr_warmup" && v > 0.0) penalty += std::pow(std::log10(v) + 4.3, 2) / 4.0;
    if ((name.rfind("wd", 0) == 0 || name == "weight_decay") && v > 0.0) penalty += std::pow(std::log10(v) + 2.5, 2) / 9.0;
  }
  ToyPipelineOptions options;
  options.max_quality *= std::exp(-penalty);
  options.train_denominator = context.fidelity.train_denominator;
  options.val_denominator = context.fidelity.val_denominator;
  options.rotation_index = context.rotation_index;
  ToyPipeline model(corpus_, options);

  calibrate::CalibrationPolicy policy;
  policy.max_calib_iters = context.calibration_epochs;
  double last = 0.0;
  auto hook = [&](int epoch, double f1, bool calibration) {
    last = -f1;
    if (!reporter) return true;
    if (calibration) {
      reporter(epoch, last, false);
      return true;
    }
    bool go = true;
    if (context.train_stride > 0 && epoch % context.train_stride == 0) go = reporter(epoch, last, true);
    reporter(epoch, last, false);
    return go;
  };
  const auto report = calibrate::fit_with_calibration(
      model, context.fidelity.max_epochs, policy,
      calibrate::ThresholdSet::uniform(0.5, static_cast<std::size_t>(corpus_.relation_classes)), hook);
  if (report.failed) throw Error("toy pipeline fit failed: " + report.error);
  if (report.stopped) return last;
  return -std::max(report.best_validation_f1, report.calibration.best_score);
}

std::unique_ptr<ObjectiveHandle> make_objective(const std::string& name, const SearchSpace& space) {
  if (name == "toy_pipeline") return std::make_unique<ToyPipelineObjective>(7, 40, 96);
  return std::make_unique<SyntheticHandle>(SyntheticObjective::make(landscape_from_string(name), space));
}

}  // namespace sprintopt
