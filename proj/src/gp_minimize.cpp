#include "sprintopt/gp_minimize.hpp"

#include <algorithm>

#include "sprintopt/errors.hpp"

namespace sprintopt {

SpaceEncoder::SpaceEncoder(const SearchSpace& space) {
  for (const auto& d : space.dimensions()) {
    if (d.is_frozen()) {
      frozen_.push_back(d);
      continue;
    }
    const Eigen::Index w =
        d.kind == DimensionKind::categorical ? static_cast<Eigen::Index>(d.categories.size()) : 1;
    slots_.push_back({d, width_, w});
    width_ += w;
  }
}

Eigen::VectorXd SpaceEncoder::encode(const HPoint& point) const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(width_);
  for (const auto& s : slots_) {
    const Value& v = point.at(s.dim.name);
    if (s.dim.kind == DimensionKind::categorical) {
      const auto& cats = s.dim.categories;
      auto it = std::find(cats.begin(), cats.end(), std::get<std::string>(v));
      if (it != cats.end()) x(s.offset + (it - cats.begin())) = 1.0;
    } else {
      x(s.offset) = to_unit(s.dim, as_real(v));
    }
  }
  return x;
}

HPoint SpaceEncoder::decode(const Eigen::Ref<const Eigen::VectorXd>& coords) const {
  if (coords.size() != width_) throw InvalidArgument("decode: coordinate width mismatch");
  HPoint p;
  for (const auto& d : frozen_) p.values.emplace(d.name, *d.frozen);
  for (const auto& s : slots_) {
    if (s.dim.kind == DimensionKind::categorical) {
      Eigen::Index arg = 0;
      coords.segment(s.offset, s.width).maxCoeff(&arg);
      p.values.emplace(s.dim.name, s.dim.categories[static_cast<std::size_t>(arg)]);
    } else {
      p.values.emplace(s.dim.name, from_unit(s.dim, coords(s.offset)));
    }
  }
  return p;
}

GpSuggestion gp_suggest(const SearchSpace& space, std::span<const Trial> history, const GpSettings& settings,
                        std::uint64_t seed) {
  Rng rng(seed);
  const auto ranked = rank_usable(history);
  const SpaceEncoder encoder(space);
  // Hedge draw happens first so the choice sequence is independent of the history size.
  static constexpr gp::Acquisition kChoices[] = {gp::Acquisition::pi, gp::Acquisition::ei, gp::Acquisition::lcb};
  const gp::Acquisition acquisition = kChoices[uniform_index(rng, 3)];
  if (ranked.empty() || encoder.width() == 0) return {sample_uniform(space, rng), acquisition};

  const auto n = static_cast<Eigen::Index>(ranked.size());
  Eigen::MatrixXd X(n, encoder.width());
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Trial& t = history[ranked[static_cast<std::size_t>(i)]];
    X.row(i) = encoder.encode(t.point).transpose();
    y(i) = *t.final_score;
  }

  gp::FitOptions<double> options;
  options.restarts = settings.restarts;
  options.max_iterations = settings.max_iterations;
  options.fit_noise = settings.fit_noise;
  const auto initial = gp::KernelSpec<double>::isotropic(encoder.width(), 1.0, 1.0, settings.smoothness);
  const auto hp = gp::fit_hyperparameters(X, y, initial, settings.noise_variance, options, rng);
  const auto model = gp::GaussianProcess<double>::fit(X, y, hp.kernel, hp.noise_variance);

  std::vector<HPoint> candidates;
  candidates.reserve(settings.n_candidates + settings.n_perturbed);
  for (std::size_t i = 0; i < settings.n_candidates; ++i) candidates.push_back(sample_uniform(space, rng));
  for (std::size_t i = 0; i < std::min<std::size_t>(settings.n_perturbed, ranked.size()); ++i) {
    Eigen::VectorXd x = X.row(static_cast<Eigen::Index>(i)).transpose();
    for (Eigen::Index c = 0; c < x.size(); ++c) x(c) += settings.perturb_sd * standard_normal(rng);
    candidates.push_back(encoder.decode(x));
  }
  Eigen::MatrixXd C(static_cast<Eigen::Index>(candidates.size()), encoder.width());
  for (std::size_t i = 0; i < candidates.size(); ++i)
    C.row(static_cast<Eigen::Index>(i)) = encoder.encode(candidates[i]).transpose();

  const double param = acquisition == gp::Acquisition::lcb ? settings.kappa : settings.xi;
  const auto idx = gp::acquire_index(model, y.minCoeff(), gp::AcquisitionChoice<double>{acquisition, param}, C);
  return {std::move(candidates[static_cast<std::size_t>(idx)]), acquisition};
}

MinimizeResult gp_minimize(const ScalarObjective& objective, const SearchSpace& space, std::size_t n_calls,
                           std::size_t n_random, std::uint64_t hedge_seed, const GpSettings& settings) {
  if (n_random > n_calls) throw InvalidArgument("n_random must not exceed n_calls");
  MinimizeResult result;
  for (std::size_t i = 0; i < n_calls; ++i) {
    const std::uint64_t seed = derive_seed(hedge_seed, i);
    Trial t;
    t.id = static_cast<std::int64_t>(i);
    t.seed = seed;
    if (i < n_random) {
      t.point = sample_uniform(space, seed);
      t.source = SuggestionSource::random;
    } else {
      auto s = gp_suggest(space, result.trials, settings, seed);
      t.point = std::move(s.point);
      t.source = SuggestionSource::surrogate;
      result.acquisitions.push_back(s.acquisition);
    }
    try {
      const double score = objective(t.point);
      t.final_score = score;
      t.status = std::isfinite(score) ? TrialStatus::complete : TrialStatus::failed;
      if (!std::isfinite(score)) t.error = "non-finite score";
    } catch (const std::exception& e) {
      t.status = TrialStatus::failed;
      t.final_score.reset();
      t.error = e.what();
    }
    result.trials.push_back(std::move(t));
  }
  const auto ranked = rank_usable(result.trials);
  if (!ranked.empty()) result.incumbent = ranked.front();
  return result;
}

}  // namespace sprintopt
