#include "sprintopt/losses.hpp"

#include <algorithm>
#include <cmath>

#include "sprintopt/errors.hpp"

namespace sprintopt {

namespace {

double clamp_p(double p) { return std::clamp(p, kProbabilityEps, 1.0 - kProbabilityEps); }

// x^g with 0^0 = 1, so a zero exponent drops the focusing term entirely
double focus(double x, double g) { return g == 0.0 ? 1.0 : std::pow(x, g); }

// d/dx x^g
double focus_gradient(double x, double g) { return g == 0.0 ? 0.0 : g * std::pow(x, g - 1.0); }

}  // namespace

void AslParams::validate() const {
  if (!(shift >= 0.0 && shift < 1.0)) throw InvalidArgument("ASL shift must lie in [0, 1)");
  if (!(gamma_pos >= 0.0) || !(gamma_neg >= 0.0) || !std::isfinite(gamma_pos) || !std::isfinite(gamma_neg))
    throw InvalidArgument("ASL focusing exponents must be finite and >= 0");
}

double asl_loss(double p, bool label, const AslParams& params) {
  params.validate();
  p = clamp_p(p);
  if (label) return focus(1.0 - p, params.gamma_pos) * -std::log(p);
  const double pm = std::max(p - params.shift, 0.0);
  if (pm == 0.0) return 0.0;
  return focus(pm, params.gamma_neg) * -std::log1p(-pm);
}

double asl_gradient(double p, bool label, const AslParams& params) {
  params.validate();
  p = clamp_p(p);
  if (label) {
    const double q = 1.0 - p;
    return -focus_gradient(q, params.gamma_pos) * -std::log(p) - focus(q, params.gamma_pos) / p;
  }
  const double pm = p - params.shift;
  if (pm <= 0.0) return 0.0;
  return focus_gradient(pm, params.gamma_neg) * -std::log1p(-pm) + focus(pm, params.gamma_neg) / (1.0 - pm);
}

double focal_loss(double p, bool label, double gamma) { return asl_loss(p, label, {0.0, gamma, gamma}); }

double binary_cross_entropy(double p, bool label) {
  p = clamp_p(p);
  return label ? -std::log(p) : -std::log1p(-p);
}

void TaskLossBundle::validate() const {
  for (double l : losses)
    if (!std::isfinite(l) || l < 0.0) throw InvalidArgument("task losses must be finite and >= 0");
  for (double s : log_variances)
    if (!std::isfinite(s)) throw InvalidArgument("log-variance parameters must be finite");
  if (!(entropy_weight >= 0.0)) throw InvalidArgument("entropy weight must be >= 0");
}

WeightedLoss uncertainty_weighted_loss(const TaskLossBundle& bundle) {
  bundle.validate();
  WeightedLoss out;
  // softmax of -s, shifted for stability
  const double s_min = *std::min_element(bundle.log_variances.begin(), bundle.log_variances.end());
  double norm = 0.0;
  for (std::size_t t = 0; t < kTaskCount; ++t) {
    out.weights[t] = std::exp(-(bundle.log_variances[t] - s_min));
    norm += out.weights[t];
  }
  for (std::size_t t = 0; t < kTaskCount; ++t) {
    out.weights[t] /= norm;
    if (out.weights[t] > 0.0) out.entropy -= out.weights[t] * std::log(out.weights[t]);
    const double s = bundle.log_variances[t];
    out.total += std::exp(-s) * bundle.losses[t] + s;
  }
  out.total += bundle.entropy_weight * out.entropy;
  return out;
}

double log_linear_encode(long long distance, long long scale_max) {
  if (distance < 0) throw InvalidArgument("distance must be >= 0");
  if (scale_max < 1) throw InvalidArgument("scale_max must be >= 1");
  return std::log2(1.0 + static_cast<double>(distance)) / std::log2(1.0 + static_cast<double>(scale_max));
}

GroupingScheme GroupingScheme::global() {
  return {GroupingKind::global, {{"global", "lr", "weight_decay"}}};
}

GroupingScheme GroupingScheme::lr0_l2() {
  GroupingScheme s{GroupingKind::lr0_l2, {}};
  for (const char* g : {"shared", "mention", "coref", "entity", "relation"})
    s.groups.push_back({g, std::string("lr_") + g, std::string("wd_") + g});
  return s;
}

GroupingScheme GroupingScheme::parse(const std::string& name) {
  if (name == "GLOBAL") return global();
  if (name == "LR0-L2" || name == "LR0_L2") return lr0_l2();
  throw InvalidArgument("unknown grouping '" + name + "' (expected GLOBAL or LR0-L2)");
}

std::string GroupingScheme::name() const { return kind == GroupingKind::global ? "GLOBAL" : "LR0-L2"; }

std::vector<Dimension> grouping_dimensions(const GroupingScheme& scheme) {
  std::vector<Dimension> dims;
  for (const auto& g : scheme.groups) {
    dims.push_back(Dimension::log_uniform(g.lr_dimension, 1e-6, 1e-3));
    if (!g.wd_dimension.empty()) dims.push_back(Dimension::log_uniform(g.wd_dimension, 1e-5, 1e-1));
  }
  if (scheme.kind == GroupingKind::global)
    for (const char* t : {"w_mention", "w_coref", "w_entity", "w_relation"})
      dims.push_back(Dimension::uniform(t, 0.1, 1.0));
  return dims;
}

}  // namespace sprintopt
