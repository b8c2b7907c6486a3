#pragma once

#include <array>
#include <string>
#include <vector>

#include "sprintopt/space.hpp"

namespace sprintopt {

struct AslParams {
  double shift = 0.01;      // m, applied to negatives only
  double gamma_pos = 1.0;   // focusing exponent for positives
  double gamma_neg = 2.0;   // focusing exponent for negatives

  void validate() const;
};

/// Probabilities are clamped to [eps, 1 - eps] before taking logs.
inline constexpr double kProbabilityEps = 1e-8;

/// Asymmetric loss of one binary decision:
///   positive: (1 - p)^g+ * -log(p)
///   negative: p_m^g- * -log(1 - p_m),  p_m = max(p - m, 0)
double asl_loss(double p, bool label, const AslParams& params = {});

/// d asl_loss / dp at the clamped probability.
double asl_gradient(double p, bool label, const AslParams& params = {});

/// Focal loss, i.e. ASL without shift and with one shared exponent.
double focal_loss(double p, bool label, double gamma);

double binary_cross_entropy(double p, bool label);

inline constexpr std::size_t kTaskCount = 4;  // mention, coref, entity, relation

struct TaskLossBundle {
  std::array<double, kTaskCount> losses{};
  std::array<double, kTaskCount> log_variances{};  // s_t
  double entropy_weight = 0.01;                    // lambda

  void validate() const;
};

struct WeightedLoss {
  double total = 0.0;
  std::array<double, kTaskCount> weights{};  // softmax of -s, sums to 1
  double entropy = 0.0;
};

/// sum_t [exp(-s_t) L_t + s_t] + lambda * H(w), w_t = exp(-s_t) / sum_u exp(-s_u).
WeightedLoss uncertainty_weighted_loss(const TaskLossBundle& bundle);

/// log2(1 + distance) / log2(1 + scale_max).
double log_linear_encode(long long distance, long long scale_max);

enum class GroupingKind { global, lr0_l2 };

struct ParameterGroup {
  std::string name;
  std::string lr_dimension;
  std::string wd_dimension;  // empty when the group has no L2 term
};

struct GroupingScheme {
  GroupingKind kind = GroupingKind::global;
  std::vector<ParameterGroup> groups;

  static GroupingScheme global();
  static GroupingScheme lr0_l2();
  /// Accepts "GLOBAL", "LR0-L2" and "LR0_L2".
  static GroupingScheme parse(const std::string& name);
  std::string name() const;
};

/// Search dimensions of a grouping. GLOBAL: lr and weight_decay plus the four
/// task-loss weights. LR0_L2: one lr and one wd per module group.
std::vector<Dimension> grouping_dimensions(const GroupingScheme& scheme);

}  // namespace sprintopt
