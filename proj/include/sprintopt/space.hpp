#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sprintopt/random.hpp"

namespace sprintopt {

struct Trial;

enum class DimensionKind { log_uniform, uniform, integer, categorical };

const char* to_string(DimensionKind kind);
DimensionKind dimension_kind_from_string(const std::string& s);

/// A hyperparameter value: real, integer, or category label.
using Value = std::variant<double, std::int64_t, std::string>;

std::string to_string(const Value& v);

/// Numeric view of a value; throws for categories.
double as_real(const Value& v);

struct Dimension {
  std::string name;
  DimensionKind kind = DimensionKind::uniform;
  double low = 0.0;
  double high = 1.0;
  std::vector<std::string> categories;
  std::optional<Value> frozen;

  static Dimension log_uniform(std::string name, double low, double high);
  static Dimension uniform(std::string name, double low, double high);
  static Dimension integer(std::string name, std::int64_t low, std::int64_t high);
  static Dimension categorical(std::string name, std::vector<std::string> categories);

  bool is_frozen() const noexcept { return frozen.has_value(); }
  bool is_numeric() const noexcept { return kind != DimensionKind::categorical; }

  /// Throws InvalidArgument when the invariants do not hold.
  void validate() const;

  /// True when `v` has the right alternative for this kind and lies inside
  /// the current range or category set. Ignores frozen status.
  bool admits(const Value& v) const;

  bool operator==(const Dimension&) const = default;
};

/// Maps a numeric value of `dim` into [0, 1] (log coordinates for
/// log-uniform dimensions). Values outside the range map outside [0, 1].
double to_unit(const Dimension& dim, double value);
/// Inverse of to_unit; integer dimensions are rounded and clipped.
Value from_unit(const Dimension& dim, double u);

struct HPoint {
  std::map<std::string, Value> values;

  const Value& at(const std::string& name) const;
  bool operator==(const HPoint&) const = default;
};

/// One entry of the audit trail describing how a space version was derived.
struct SpaceEdit {
  std::string dimension;
  std::string rule;
  bool degenerate = false;

  bool operator==(const SpaceEdit&) const = default;
};

class SearchSpace {
 public:
  SearchSpace() = default;
  SearchSpace(std::string name, std::vector<Dimension> dimensions, std::int64_t version = 1,
              std::optional<std::int64_t> parent = std::nullopt, std::vector<SpaceEdit> audit = {});

  const std::string& name() const noexcept { return name_; }
  std::int64_t version() const noexcept { return version_; }
  const std::optional<std::int64_t>& parent() const noexcept { return parent_; }
  const std::vector<Dimension>& dimensions() const noexcept { return dimensions_; }
  const std::vector<SpaceEdit>& audit() const noexcept { return audit_; }

  const Dimension& dimension(const std::string& name) const;
  const Dimension* find(const std::string& name) const;
  std::size_t active_count() const;

  /// Names of dimensions flagged degenerate by the edit that produced this version.
  std::vector<std::string> degenerate_dimensions() const;

  bool operator==(const SearchSpace&) const = default;

 private:
  std::string name_;
  std::int64_t version_ = 1;
  std::optional<std::int64_t> parent_;
  std::vector<Dimension> dimensions_;
  std::vector<SpaceEdit> audit_;
};

/// Margins applied around the top-k hull when pruning.
struct MarginPolicy {
  double log_factor = 1.5;
  double uniform_delta = 0.01;
  std::int64_t integer_delta = 1;
};

enum class Side { low, high };

HPoint sample_uniform(const SearchSpace& space, std::uint64_t seed);
HPoint sample_uniform(const SearchSpace& space, Rng& rng);

bool contains(const SearchSpace& space, const HPoint& point);

/// Shrinks every active dimension to the hull of the k best completed trials
/// plus the margin, clipped to the current bounds. Lower scores are better.
/// `new_version` defaults to space.version() + 1.
SearchSpace prune_to_top_k(const SearchSpace& space, std::span<const Trial> trials, std::size_t k,
                           const MarginPolicy& margins = {},
                           std::optional<std::int64_t> new_version = std::nullopt);

/// Moves one bound outward: multiplicatively for log-uniform, additively otherwise.
SearchSpace widen_dimension(const SearchSpace& space, const std::string& dim, Side side,
                            double factor_or_delta,
                            std::optional<std::int64_t> new_version = std::nullopt);

SearchSpace freeze_dimension(const SearchSpace& space, const std::string& dim, const Value& value,
                             std::optional<std::int64_t> new_version = std::nullopt);

/// Replaces a dimension definition wholesale (e.g. unfreezing with new bounds).
SearchSpace replace_dimension(const SearchSpace& space, Dimension replacement,
                              std::optional<std::int64_t> new_version = std::nullopt);

SearchSpace add_category(const SearchSpace& space, const std::string& dim,
                         const std::string& category,
                         std::optional<std::int64_t> new_version = std::nullopt);

}  // namespace sprintopt
