#include "sprintopt/space.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "sprintopt/errors.hpp"
#include "sprintopt/trial.hpp"

namespace sprintopt {

namespace {

std::string fmt_real(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return ec == std::errc{} ? std::string(buf, end) : std::string("nan");
}

std::int64_t next_version(const SearchSpace& space, std::optional<std::int64_t> requested) {
  const std::int64_t v = requested.value_or(space.version() + 1);
  if (v <= space.version())
    throw InvalidArgument("space version must increase: " + std::to_string(v) +
                          " <= " + std::to_string(space.version()));
  return v;
}

}  // namespace

const char* to_string(DimensionKind kind) {
  switch (kind) {
    case DimensionKind::log_uniform: return "log_uniform";
    case DimensionKind::uniform: return "uniform";
    case DimensionKind::integer: return "integer";
    case DimensionKind::categorical: return "categorical";
  }
  return "unknown";
}

DimensionKind dimension_kind_from_string(const std::string& s) {
  if (s == "log_uniform") return DimensionKind::log_uniform;
  if (s == "uniform") return DimensionKind::uniform;
  if (s == "integer") return DimensionKind::integer;
  if (s == "categorical") return DimensionKind::categorical;
  throw InvalidArgument("unknown dimension kind '" + s + "'");
}

std::string to_string(const Value& v) {
  if (const auto* d = std::get_if<double>(&v)) return fmt_real(*d);
  if (const auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  return std::get<std::string>(v);
}

double as_real(const Value& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  throw InvalidArgument("categorical value '" + std::get<std::string>(v) + "' has no numeric view");
}

Dimension Dimension::log_uniform(std::string name, double low, double high) {
  Dimension d{std::move(name), DimensionKind::log_uniform, low, high, {}, std::nullopt};
  d.validate();
  return d;
}

Dimension Dimension::uniform(std::string name, double low, double high) {
  Dimension d{std::move(name), DimensionKind::uniform, low, high, {}, std::nullopt};
  d.validate();
  return d;
}

Dimension Dimension::integer(std::string name, std::int64_t low, std::int64_t high) {
  Dimension d{std::move(name), DimensionKind::integer, static_cast<double>(low),
              static_cast<double>(high), {}, std::nullopt};
  d.validate();
  return d;
}

Dimension Dimension::categorical(std::string name, std::vector<std::string> categories) {
  Dimension d{std::move(name), DimensionKind::categorical, 0.0, 0.0, std::move(categories),
              std::nullopt};
  d.validate();
  return d;
}

void Dimension::validate() const {
  if (name.empty()) throw InvalidArgument("dimension name must not be empty");
  if (kind == DimensionKind::categorical) {
    if (categories.empty())
      throw InvalidArgument("categorical dimension '" + name + "' needs at least one category");
    std::set<std::string> seen(categories.begin(), categories.end());
    if (seen.size() != categories.size())
      throw InvalidArgument("categorical dimension '" + name + "' has duplicate categories");
  } else {
    if (!std::isfinite(low) || !std::isfinite(high))
      throw InvalidArgument("dimension '" + name + "' has non-finite bounds");
    if (is_frozen() ? !(low <= high) : !(low < high))
      throw InvalidArgument("dimension '" + name + "' requires low < high");
    if (kind == DimensionKind::log_uniform && !(low > 0.0))
      throw InvalidArgument("log-uniform dimension '" + name + "' requires low > 0");
    if (kind == DimensionKind::integer &&
        (std::floor(low) != low || std::floor(high) != high))
      throw InvalidArgument("integer dimension '" + name + "' requires integral bounds");
  }
  if (frozen && !admits(*frozen))
    throw InvalidArgument("frozen value " + to_string(*frozen) + " outside dimension '" + name + "'");
}

bool Dimension::admits(const Value& v) const {
  switch (kind) {
    case DimensionKind::log_uniform:
    case DimensionKind::uniform: {
      const auto* d = std::get_if<double>(&v);
      return d && *d >= low && *d <= high;
    }
    case DimensionKind::integer: {
      const auto* i = std::get_if<std::int64_t>(&v);
      return i && static_cast<double>(*i) >= low && static_cast<double>(*i) <= high;
    }
    case DimensionKind::categorical: {
      const auto* s = std::get_if<std::string>(&v);
      return s && std::find(categories.begin(), categories.end(), *s) != categories.end();
    }
  }
  return false;
}

double to_unit(const Dimension& dim, double value) {
  switch (dim.kind) {
    case DimensionKind::log_uniform:
      return (std::log(value) - std::log(dim.low)) / (std::log(dim.high) - std::log(dim.low));
    case DimensionKind::uniform:
    case DimensionKind::integer:
      if (dim.high == dim.low) return 0.5;
      return (value - dim.low) / (dim.high - dim.low);
    case DimensionKind::categorical: break;
  }
  throw InvalidArgument("categorical dimension '" + dim.name + "' has no unit coordinate");
}

Value from_unit(const Dimension& dim, double u) {
  u = std::clamp(u, 0.0, 1.0);
  switch (dim.kind) {
    case DimensionKind::log_uniform: {
      const double v = std::exp(std::log(dim.low) + u * (std::log(dim.high) - std::log(dim.low)));
      return std::clamp(v, dim.low, dim.high);
    }
    case DimensionKind::uniform:
      return std::clamp(dim.low + u * (dim.high - dim.low), dim.low, dim.high);
    case DimensionKind::integer: {
      const double v = std::round(dim.low + u * (dim.high - dim.low));
      return static_cast<std::int64_t>(std::clamp(v, dim.low, dim.high));
    }
    case DimensionKind::categorical: break;
  }
  throw InvalidArgument("categorical dimension '" + dim.name + "' has no unit coordinate");
}

const Value& HPoint::at(const std::string& name) const {
  auto it = values.find(name);
  if (it == values.end()) throw NotFound("point has no dimension '" + name + "'");
  return it->second;
}

SearchSpace::SearchSpace(std::string name, std::vector<Dimension> dimensions, std::int64_t version,
                         std::optional<std::int64_t> parent, std::vector<SpaceEdit> audit)
    : name_(std::move(name)),
      version_(version),
      parent_(parent),
      dimensions_(std::move(dimensions)),
      audit_(std::move(audit)) {
  std::set<std::string> names;
  for (const auto& d : dimensions_) {
    d.validate();
    if (!names.insert(d.name).second)
      throw InvalidArgument("duplicate dimension name '" + d.name + "'");
  }
  if (parent_ && *parent_ >= version_)
    throw InvalidArgument("space version must exceed its parent's");
}

const Dimension& SearchSpace::dimension(const std::string& name) const {
  if (const auto* d = find(name)) return *d;
  throw NotFound("space '" + name_ + "' has no dimension '" + name + "'");
}

const Dimension* SearchSpace::find(const std::string& name) const {
  auto it = std::find_if(dimensions_.begin(), dimensions_.end(),
                         [&](const Dimension& d) { return d.name == name; });
  return it == dimensions_.end() ? nullptr : &*it;
}

std::size_t SearchSpace::active_count() const {
  return static_cast<std::size_t>(
      std::count_if(dimensions_.begin(), dimensions_.end(), [](const auto& d) { return !d.is_frozen(); }));
}

std::vector<std::string> SearchSpace::degenerate_dimensions() const {
  std::vector<std::string> out;
  for (const auto& e : audit_)
    if (e.degenerate) out.push_back(e.dimension);
  return out;
}

HPoint sample_uniform(const SearchSpace& space, std::uint64_t seed) {
  Rng rng(seed);
  return sample_uniform(space, rng);
}

HPoint sample_uniform(const SearchSpace& space, Rng& rng) {
  if (space.dimensions().empty()) throw InvalidArgument("no active dimensions");
  HPoint p;
  for (const auto& d : space.dimensions()) {
    if (d.frozen) {
      p.values.emplace(d.name, *d.frozen);
      continue;
    }
    switch (d.kind) {
      case DimensionKind::log_uniform:
        p.values.emplace(d.name, std::clamp(std::exp(uniform(rng, std::log(d.low), std::log(d.high))),
                                            d.low, d.high));
        break;
      case DimensionKind::uniform:
        p.values.emplace(d.name, uniform(rng, d.low, d.high));
        break;
      case DimensionKind::integer:
        p.values.emplace(d.name, uniform_int(rng, static_cast<std::int64_t>(d.low),
                                             static_cast<std::int64_t>(d.high)));
        break;
      case DimensionKind::categorical:
        p.values.emplace(d.name, d.categories[uniform_index(rng, d.categories.size())]);
        break;
    }
  }
  return p;
}

bool contains(const SearchSpace& space, const HPoint& point) {
  if (point.values.size() != space.dimensions().size()) return false;
  for (const auto& d : space.dimensions()) {
    auto it = point.values.find(d.name);
    if (it == point.values.end()) return false;
    if (d.frozen) {
      if (it->second != *d.frozen) return false;
    } else if (!d.admits(it->second)) {
      return false;
    }
  }
  return true;
}

SearchSpace prune_to_top_k(const SearchSpace& space, std::span<const Trial> trials, std::size_t k,
                           const MarginPolicy& margins, std::optional<std::int64_t> new_version) {
  if (k == 0) throw InvalidArgument("k must be at least 1");
  const auto ranked = rank_usable(trials);
  if (ranked.size() < k)
    throw InsufficientData("pruning needs " + std::to_string(k) + " completed trials, have " +
                           std::to_string(ranked.size()));
  const std::string tag = "top-" + std::to_string(k);

  std::vector<Dimension> dims = space.dimensions();
  std::vector<SpaceEdit> audit;
  for (auto& d : dims) {
    if (d.frozen) continue;
    std::vector<const Value*> values;
    for (std::size_t i = 0; i < k; ++i) {
      auto it = trials[ranked[i]].point.values.find(d.name);
      if (it != trials[ranked[i]].point.values.end() && d.admits(it->second))
        values.push_back(&it->second);
    }
    if (values.empty()) {
      audit.push_back({d.name, tag + ": no in-range values, unchanged", false});
      continue;
    }

    if (d.kind == DimensionKind::categorical) {
      std::set<std::string> seen;
      for (const auto* v : values) seen.insert(std::get<std::string>(*v));
      std::vector<std::string> kept;
      for (const auto& c : d.categories)
        if (seen.count(c)) kept.push_back(c);
      d.categories = std::move(kept);
      std::string rule = tag + " categories {";
      for (std::size_t i = 0; i < d.categories.size(); ++i)
        rule += (i ? "," : "") + d.categories[i];
      audit.push_back({d.name, rule + "}", false});
      continue;
    }

    double a = as_real(*values.front());
    double b = a;
    for (const auto* v : values) {
      a = std::min(a, as_real(*v));
      b = std::max(b, as_real(*v));
    }
    const std::string hull = " hull [" + fmt_real(a) + ", " + fmt_real(b) + "]";
    if (a == b) {
      audit.push_back({d.name, tag + hull + " degenerate range, unchanged", true});
      continue;
    }
    double lo = a, hi = b;
    std::string margin;
    switch (d.kind) {
      case DimensionKind::log_uniform:
        lo = a / margins.log_factor;
        hi = b * margins.log_factor;
        margin = " /x" + fmt_real(margins.log_factor);
        break;
      case DimensionKind::uniform:
        lo = a - margins.uniform_delta;
        hi = b + margins.uniform_delta;
        margin = " +-" + fmt_real(margins.uniform_delta);
        break;
      case DimensionKind::integer:
        lo = a - static_cast<double>(margins.integer_delta);
        hi = b + static_cast<double>(margins.integer_delta);
        margin = " +-" + std::to_string(margins.integer_delta);
        break;
      case DimensionKind::categorical: break;
    }
    d.low = std::max(lo, d.low);
    d.high = std::min(hi, d.high);
    audit.push_back({d.name,
                     tag + hull + margin + " clipped -> [" + fmt_real(d.low) + ", " + fmt_real(d.high) + "]",
                     false});
  }
  return SearchSpace(space.name(), std::move(dims), next_version(space, new_version), space.version(),
                     std::move(audit));
}

namespace {

std::size_t index_of(const SearchSpace& space, const std::string& dim) {
  const auto& dims = space.dimensions();
  auto it = std::find_if(dims.begin(), dims.end(), [&](const Dimension& d) { return d.name == dim; });
  if (it == dims.end()) throw NotFound("space '" + space.name() + "' has no dimension '" + dim + "'");
  return static_cast<std::size_t>(it - dims.begin());
}

}  // namespace

SearchSpace widen_dimension(const SearchSpace& space, const std::string& dim, Side side,
                            double factor_or_delta, std::optional<std::int64_t> new_version) {
  std::vector<Dimension> dims = space.dimensions();
  auto d = dims.begin() + static_cast<std::ptrdiff_t>(index_of(space, dim));
  if (d->is_frozen()) throw InvalidArgument("cannot widen frozen dimension '" + dim + "'");
  if (d->kind == DimensionKind::categorical)
    throw InvalidArgument("cannot widen categorical dimension '" + dim + "'; add categories explicitly");
  double& bound = side == Side::low ? d->low : d->high;
  std::string rule;
  if (d->kind == DimensionKind::log_uniform) {
    if (!(factor_or_delta > 1.0)) throw InvalidArgument("log widening factor must exceed 1");
    bound = side == Side::low ? bound / factor_or_delta : bound * factor_or_delta;
    rule = "widen " + std::string(side == Side::low ? "low" : "high") + " x" + fmt_real(factor_or_delta);
  } else {
    if (!(factor_or_delta > 0.0)) throw InvalidArgument("widening delta must be positive");
    const double delta =
        d->kind == DimensionKind::integer ? std::ceil(factor_or_delta) : factor_or_delta;
    bound = side == Side::low ? bound - delta : bound + delta;
    rule = "widen " + std::string(side == Side::low ? "low" : "high") + " by " + fmt_real(delta);
  }
  std::vector<SpaceEdit> audit{{dim, rule, false}};
  return SearchSpace(space.name(), std::move(dims), next_version(space, new_version), space.version(),
                     std::move(audit));
}

SearchSpace freeze_dimension(const SearchSpace& space, const std::string& dim, const Value& value,
                             std::optional<std::int64_t> new_version) {
  std::vector<Dimension> dims = space.dimensions();
  auto d = dims.begin() + static_cast<std::ptrdiff_t>(index_of(space, dim));
  if (!d->admits(value))
    throw InvalidArgument("freeze value " + to_string(value) + " outside dimension '" + dim + "'");
  d->frozen = value;
  std::vector<SpaceEdit> audit{{dim, "frozen at " + to_string(value), false}};
  return SearchSpace(space.name(), std::move(dims), next_version(space, new_version), space.version(),
                     std::move(audit));
}

SearchSpace replace_dimension(const SearchSpace& space, Dimension replacement,
                              std::optional<std::int64_t> new_version) {
  std::vector<Dimension> dims = space.dimensions();
  auto d = dims.begin() + static_cast<std::ptrdiff_t>(index_of(space, replacement.name));
  replacement.validate();
  std::string rule = "replaced: " + std::string(to_string(replacement.kind));
  if (replacement.is_numeric())
    rule += " [" + fmt_real(replacement.low) + ", " + fmt_real(replacement.high) + "]";
  if (replacement.frozen) rule += " frozen at " + to_string(*replacement.frozen);
  *d = std::move(replacement);
  std::vector<SpaceEdit> audit{{d->name, rule, false}};
  return SearchSpace(space.name(), std::move(dims), next_version(space, new_version), space.version(),
                     std::move(audit));
}

SearchSpace add_category(const SearchSpace& space, const std::string& dim, const std::string& category,
                         std::optional<std::int64_t> new_version) {
  std::vector<Dimension> dims = space.dimensions();
  auto d = dims.begin() + static_cast<std::ptrdiff_t>(index_of(space, dim));
  if (d->kind != DimensionKind::categorical)
    throw InvalidArgument("dimension '" + dim + "' is not categorical");
  if (std::find(d->categories.begin(), d->categories.end(), category) != d->categories.end())
    throw InvalidArgument("category '" + category + "' already present in '" + dim + "'");
  d->categories.push_back(category);
  std::vector<SpaceEdit> audit{{dim, "added category " + category, false}};
  return SearchSpace(space.name(), std::move(dims), next_version(space, new_version), space.version(),
                     std::move(audit));
}

}  // namespace sprintopt
