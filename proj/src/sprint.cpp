#include "sprintopt/sprint.hpp"

#include <regex>
#include <sstream>

#include "sprintopt/errors.hpp"

namespace sprintopt {

const char* to_string(SamplerKind s) { return s == SamplerKind::gp ? "gp" : "tpe"; }
const char* to_string(PrunerKind p) { return p == PrunerKind::none ? "none" : "hyperband"; }

const char* to_string(SprintStatus s) {
  switch (s) {
    case SprintStatus::pending: return "pending";
    case SprintStatus::running: return "running";
    case SprintStatus::complete: return "complete";
    case SprintStatus::failed: return "failed";
  }
  return "unknown";
}

SamplerKind sampler_from_string(const std::string& s) {
  if (s == "gp") return SamplerKind::gp;
  if (s == "tpe") return SamplerKind::tpe;
  throw InvalidArgument("unknown sampler '" + s + "' (gp|tpe)");
}

PrunerKind pruner_from_string(const std::string& s) {
  if (s == "none") return PrunerKind::none;
  if (s == "hyperband") return PrunerKind::hyperband;
  throw InvalidArgument("unknown pruner '" + s + "' (none|hyperband)");
}

SprintStatus sprint_status_from_string(const std::string& s) {
  for (auto v : {SprintStatus::pending, SprintStatus::running, SprintStatus::complete, SprintStatus::failed})
    if (s == to_string(v)) return v;
  throw InvalidArgument("unknown sprint status '" + s + "'");
}

std::string sprint_name(const SprintNameParts& parts) {
  for (const auto* p : {&parts.model_type, &parts.variant, &parts.grouping, &parts.suffix})
    if (p->find('.') != std::string::npos) throw InvalidArgument("name part '" + *p + "' contains '.'");
  for (const auto* p : {&parts.model_type, &parts.variant, &parts.grouping})
    if (p->empty()) throw InvalidArgument("sprint name parts must not be empty (suffix excepted)");
  std::ostringstream out;
  out << parts.model_type << '.' << parts.variant << '.' << parts.grouping << '.' << parts.fidelity.designation()
      << ".E" << parts.init.epoch << "_S" << parts.init.step;
  if (!parts.suffix.empty()) out << '.' << parts.suffix;
  return out.str();
}

SprintNameParts parse_sprint_name(const std::string& name) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : name) {
    if (c == '.') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  if (fields.size() != 5 && fields.size() != 6)
    throw InvalidArgument("sprint name '" + name + "' does not have 5 or 6 dot-separated parts");
  static const std::regex init_pattern(R"(E([0-9]+)_S([0-9]+))");
  std::smatch m;
  if (!std::regex_match(fields[4], m, init_pattern))
    throw InvalidArgument("init part '" + fields[4] + "' is not E{epoch}_S{step}");
  SprintNameParts parts;
  parts.model_type = fields[0];
  parts.variant = fields[1];
  parts.grouping = fields[2];
  parts.fidelity = FidelitySpec::parse(fields[3]);
  parts.init = {std::stoi(m[1]), std::stoi(m[2])};
  if (fields.size() == 6) {
    if (fields[5].empty()) throw InvalidArgument("empty suffix must be omitted, not left after a trailing '.'");
    parts.suffix = fields[5];
  }
  return parts;
}

void SprintConfig::validate() const {
  if (n_calls < 1) throw InvalidArgument("n_calls must be >= 1");
  if (n_random > n_calls) throw InvalidArgument("n_random must not exceed n_calls");
  if (fidelity.train_denominator < 1 || fidelity.val_denominator < 1 || fidelity.max_epochs < 1)
    throw InvalidArgument("fidelity denominators and epochs must be >= 1");
  if (calibration_epochs < 0) throw InvalidArgument("calibration epochs must be >= 0");
  if (train_stride < 1) throw InvalidArgument("train stride must be >= 1");
  if (eta < 2) throw InvalidArgument("eta must be >= 2");
  tpe.validate();
}

std::optional<std::size_t> Sprint::incumbent() const {
  const auto ranked = rank_usable(trials);
  if (ranked.empty()) return std::nullopt;
  return ranked.front();
}

Trial* Sprint::find_trial(std::int64_t id) {
  for (auto& t : trials)
    if (t.id == id) return &t;
  return nullptr;
}

const Trial* Sprint::find_trial(std::int64_t id) const {
  for (const auto& t : trials)
    if (t.id == id) return &t;
  return nullptr;
}

const SearchSpace& Thread::space(std::int64_t version) const {
  auto it = spaces.find(version);
  if (it == spaces.end())
    throw NotFound("thread '" + id + "' has no space version " + std::to_string(version));
  return it->second;
}

std::int64_t Thread::latest_version() const {
  if (spaces.empty()) throw NotFound("thread '" + id + "' has no space");
  return spaces.rbegin()->first;
}

}  // namespace sprintopt
