#include "sprintopt/trial.hpp"

#include <algorithm>
#include <cmath>
#include <regex>

#include "sprintopt/errors.hpp"

namespace sprintopt {

std::string FidelitySpec::designation() const {
  return "T" + std::to_string(train_denominator) + "_V" + std::to_string(val_denominator) + "_M" +
         std::to_string(max_epochs);
}

FidelitySpec FidelitySpec::parse(const std::string& designation) {
  static const std::regex pattern(R"(T([0-9]+)_V([0-9]+)_M([0-9]+))");
  std::smatch m;
  if (!std::regex_match(designation, m, pattern))
    throw InvalidArgument("fidelity designation '" + designation + "' is not T{k}_V{k}_M{e}");
  FidelitySpec f;
  f.train_denominator = std::stoi(m[1]);
  f.val_denominator = std::stoi(m[2]);
  f.max_epochs = std::stoi(m[3]);
  if (f.train_denominator < 1 || f.val_denominator < 1 || f.max_epochs < 1)
    throw InvalidArgument("fidelity denominators and epochs must be >= 1");
  return f;
}

std::vector<std::size_t> rotate_subset(std::size_t n_items, int denominator, std::int64_t rotation_index,
                                       std::uint64_t seed) {
  if (denominator < 1) throw InvalidArgument("denominator must be >= 1");
  const auto k = static_cast<std::size_t>(denominator);
  if (n_items < k) throw InvalidArgument("cannot split " + std::to_string(n_items) + " items into " +
                                         std::to_string(k) + " subsets");
  std::vector<std::size_t> perm(n_items);
  for (std::size_t i = 0; i < n_items; ++i) perm[i] = i;
  Rng rng(seed);
  for (std::size_t i = n_items; i > 1; --i) std::swap(perm[i - 1], perm[uniform_index(rng, i)]);
  const auto s = static_cast<std::size_t>(((rotation_index % denominator) + denominator) % denominator);
  std::vector<std::size_t> out(perm.begin() + static_cast<std::ptrdiff_t>(s * n_items / k),
                               perm.begin() + static_cast<std::ptrdiff_t>((s + 1) * n_items / k));
  std::sort(out.begin(), out.end());
  return out;
}

const char* to_string(EarlyStop e) {
  return e == EarlyStop::none ? "none" : "end_of_warmup";
}

EarlyStop early_stop_from_string(const std::string& s) {
  if (s == "none") return EarlyStop::none;
  if (s == "end_of_warmup") return EarlyStop::end_of_warmup;
  throw InvalidArgument("unknown early-stop mode '" + s + "'");
}

const char* to_string(TrialStatus s) {
  switch (s) {
    case TrialStatus::pending: return "pending";
    case TrialStatus::running: return "running";
    case TrialStatus::pruned: return "pruned";
    case TrialStatus::failed: return "failed";
    case TrialStatus::complete: return "complete";
  }
  return "unknown";
}

TrialStatus trial_status_from_string(const std::string& s) {
  for (auto st : {TrialStatus::pending, TrialStatus::running, TrialStatus::pruned, TrialStatus::failed,
                  TrialStatus::complete})
    if (s == to_string(st)) return st;
  throw InvalidArgument("unknown trial status '" + s + "'");
}

const char* to_string(ProvenanceKind p) {
  switch (p) {
    case ProvenanceKind::fresh: return "fresh";
    case ProvenanceKind::warm_primed: return "warm_primed";
    case ProvenanceKind::cold_primed: return "cold_primed";
  }
  return "unknown";
}

ProvenanceKind provenance_from_string(const std::string& s) {
  for (auto p : {ProvenanceKind::fresh, ProvenanceKind::warm_primed, ProvenanceKind::cold_primed})
    if (s == to_string(p)) return p;
  throw InvalidArgument("unknown provenance '" + s + "'");
}

const char* to_string(SuggestionSource s) {
  switch (s) {
    case SuggestionSource::random: return "random";
    case SuggestionSource::surrogate: return "surrogate";
    case SuggestionSource::primed: return "primed";
  }
  return "unknown";
}

SuggestionSource suggestion_source_from_string(const std::string& s) {
  for (auto v : {SuggestionSource::random, SuggestionSource::surrogate, SuggestionSource::primed})
    if (s == to_string(v)) return v;
  throw InvalidArgument("unknown suggestion source '" + s + "'");
}

bool Trial::usable() const {
  return status == TrialStatus::complete && final_score && std::isfinite(*final_score);
}

std::vector<std::size_t> rank_usable(std::span<const Trial> trials) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < trials.size(); ++i)
    if (trials[i].usable()) idx.push_back(i);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const double sa = *trials[a].final_score, sb = *trials[b].final_score;
    if (sa != sb) return sa < sb;
    return trials[a].id < trials[b].id;
  });
  return idx;
}

}  // namespace sprintopt
