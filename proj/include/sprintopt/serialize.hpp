#pragma once

// JSON forms of the domain types. Floats are written with round-trip
// precision, so every from_json(to_json(x)) reproduces x exactly.

#include <json.hpp>

#include "sprintopt/calibrate.hpp"
#include "sprintopt/space.hpp"
#include "sprintopt/sprint.hpp"
#include "sprintopt/testbed.hpp"
#include "sprintopt/trial.hpp"

namespace sprintopt {

using json = nlohmann::json;

json value_to_json(const Value& v);
/// Integers stay integers, other numbers become reals.
Value value_from_json(const json& j);

void to_json(json& j, const Dimension& d);
void from_json(const json& j, Dimension& d);
void to_json(json& j, const SpaceEdit& e);
void from_json(const json& j, SpaceEdit& e);
void to_json(json& j, const SearchSpace& s);
void from_json(const json& j, SearchSpace& s);
void to_json(json& j, const HPoint& p);
void from_json(const json& j, HPoint& p);
void to_json(json& j, const FidelitySpec& f);
void from_json(const json& j, FidelitySpec& f);
void to_json(json& j, const Provenance& p);
void from_json(const json& j, Provenance& p);
void to_json(json& j, const TickRecord& t);
void from_json(const json& j, TickRecord& t);
void to_json(json& j, const RungRecord& r);
void from_json(const json& j, RungRecord& r);
void to_json(json& j, const Trial& t);
void from_json(const json& j, Trial& t);

void to_json(json& j, const InitCheckpoint& c);
void from_json(const json& j, InitCheckpoint& c);
void to_json(json& j, const SprintNameParts& p);
void from_json(const json& j, SprintNameParts& p);
void to_json(json& j, const SprintConfig& c);
void from_json(const json& j, SprintConfig& c);
void to_json(json& j, const QueuedPoint& q);
void from_json(const json& j, QueuedPoint& q);
void to_json(json& j, const Sprint& s);
void from_json(const json& j, Sprint& s);
void to_json(json& j, const Thread& t);
void from_json(const json& j, Thread& t);

namespace calibrate {
void to_json(json& j, const ThresholdSet& t);
void from_json(const json& j, ThresholdSet& t);
void to_json(json& j, const ClimbStep& s);
void to_json(json& j, const ClimbResult& r);
void to_json(json& j, const EpochRecord& r);
void to_json(json& j, const TestScores& s);
void to_json(json& j, const FitReport& r);
}  // namespace calibrate

void to_json(json& j, const ToyCorpus& c);
void from_json(const json& j, ToyCorpus& c);

}  // namespace sprintopt
