#include "sprintopt/serialize.hpp"

#include <cmath>

#include "sprintopt/errors.hpp"

namespace sprintopt {

namespace {

template <typename T>
json optional_to_json(const std::optional<T>& v) {
  if constexpr (std::is_floating_point_v<T>) {
    if (v && !std::isfinite(*v)) return nullptr;
  }
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> optional_from_json(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

template <typename T>
T value_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  return it == j.end() || it->is_null() ? fallback : it->get<T>();
}

}  // namespace

json value_to_json(const Value& v) {
  return std::visit([](const auto& x) { return json(x); }, v);
}

Value value_from_json(const json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) return j.get<double>();
  throw InvalidArgument("hyperparameter value must be a number or a string, got " + j.dump());
}

void to_json(json& j, const Dimension& d) {
  j = json{{"name", d.name}, {"kind", to_string(d.kind)}};
  if (d.is_numeric()) {
    j["low"] = d.low;
    j["high"] = d.high;
  } else {
    j["low"] = nullptr;
    j["high"] = nullptr;
  }
  j["categories"] = d.categories;
  j["frozen"] = d.frozen ? value_to_json(*d.frozen) : json(nullptr);
}

void from_json(const json& j, Dimension& d) {
  d = Dimension{};
  d.name = j.at("name").get<std::string>();
  d.kind = dimension_kind_from_string(j.at("kind").get<std::string>());
  if (d.is_numeric()) {
    d.low = j.at("low").get<double>();
    d.high = j.at("high").get<double>();
  } else {
    d.low = d.high = 0.0;  // as built by Dimension::categorical
  }
  d.categories = value_or(j, "categories", std::vector<std::string>{});
  if (auto it = j.find("frozen"); it != j.end() && !it->is_null()) {
    Value v = value_from_json(*it);
    // a frozen integer read back as a whole-valued real keeps its integer type
    if (d.kind == DimensionKind::integer && std::holds_alternative<double>(v))
      v = static_cast<std::int64_t>(std::get<double>(v));
    d.frozen = v;
  }
  d.validate();
}

void to_json(json& j, const SpaceEdit& e) {
  j = json{{"dimension", e.dimension}, {"rule", e.rule}, {"degenerate", e.degenerate}};
}

void from_json(const json& j, SpaceEdit& e) {
  e.dimension = j.at("dimension").get<std::string>();
  e.rule = j.at("rule").get<std::string>();
  e.degenerate = value_or(j, "degenerate", false);
}

void to_json(json& j, const SearchSpace& s) {
  j = json{{"name", s.name()},
           {"version", s.version()},
           {"parent", optional_to_json(s.parent())},
           {"dimensions", s.dimensions()},
           {"audit", s.audit()}};
}

void from_json(const json& j, SearchSpace& s) {
  s = SearchSpace(j.at("name").get<std::string>(), j.at("dimensions").get<std::vector<Dimension>>(),
                  j.at("version").get<std::int64_t>(), optional_from_json<std::int64_t>(j, "parent"),
                  value_or(j, "audit", std::vector<SpaceEdit>{}));
}

void to_json(json& j, const HPoint& p) {
  j = json::object();
  for (const auto& [name, v] : p.values) j[name] = value_to_json(v);
}

void from_json(const json& j, HPoint& p) {
  if (!j.is_object()) throw InvalidArgument("a point must be a JSON object");
  p.values.clear();
  for (auto it = j.begin(); it != j.end(); ++it) p.values.emplace(it.key(), value_from_json(it.value()));
}

void to_json(json& j, const FidelitySpec& f) {
  j = json{{"designation", f.designation()},
           {"train_denominator", f.train_denominator},
           {"val_denominator", f.val_denominator},
           {"max_epochs", f.max_epochs},
           {"scheduler_enabled", f.scheduler_enabled},
           {"early_stop", to_string(f.early_stop)}};
}

void from_json(const json& j, FidelitySpec& f) {
  if (j.is_string()) {
    f = FidelitySpec::parse(j.get<std::string>());
    return;
  }
  if (auto it = j.find("designation"); it != j.end() && !j.contains("train_denominator")) {
    f = FidelitySpec::parse(it->get<std::string>());
  } else {
    f.train_denominator = j.at("train_denominator").get<int>();
    f.val_denominator = j.at("val_denominator").get<int>();
    f.max_epochs = j.at("max_epochs").get<int>();
  }
  f.scheduler_enabled = value_or(j, "scheduler_enabled", false);
  f.early_stop = early_stop_from_string(value_or<std::string>(j, "early_stop", "none"));
  if (f.train_denominator < 1 || f.val_denominator < 1 || f.max_epochs < 1)
    throw InvalidArgument("fidelity denominators and epochs must be >= 1");
}

void to_json(json& j, const Provenance& p) {
  j = json{{"kind", to_string(p.kind)}, {"source_sprint", p.source_sprint}, {"source_trial", p.source_trial}};
}

void from_json(const json& j, Provenance& p) {
  p.kind = provenance_from_string(j.at("kind").get<std::string>());
  p.source_sprint = value_or<std::string>(j, "source_sprint", "");
  p.source_trial = value_or<std::int64_t>(j, "source_trial", -1);
}

void to_json(json& j, const TickRecord& t) {
  j = json{{"epoch", t.epoch}, {"score", t.score}, {"prunable", t.prunable}};
}

void from_json(const json& j, TickRecord& t) {
  t.epoch = j.at("epoch").get<int>();
  t.score = j.at("score").get<double>();
  t.prunable = j.at("prunable").get<bool>();
}

void to_json(json& j, const RungRecord& r) {
  j = json{{"trial_id", r.trial_id}, {"resource", r.resource}, {"score", r.score}};
}

void from_json(const json& j, RungRecord& r) {
  r.trial_id = j.at("trial_id").get<std::int64_t>();
  r.resource = j.at("resource").get<double>();
  r.score = j.at("score").get<double>();
}

void to_json(json& j, const Trial& t) {
  j = json{{"id", t.id},
           {"point", t.point},
           {"fidelity", t.fidelity},
           {"status", to_string(t.status)},
           {"ticks", t.ticks},
           {"rungs", t.rungs},
           {"final_score", optional_to_json(t.final_score)},
           {"provenance", t.provenance},
           {"source", to_string(t.source)},
           {"seed", t.seed},
           {"rotation_index", t.rotation_index},
           {"error", t.error},
           {"started_at", t.started_at},
           {"finished_at", t.finished_at}};
}

void from_json(const json& j, Trial& t) {
  t = Trial{};
  t.id = j.at("id").get<std::int64_t>();
  t.point = j.at("point").get<HPoint>();
  t.fidelity = j.at("fidelity").get<FidelitySpec>();
  t.status = trial_status_from_string(j.at("status").get<std::string>());
  t.ticks = value_or(j, "ticks", std::vector<TickRecord>{});
  t.rungs = value_or(j, "rungs", std::vector<RungRecord>{});
  t.final_score = optional_from_json<double>(j, "final_score");
  if (auto it = j.find("provenance"); it != j.end()) t.provenance = it->get<Provenance>();
  t.source = suggestion_source_from_string(value_or<std::string>(j, "source", "random"));
  t.seed = value_or<std::uint64_t>(j, "seed", 0);
  t.rotation_index = value_or<std::int64_t>(j, "rotation_index", 0);
  t.error = value_or<std::string>(j, "error", "");
  t.started_at = value_or<std::string>(j, "started_at", "");
  t.finished_at = value_or<std::string>(j, "finished_at", "");
}

void to_json(json& j, const InitCheckpoint& c) { j = json{{"epoch", c.epoch}, {"step", c.step}}; }

void from_json(const json& j, InitCheckpoint& c) {
  c.epoch = j.at("epoch").get<int>();
  c.step = j.at("step").get<int>();
}

void to_json(json& j, const SprintNameParts& p) {
  j = json{{"model_type", p.model_type}, {"variant", p.variant},   {"grouping", p.grouping},
           {"fidelity", p.fidelity.designation()}, {"init", p.init}, {"suffix", p.suffix}};
}

void from_json(const json& j, SprintNameParts& p) {
  p.model_type = j.at("model_type").get<std::string>();
  p.variant = j.at("variant").get<std::string>();
  p.grouping = j.at("grouping").get<std::string>();
  p.fidelity = j.at("fidelity").get<FidelitySpec>();
  p.init = value_or(j, "init", InitCheckpoint{});
  p.suffix = value_or<std::string>(j, "suffix", "");
}

void to_json(json& j, const SprintConfig& c) {
  j = json{{"sampler", to_string(c.sampler)},
           {"pruner", to_string(c.pruner)},
           {"fidelity", c.fidelity},
           {"n_calls", c.n_calls},
           {"n_random", c.n_random},
           {"seed", c.seed},
           {"init", c.init},
           {"calibration_epochs", c.calibration_epochs},
           {"train_stride", c.train_stride},
           {"eta", c.eta},
           {"gp",
            {{"smoothness", gp::to_string(c.gp.smoothness)},
             {"n_candidates", c.gp.n_candidates},
             {"n_perturbed", c.gp.n_perturbed},
             {"perturb_sd", c.gp.perturb_sd},
             {"xi", c.gp.xi},
             {"kappa", c.gp.kappa},
             {"noise_variance", c.gp.noise_variance},
             {"fit_noise", c.gp.fit_noise},
             {"restarts", c.gp.restarts},
             {"max_iterations", c.gp.max_iterations}}},
           {"tpe",
            {{"gamma", c.tpe.gamma},
             {"n_candidates", c.tpe.n_candidates},
             {"n_startup", c.tpe.n_startup},
             {"bandwidth_rule", c.tpe.bandwidth_rule}}},
           {"allow_init_mismatch", c.allow_init_mismatch}};
}

void from_json(const json& j, SprintConfig& c) {
  c = SprintConfig{};
  c.sampler = sampler_from_string(value_or<std::string>(j, "sampler", "gp"));
  c.pruner = pruner_from_string(value_or<std::string>(j, "pruner", "none"));
  if (auto it = j.find("fidelity"); it != j.end()) c.fidelity = it->get<FidelitySpec>();
  c.n_calls = value_or<std::size_t>(j, "n_calls", c.n_calls);
  c.n_random = value_or<std::size_t>(j, "n_random", c.n_random);
  c.seed = value_or<std::uint64_t>(j, "seed", c.seed);
  c.init = value_or(j, "init", InitCheckpoint{});
  c.calibration_epochs = value_or(j, "calibration_epochs", c.calibration_epochs);
  c.train_stride = value_or(j, "train_stride", c.train_stride);
  c.eta = value_or(j, "eta", c.eta);
  if (auto it = j.find("gp"); it != j.end() && it->is_object()) {
    const json& g = *it;
    const auto nu = value_or<std::string>(g, "smoothness", gp::to_string(c.gp.smoothness));
    c.gp.smoothness = gp::smoothness_from_string(nu);
    c.gp.n_candidates = value_or(g, "n_candidates", c.gp.n_candidates);
    c.gp.n_perturbed = value_or(g, "n_perturbed", c.gp.n_perturbed);
    c.gp.perturb_sd = value_or(g, "perturb_sd", c.gp.perturb_sd);
    c.gp.xi = value_or(g, "xi", c.gp.xi);
    c.gp.kappa = value_or(g, "kappa", c.gp.kappa);
    c.gp.noise_variance = value_or(g, "noise_variance", c.gp.noise_variance);
    c.gp.fit_noise = value_or(g, "fit_noise", c.gp.fit_noise);
    c.gp.restarts = value_or(g, "restarts", c.gp.restarts);
    c.gp.max_iterations = value_or(g, "max_iterations", c.gp.max_iterations);
  }
  if (auto it = j.find("tpe"); it != j.end() && it->is_object()) {
    const json& t = *it;
    c.tpe.gamma = value_or(t, "gamma", c.tpe.gamma);
    c.tpe.n_candidates = value_or(t, "n_candidates", c.tpe.n_candidates);
    c.tpe.n_startup = value_or(t, "n_startup", c.tpe.n_startup);
    c.tpe.bandwidth_rule = value_or(t, "bandwidth_rule", c.tpe.bandwidth_rule);
  }
  c.allow_init_mismatch = value_or(j, "allow_init_mismatch", false);
}

void to_json(json& j, const QueuedPoint& q) {
  j = json{{"point", q.point}, {"source_sprint", q.source_sprint}, {"source_trial", q.source_trial}};
}

void from_json(const json& j, QueuedPoint& q) {
  q.point = j.at("point").get<HPoint>();
  q.source_sprint = j.at("source_sprint").get<std::string>();
  q.source_trial = j.at("source_trial").get<std::int64_t>();
}

void to_json(json& j, const Sprint& s) {
  j = json{{"id", s.id},
           {"thread", s.thread_id},
           {"name", s.name},
           {"config", s.config},
           {"space_version", s.space_version},
           {"status", to_string(s.status)},
           {"trials", s.trials},
           {"queue", s.queue},
           {"primed_from", s.primed_from},
           {"worker_limit", s.worker_limit},
           {"error", s.error},
           {"created_at", s.created_at},
           {"finished_at", s.finished_at}};
}

void from_json(const json& j, Sprint& s) {
  s = Sprint{};
  s.id = j.at("id").get<std::string>();
  s.thread_id = j.at("thread").get<std::string>();
  s.name = value_or<std::string>(j, "name", "");
  s.config = j.at("config").get<SprintConfig>();
  s.space_version = j.at("space_version").get<std::int64_t>();
  s.status = sprint_status_from_string(value_or<std::string>(j, "status", "pending"));
  s.trials = value_or(j, "trials", std::vector<Trial>{});
  s.queue = value_or(j, "queue", std::vector<QueuedPoint>{});
  s.primed_from = value_or(j, "primed_from", std::vector<std::string>{});
  s.worker_limit = value_or(j, "worker_limit", 0);
  s.error = value_or<std::string>(j, "error", "");
  s.created_at = value_or<std::string>(j, "created_at", "");
  s.finished_at = value_or<std::string>(j, "finished_at", "");
}

void to_json(json& j, const Thread& t) {
  json spaces = json::array();
  for (const auto& [v, space] : t.spaces) spaces.push_back(space);
  j = json{{"id", t.id},
           {"model_config_id", t.model_config_id},
           {"objective", t.objective},
           {"grouping", t.grouping},
           {"nominal_epochs", t.nominal_epochs},
           {"sprints", t.sprint_ids},
           {"spaces", spaces},
           {"created_at", t.created_at}};
}

void from_json(const json& j, Thread& t) {
  t = Thread{};
  t.id = j.at("id").get<std::string>();
  t.model_config_id = value_or<std::string>(j, "model_config_id", t.id);
  t.objective = j.at("objective").get<std::string>();
  t.grouping = value_or<std::string>(j, "grouping", "");
  t.nominal_epochs = value_or(j, "nominal_epochs", 25);
  t.sprint_ids = value_or(j, "sprints", std::vector<std::string>{});
  for (const auto& s : value_or(j, "spaces", std::vector<SearchSpace>{})) t.spaces.emplace(s.version(), s);
  t.created_at = value_or<std::string>(j, "created_at", "");
}

namespace calibrate {

void to_json(json& j, const ThresholdSet& t) {
  j = json{{"mention", t.mention}, {"coref", t.coref}, {"relation", t.relation}};
}

void from_json(const json& j, ThresholdSet& t) {
  t.mention = j.at("mention").get<double>();
  t.coref = j.at("coref").get<double>();
  t.relation = j.at("relation").get<std::vector<double>>();
}

void to_json(json& j, const ClimbStep& s) {
  j = json{{"iteration", s.iteration},
           {"permutations", s.n_permutations},
           {"iteration_best", s.iteration_best},
           {"best_so_far", s.best_so_far},
           {"thresholds", s.thresholds}};
}

void to_json(json& j, const ClimbResult& r) {
  j = json{{"best", r.best},
           {"best_score", std::isfinite(r.best_score) ? json(r.best_score) : json(nullptr)},
           {"iterations", r.iterations},
           {"trace", r.trace},
           {"failed", r.failed},
           {"error", r.error}};
}

void to_json(json& j, const EpochRecord& r) {
  j = json{{"epoch", r.epoch},
           {"permutations", r.n_permutations},
           {"validation_f1", r.validation_f1},
           {"thresholds", r.thresholds},
           {"checkpoint", r.checkpoint}};
}

void to_json(json& j, const TestScores& s) {
  j = json{{"relation_f1", s.relation_f1}, {"mention_f1", s.mention_f1}, {"coref_f1", s.coref_f1}};
}

void to_json(json& j, const FitReport& r) {
  j = json{{"epochs", r.epochs},
           {"best_epoch", r.best_epoch},
           {"best_validation_f1", std::isfinite(r.best_validation_f1) ? json(r.best_validation_f1) : json(nullptr)},
           {"calibration", r.calibration},
           {"final_thresholds", r.final_thresholds},
           {"test", r.test},
           {"stopped", r.stopped},
           {"failed", r.failed},
           {"error", r.error}};
}

}  // namespace calibrate

namespace {

json docs_to_json(const std::vector<ToyDocument>& docs) {
  json out = json::array();
  for (const auto& d : docs) {
    json spans = json::array(), pairs = json::array(), relations = json::array();
    for (const auto& s : d.spans) spans.push_back({{"latent", s.latent}, {"gold", s.gold}});
    for (const auto& p : d.pairs)
      pairs.push_back({{"a", p.a}, {"b", p.b}, {"latent", p.latent}, {"gold", p.gold}});
    for (const auto& r : d.relations)
      relations.push_back({{"pair", r.pair}, {"class", r.class_id}, {"latent", r.latent}, {"gold", r.gold}});
    out.push_back({{"spans", spans}, {"pairs", pairs}, {"relations", relations}});
  }
  return out;
}

std::vector<ToyDocument> docs_from_json(const json& j) {
  std::vector<ToyDocument> out;
  for (const auto& d : j) {
    ToyDocument doc;
    for (const auto& s : d.at("spans")) doc.spans.push_back({s.at("latent").get<double>(), s.at("gold").get<bool>()});
    for (const auto& p : d.at("pairs"))
      doc.pairs.push_back({p.at("a").get<std::int32_t>(), p.at("b").get<std::int32_t>(), p.at("latent").get<double>(),
                           p.at("gold").get<bool>()});
    for (const auto& r : d.at("relations"))
      doc.relations.push_back({r.at("pair").get<std::int32_t>(), r.at("class").get<std::int32_t>(),
                               r.at("latent").get<double>(), r.at("gold").get<bool>()});
    out.push_back(std::move(doc));
  }
  return out;
}

}  // namespace

void to_json(json& j, const ToyCorpus& c) {
  j = json{{"seed", c.seed},
           {"relation_classes", c.relation_classes},
           {"planted_mention", c.planted_mention},
           {"planted_coref", c.planted_coref},
           {"planted_relation", c.planted_relation},
           {"train", docs_to_json(c.train)},
           {"validation", docs_to_json(c.validation)},
           {"test", docs_to_json(c.test)}};
}

void from_json(const json& j, ToyCorpus& c) {
  c.seed = j.at("seed").get<std::uint64_t>();
  c.relation_classes = j.at("relation_classes").get<int>();
  c.planted_mention = j.at("planted_mention").get<double>();
  c.planted_coref = j.at("planted_coref").get<double>();
  c.planted_relation = j.at("planted_relation").get<std::vector<double>>();
  c.train = docs_from_json(j.at("train"));
  c.validation = docs_from_json(j.at("validation"));
  c.test = docs_from_json(j.at("test"));
}

}  // namespace sprintopt
