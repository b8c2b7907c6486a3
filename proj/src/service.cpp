#include "sprintopt/service.hpp"

#include <httplib.h>

#include <iostream>

#include "sprintopt/errors.hpp"
#include "sprintopt/testbed.hpp"

namespace sprintopt {

SearchSpace initial_space(const GroupingScheme& grouping) {
  auto dims = grouping_dimensions(grouping);
  dims.push_back(Dimension::integer("lr_warmup", 1, 12));
  return SearchSpace(grouping.name(), std::move(dims));
}

std::unique_ptr<ObjectiveHandle> default_objective(const Thread& thread) {
  return make_objective(thread.objective, thread.spaces.begin()->second);
}

json to_json_view(const ScatterSeries& s) {
  json points = json::array();
  for (const auto& p : s.points)
    points.push_back({{"value", value_to_json(p.value)},
                      {"score", p.score},
                      {"trial_id", p.trial_id},
                      {"provenance", to_string(p.provenance)}});
  return {{"dimension", s.dimension},
          {"points", points},
          {"current", s.current},
          {"hull", s.hull ? json(*s.hull) : json(nullptr)},
          {"proposed", s.proposed ? json(*s.proposed) : json(nullptr)}};
}

namespace {

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : path) {
    if (c == '/') {
      if (!cur.empty()) parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) parts.push_back(cur);
  return parts;
}

std::size_t query_size(const std::map<std::string, std::string>& q, const std::string& key, std::size_t fallback) {
  auto it = q.find(key);
  if (it == q.end() || it->second.empty()) return fallback;
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(it->second, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != it->second.size() || v < 0) throw InvalidArgument("query parameter " + key + " must be a non-negative integer");
  return static_cast<std::size_t>(v);
}

json page(const json& items, const std::map<std::string, std::string>& query) {
  const std::size_t total = items.size();
  const std::size_t offset = std::min(query_size(query, "offset", 0), total);
  const std::size_t limit = query_size(query, "limit", total);
  json out = json::array();
  for (std::size_t i = offset; i < std::min(total, offset + limit); ++i) out.push_back(items[i]);
  return {{"items", out}, {"total", total}, {"offset", offset}, {"limit", limit}};
}

json thread_summary(const StoreState& s, const Thread& t) {
  return {{"id", t.id},
          {"model_config_id", t.model_config_id},
          {"objective", t.objective},
          {"grouping", t.grouping},
          {"nominal_epochs", t.nominal_epochs},
          {"sprints", t.sprint_ids},
          {"space_versions", json::array()},
          {"latest_space_version", t.latest_version()},
          {"running", std::any_of(t.sprint_ids.begin(), t.sprint_ids.end(),
                                  [&](const std::string& id) { return s.sprint(id).mutating(); })},
          {"created_at", t.created_at}};
}

HttpResponse error_response(int status, const std::string& message) {
  return {status, {{"error", message}}};
}

}  // namespace

json sprint_view(const Sprint& s) {
  const auto inc = s.incumbent();
  std::size_t finished = 0;
  for (const auto& t : s.trials)
    if (t.status != TrialStatus::running && t.status != TrialStatus::pending) ++finished;
  return {{"id", s.id},
          {"thread", s.thread_id},
          {"name", s.name},
          {"status", to_string(s.status)},
          {"config", s.config},
          {"space_version", s.space_version},
          {"primed_from", s.primed_from},
          {"queued", s.queue},
          {"trial_count", s.trials.size()},
          {"finished_trials", finished},
          {"incumbent", inc ? json(s.trials[*inc]) : json(nullptr)},
          {"worker_limit", s.worker_limit},
          {"error", s.error},
          {"created_at", s.created_at},
          {"finished_at", s.finished_at}};
}

void init_thread(Engine& engine, const std::string& id, const std::string& objective, const std::string& grouping,
                 const ObjectiveFactory& factory) {
  const GroupingScheme scheme = GroupingScheme::parse(grouping);
  Thread probe;
  probe.id = id;
  probe.objective = objective;
  probe.spaces.emplace(1, initial_space(scheme));
  const int nominal = factory(probe)->nominal_epochs();
  engine.create_thread(id, objective, scheme.name(), initial_space(scheme), nominal);
}

Service::Service(Engine& engine, ObjectiveFactory factory) : engine_(engine), factory_(std::move(factory)) {}

Service::~Service() {
  stop();
  wait_idle();
}

void Service::wait_idle() {
  std::vector<std::thread> runs;
  {
    std::lock_guard lock(runs_mutex_);
    runs.swap(runs_);
  }
  for (auto& t : runs) t.join();
}

HttpResponse Service::handle(const std::string& method, const std::string& path,
                             const std::map<std::string, std::string>& query, const std::string& body) {
  try {
    json parsed = json::object();
    if (!body.empty()) parsed = json::parse(body);
    return route(method, split_path(path), query, parsed);
  } catch (const PrimingError& e) {
    return {422, {{"error", e.what()}, {"reason", to_string(e.reason())}}};
  } catch (const NotFound& e) {
    return error_response(404, e.what());
  } catch (const Conflict& e) {
    return error_response(409, e.what());
  } catch (const InsufficientData& e) {
    return error_response(422, e.what());
  } catch (const InvalidArgument& e) {
    return error_response(400, e.what());
  } catch (const json::exception& e) {
    return error_response(400, std::string("malformed request: ") + e.what());
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

HttpResponse Service::route(const std::string& method, const std::vector<std::string>& p,
                            const std::map<std::string, std::string>& query, const json& body) {
  const std::size_t n = p.size();
  if (method == "GET") {
    if (n == 1 && p[0] == "threads") {
      return {200, page(engine_.store().read([](const StoreState& s) {
                   json items = json::array();
                   for (const auto& [id, t] : s.threads) items.push_back(thread_summary(s, t));
                   return items;
                 }),
                        query)};
    }
    if (n == 2 && p[0] == "threads")
      return {200, engine_.store().read([&](const StoreState& s) {
                json j = thread_summary(s, s.thread(p[1]));
                for (const auto& [v, space] : s.thread(p[1]).spaces) j["space_versions"].push_back(v);
                return j;
              })};
    if (n == 3 && p[0] == "threads" && p[2] == "sprints") {
      return {200, page(engine_.store().read([&](const StoreState& s) {
                   json items = json::array();
                   for (const auto& id : s.thread(p[1]).sprint_ids) items.push_back(sprint_view(s.sprint(id)));
                   return items;
                 }),
                        query)};
    }
    if (n == 4 && p[0] == "threads" && p[2] == "spaces") {
      const std::int64_t v = std::stoll(p[3]);
      return {200, engine_.store().read([&](const StoreState& s) { return json(s.thread(p[1]).space(v)); })};
    }
    if (n == 2 && p[0] == "sprints") {
      const Sprint s = engine_.store().read([&](const StoreState& st) { return st.sprint(p[1]); });
      auto it = query.find("consistent");
      if (it != query.end() && (it->second == "true" || it->second == "1") && s.mutating())
        throw Conflict("sprint '" + s.id + "' is running; no consistent snapshot yet");
      return {200, sprint_view(s)};
    }
    if (n == 3 && p[0] == "sprints" && p[2] == "trials") {
      const Sprint s = engine_.store().read([&](const StoreState& st) { return st.sprint(p[1]); });
      return {200, page(json(s.trials), query)};
    }
    if (n == 5 && p[0] == "sprints" && p[2] == "dimensions" && p[4] == "scatter") {
      const auto [sprint, space] = engine_.store().read([&](const StoreState& st) {
        const Sprint& s = st.sprint(p[1]);
        return std::make_pair(s, st.thread(s.thread_id).space(s.space_version));
      });
      if (!space.find(p[3])) throw NotFound("sprint '" + p[1] + "' has no dimension '" + p[3] + "'");
      json view = to_json_view(scatter_series(sprint, space, p[3], query_size(query, "k", 10)));
      view["k"] = query_size(query, "k", 10);
      const json paged = page(view["points"], query);
      view["points"] = paged["items"];
      view["total"] = paged["total"];
      view["offset"] = paged["offset"];
      view["limit"] = paged["limit"];
      return {200, view};
    }
    return error_response(404, "no such resource");
  }

  if (method == "POST") {
    if (n == 1 && p[0] == "threads") {
      const std::string id = body.at("id").get<std::string>();
      const std::string objective = body.value("objective", "multitask_sim");
      init_thread(engine_, id, objective, body.value("grouping", "GLOBAL"), factory_);
      return {201, engine_.store().read([&](const StoreState& s) { return thread_summary(s, s.thread(id)); })};
    }
    if (n == 1 && p[0] == "sprints") {
      const std::string thread = body.at("thread").get<std::string>();
      SprintConfig config = body.get<SprintConfig>();
      std::string name = body.value("name", "");
      if (auto it = body.find("name_parts"); it != body.end()) {
        SprintNameParts parts = it->get<SprintNameParts>();
        if (parts.fidelity.designation() != config.fidelity.designation() || !(parts.init == config.init))
          throw InvalidArgument("name_parts fidelity and init must match the sprint's");
        name = sprint_name(parts);
      }
      std::optional<std::int64_t> version;
      if (auto it = body.find("space_version"); it != body.end() && !it->is_null()) version = it->get<std::int64_t>();
      std::optional<PrimingRequest> priming;
      if (auto it = body.find("priming"); it != body.end() && !it->is_null())
        priming = PrimingRequest{priming_mode_from_string(it->at("mode").get<std::string>()),
                                 it->at("source").get<std::string>(), it->value("top_n", std::size_t{3})};
      const std::string id = engine_.create_sprint(thread, config, version, name, priming);
      return {201, engine_.store().read([&](const StoreState& s) { return sprint_view(s.sprint(id)); })};
    }
    if (n == 3 && p[0] == "sprints" && p[2] == "prune") {
      MarginPolicy margins;
      if (auto it = body.find("margins"); it != body.end() && it->is_object()) {
        margins.log_factor = it->value("log_factor", margins.log_factor);
        margins.uniform_delta = it->value("uniform_delta", margins.uniform_delta);
        margins.integer_delta = it->value("integer_delta", margins.integer_delta);
      }
      std::vector<std::pair<std::string, Value>> freezes;
      for (const auto& f : body.value("freezes", json::array()))
        freezes.emplace_back(f.at("dim").get<std::string>(), value_from_json(f.at("value")));
      const auto k = body.value("k", std::size_t{10});
      return {201, json(engine_.prune_sprint(p[1], k, margins, freezes))};
    }
    if (n == 3 && p[0] == "sprints" && p[2] == "run") return start_run(p[1], body);
    return error_response(404, "no such resource");
  }
  return error_response(405, "method not allowed");
}

HttpResponse Service::start_run(const std::string& sprint_id, const json& body) {
  const int workers = body.value("worker_limit", 1);
  const Thread thread = engine_.store().read([&](const StoreState& s) { return s.thread(s.sprint(sprint_id).thread_id); });
  std::shared_ptr<ObjectiveHandle> objective = factory_(thread);
  engine_.claim(sprint_id, workers);
  std::lock_guard lock(runs_mutex_);
  runs_.emplace_back([this, sprint_id, objective] {
    try {
      engine_.run_claimed(sprint_id, *objective);
    } catch (const std::exception& e) {
      std::cerr << "sprint " << sprint_id << " aborted: " << e.what() << '\n';
    }
  });
  return {202, {{"id", sprint_id}, {"status", "running"}, {"worker_limit", workers}}};
}

void Service::listen(const std::string& host, int port) {
  httplib::Server server;
  auto dispatch = [this](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> query;
    for (const auto& [k, v] : req.params) query[k] = v;
    const HttpResponse r = handle(req.method, req.path, query, req.body);
    res.status = r.status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(r.body.dump(), "application/json");
  };
  server.Get(R"(/.*)", dispatch);
  server.Post(R"(/.*)", dispatch);
  stop_ = [&server] { server.stop(); };
  if (!server.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
  stop_ = nullptr;
}

void Service::stop() {
  if (stop_) stop_();
}

}  // namespace sprintopt
