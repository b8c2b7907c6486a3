#include "sprintopt/store.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <regex>

#include "sprintopt/errors.hpp"

namespace sprintopt {

const Thread& StoreState::thread(const std::string& id) const {
  auto it = threads.find(id);
  if (it == threads.end()) throw NotFound("unknown thread '" + id + "'");
  return it->second;
}

const Sprint& StoreState::sprint(const std::string& id) const {
  auto it = sprints.find(id);
  if (it == sprints.end()) throw NotFound("unknown sprint '" + id + "'");
  return it->second;
}

std::string utc_now() {
  using namespace std::chrono;
  const auto now = system_clock::now();
  const auto us = duration_cast<microseconds>(now.time_since_epoch()).count() % 1'000'000;
  const std::time_t t = system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%06lldZ", tm.tm_year + 1900, tm.tm_mon + 1,
                tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<long long>(us));
  return buf;
}

namespace {

Sprint& sprint_of(StoreState& s, const json& e) {
  auto it = s.sprints.find(e.at("sprint").get<std::string>());
  if (it == s.sprints.end()) throw Error("event references unknown sprint " + e.at("sprint").dump());
  return it->second;
}

Trial& trial_of(Sprint& sprint, const json& e) {
  Trial* t = sprint.find_trial(e.at("trial").get<std::int64_t>());
  if (!t) throw Error("event references unknown trial " + e.at("trial").dump() + " of sprint " + sprint.id);
  return *t;
}

void insert_trial(Sprint& sprint, Trial trial) {
  if (trial.fidelity.designation() != sprint.config.fidelity.designation())
    throw Error("trial " + std::to_string(trial.id) + " at " + trial.fidelity.designation() +
                " cannot join sprint " + sprint.id + " at " + sprint.config.fidelity.designation());
  if (sprint.find_trial(trial.id)) throw Error("duplicate trial id " + std::to_string(trial.id));
  sprint.trials.push_back(std::move(trial));
}

}  // namespace

void apply_event(StoreState& state, const json& e) {
  const std::string kind = e.at("kind").get<std::string>();
  const std::string ts = e.value("ts", "");
  if (auto it = e.find("seq"); it != e.end()) state.last_seq = std::max(state.last_seq, it->get<std::uint64_t>());

  if (kind == "thread-created") {
    Thread t = e.at("thread_state").get<Thread>();
    t.created_at = ts;
    if (state.threads.count(t.id)) throw Conflict("thread '" + t.id + "' already exists");
    state.threads.emplace(t.id, std::move(t));
  } else if (kind == "space-created") {
    auto it = state.threads.find(e.at("thread").get<std::string>());
    if (it == state.threads.end()) throw Error("space for unknown thread");
    SearchSpace space = e.at("space").get<SearchSpace>();
    if (!it->second.spaces.empty() && space.version() <= it->second.latest_version())
      throw Error("space versions must increase");
    it->second.spaces.emplace(space.version(), std::move(space));
  } else if (kind == "sprint-created") {
    Sprint s = e.at("sprint_state").get<Sprint>();
    s.created_at = ts;
    auto it = state.threads.find(s.thread_id);
    if (it == state.threads.end()) throw Error("sprint for unknown thread");
    it->second.sprint_ids.push_back(s.id);
    ++state.sprints_created;
    state.sprints.emplace(s.id, std::move(s));
  } else if (kind == "sprint-primed") {
    Sprint& s = sprint_of(state, e);
    for (const auto& t : e.at("trials")) insert_trial(s, t.get<Trial>());
    for (const auto& q : e.at("queued")) s.queue.push_back(q.get<QueuedPoint>());
    s.primed_from.push_back(e.at("source").get<std::string>());
  } else if (kind == "sprint-started") {
    Sprint& s = sprint_of(state, e);
    s.status = SprintStatus::running;
    s.worker_limit = e.at("worker_limit").get<int>();
  } else if (kind == "trial-started") {
    Sprint& s = sprint_of(state, e);
    Trial t = e.at("trial_state").get<Trial>();
    t.started_at = ts;
    if (e.value("dequeued", false)) {
      if (s.queue.empty()) throw Error("dequeue from an empty priming queue");
      s.queue.erase(s.queue.begin());
    }
    insert_trial(s, std::move(t));
  } else if (kind == "tick") {
    Trial& t = trial_of(sprint_of(state, e), e);
    t.ticks.push_back({e.at("epoch").get<int>(), e.at("score").get<double>(), e.at("prunable").get<bool>()});
    for (const auto& r : e.value("rungs", json::array())) t.rungs.push_back(r.get<RungRecord>());
  } else if (kind == "trial-finished") {
    Trial& t = trial_of(sprint_of(state, e), e);
    t.status = trial_status_from_string(e.at("status").get<std::string>());
    const auto& score = e.at("final_score");
    t.final_score = score.is_null() ? std::nullopt : std::optional<double>(score.get<double>());
    t.error = e.value("error", "");
    t.finished_at = ts;
  } else if (kind == "sprint-finished") {
    Sprint& s = sprint_of(state, e);
    s.status = sprint_status_from_string(e.at("status").get<std::string>());
    s.error = e.value("error", "");
    s.finished_at = ts;
  } else {
    throw Error("unknown event kind '" + kind + "'");
  }
}

void Store::check_id(const std::string& id) {
  static const std::regex pattern("[A-Za-z0-9_-]+");
  if (!std::regex_match(id, pattern)) throw InvalidArgument("identifier '" + id + "' must match [A-Za-z0-9_-]+");
}

Store::Store(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_ / "threads");
  replay();
}

std::filesystem::path Store::thread_dir(const std::string& thread) const { return root_ / "threads" / thread; }

void Store::replay() {
  std::vector<json> events;
  for (const auto& entry : std::filesystem::directory_iterator(root_ / "threads")) {
    if (!entry.is_directory()) continue;
    std::ifstream in(entry.path() / "events.jsonl");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        events.push_back(json::parse(line));
      } catch (const json::parse_error&) {
        ++skipped_;
      }
    }
  }
  std::sort(events.begin(), events.end(), [](const json& a, const json& b) {
    return a.at("seq").get<std::uint64_t>() < b.at("seq").get<std::uint64_t>();
  });
  for (const auto& e : events) apply_event(state_, e);
  replayed_ = events.size();
}

json Store::commit(json event) {
  std::lock_guard lock(mutex_);
  event["seq"] = state_.last_seq + 1;
  event["ts"] = utc_now();
  if (persistent()) {
    const std::string thread = event.at("thread").get<std::string>();
    auto it = logs_.find(thread);
    if (it == logs_.end()) {
      std::filesystem::create_directories(thread_dir(thread));
      it = logs_.emplace(thread, std::ofstream(thread_dir(thread) / "events.jsonl", std::ios::app)).first;
      if (!it->second) throw Error("cannot open event log for thread '" + thread + "'");
    }
    it->second << event.dump() << '\n';
    it->second.flush();
    if (!it->second) throw Error("event log write failed for thread '" + thread + "'");
  }
  apply_event(state_, event);
  if (persistent()) write_snapshots(event);
  return event;
}

void Store::write_snapshots(const json& event) {
  const std::string kind = event.at("kind").get<std::string>();
  const std::string thread = event.at("thread").get<std::string>();
  auto write = [](const std::filesystem::path& path, const json& body) {
    std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      out << body.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, path);
  };
  if (kind == "thread-created" || kind == "space-created") {
    for (const auto& [v, space] : state_.thread(thread).spaces)
      write(thread_dir(thread) / "spaces" / ("v" + std::to_string(v) + ".json"), space);
  } else if (kind == "sprint-finished" || kind == "sprint-created") {
    const std::string id = event.at("sprint").get<std::string>();
    write(thread_dir(thread) / "sprints" / (id + ".json"), state_.sprint(id));
  }
}

StoreState Store::snapshot() const {
  std::lock_guard lock(mutex_);
  return state_;
}

}  // namespace sprintopt
