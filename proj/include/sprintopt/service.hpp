#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "sprintopt/engine.hpp"
#include "sprintopt/losses.hpp"
#include "sprintopt/serialize.hpp"

namespace sprintopt {

/// Grouping dimensions plus an integer lr_warmup dimension in [1, 12].
SearchSpace initial_space(const GroupingScheme& grouping);

using ObjectiveFactory = std::function<std::unique_ptr<ObjectiveHandle>(const Thread& thread)>;

/// Objective named by the thread, over the thread's first space version.
std::unique_ptr<ObjectiveHandle> default_objective(const Thread& thread);

/// Creates a thread over initial_space(grouping); its nominal schedule length
/// comes from the objective.
void init_thread(Engine& engine, const std::string& id, const std::string& objective, const std::string& grouping,
                 const ObjectiveFactory& factory = default_objective);

/// Sprint summary as served by GET /sprints/{id}.
json sprint_view(const Sprint& sprint);

struct HttpResponse {
  int status = 200;
  json body;
};

json to_json_view(const ScatterSeries& s);

/// HTTP/JSON view and command layer over an Engine. `handle` is the whole
/// contract; `listen` only binds it to a socket.
///
///   GET  /threads                              paged
///   GET  /threads/{id}
///   GET  /threads/{id}/sprints                 paged
///   GET  /threads/{id}/spaces/{version}
///   GET  /sprints/{id}                         ?consistent=true -> 409 while running
///   GET  /sprints/{id}/trials                  paged
///   GET  /sprints/{id}/dimensions/{name}/scatter   ?k=10, points paged
///   POST /threads                              {id, objective, grouping}
///   POST /sprints                              sprint config with optional priming
///   POST /sprints/{id}/prune                   {k, margins, freezes}
///   POST /sprints/{id}/run                     {worker_limit} -> 202
///
/// Paged lists take limit and offset and report total.
class Service {
 public:
  explicit Service(Engine& engine, ObjectiveFactory factory = default_objective);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  HttpResponse handle(const std::string& method, const std::string& path,
                      const std::map<std::string, std::string>& query = {}, const std::string& body = "");

  /// Serves until stop() is called.
  void listen(const std::string& host, int port);
  void stop();
  /// Waits for every sprint started through POST /run.
  void wait_idle();

 private:
  HttpResponse route(const std::string& method, const std::vector<std::string>& parts,
                     const std::map<std::string, std::string>& query, const json& body);
  HttpResponse start_run(const std::string& sprint_id, const json& body);

  Engine& engine_;
  ObjectiveFactory factory_;
  std::mutex runs_mutex_;
  std::vector<std::thread> runs_;
  std::function<void()> stop_;
};

}  // namespace sprintopt
