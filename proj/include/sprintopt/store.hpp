#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "sprintopt/serialize.hpp"
#include "sprintopt/sprint.hpp"

namespace sprintopt {

/// Everything the event log describes.
struct StoreState {
  std::map<std::string, Thread> threads;
  std::map<std::string, Sprint> sprints;
  std::uint64_t last_seq = 0;
  std::int64_t sprints_created = 0;

  const Thread& thread(const std::string& id) const;
  const Sprint& sprint(const std::string& id) const;
};

/// Applies one event to the state. The only way state changes, so replaying
/// the log rebuilds it exactly.
void apply_event(StoreState& state, const json& event);

/// UTC timestamp, RFC 3339 with microseconds.
std::string utc_now();

/// Thread-safe owner of the event log and the state it implies.
///
/// With a root directory every event is appended as one JSON line to
/// threads/<id>/events.jsonl and flushed before it is applied; snapshots of
/// finished sprints and new space versions are written next to the log.
/// Without one the store lives in memory only.
class Store {
 public:
  Store() = default;
  /// Opens (creating if needed) a store directory and replays its logs.
  explicit Store(std::filesystem::path root);

  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  /// Stamps `event` with seq and ts, persists it, applies it, and returns the
  /// stamped event.
  json commit(json event);

  template <typename F>
  auto read(F&& f) const {
    std::lock_guard lock(mutex_);
    return f(static_cast<const StoreState&>(state_));
  }

  StoreState snapshot() const;
  bool persistent() const noexcept { return !root_.empty(); }
  const std::filesystem::path& root() const noexcept { return root_; }
  /// Events read back when the store was opened.
  std::size_t replayed() const noexcept { return replayed_; }
  /// Unparsable lines skipped during replay (a torn final write).
  std::size_t skipped() const noexcept { return skipped_; }

  /// Identifiers used as directory names must match [A-Za-z0-9_-]+.
  static void check_id(const std::string& id);

 private:
  std::filesystem::path thread_dir(const std::string& thread) const;
  void write_snapshots(const json& event);
  void replay();

  std::filesystem::path root_;
  mutable std::mutex mutex_;
  StoreState state_;
  std::map<std::string, std::ofstream> logs_;
  std::size_t replayed_ = 0;
  std::size_t skipped_ = 0;
};

}  // namespace sprintopt
