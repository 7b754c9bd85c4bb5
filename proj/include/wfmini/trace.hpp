#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "wfmini/resources.hpp"

namespace wfmini {

enum class EventKind { task_start, task_end, kernel, slot_busy, slot_idle };

std::string_view to_string(EventKind kind) noexcept;
EventKind parse_event_kind(std::string_view s);

enum class TaskStatus { ok, failed };

struct TaskRecord {
  std::string task_name;
  std::string category;
  double start = 0.0;  // seconds since run start
  double end = 0.0;
  int ranks = 0;
  std::vector<int> slots_used;
  std::uint64_t bytes_read = 0;
  std::uint64_t bytes_written = 0;
  std::uint64_t bytes_communicated = 0;
  TaskStatus status = TaskStatus::ok;

  double duration() const noexcept { return end - start; }
};

/// One line of trace.jsonl. Fields not meaningful for a kind stay at their
/// defaults and are omitted when serialized.
struct Event {
  EventKind kind = EventKind::kernel;
  double t = 0.0;
  std::string task{};
  int rank = -1;
  int slot = -1;
  std::string kernel{};
  double duration = 0.0;
  std::uint64_t bytes_read = 0;
  std::uint64_t bytes_written = 0;
  std::uint64_t bytes_communicated = 0;
  double checksum = 0.0;
};

/// Thread-safe append-only collector for one run. Owns the run clock.
class MetricsSink {
 public:
  using Clock = std::chrono::steady_clock;

  MetricsSink() : epoch_(Clock::now()) {}

  double now() const noexcept { return std::chrono::duration<double>(Clock::now() - epoch_).count(); }

  void append(Event e);
  void append(TaskRecord r);

  std::vector<Event> events() const;
  std::vector<TaskRecord> records() const;

 private:
  Clock::time_point epoch_;
  mutable std::mutex mu_;
  std::vector<Event> events_;
  std::vector<TaskRecord> records_;
};

struct RunTrace {
  std::string run_id;
  ResourcePool pool;
  std::vector<Event> events;       // sorted by t
  std::vector<TaskRecord> records; // in completion order

  const TaskRecord& record(std::string_view task) const;
};

nlohmann::json to_json(const Event& e);
nlohmann::json to_json(const TaskRecord& r);
TaskRecord record_from_json(const nlohmann::json& j);
Event event_from_json(const nlohmann::json& j);

/// trace.jsonl: one event per line; task_end lines carry the full record.
void write_trace_jsonl(const RunTrace& trace, const std::filesystem::path& path);

/// Reads trace.jsonl and, if present, the sibling run.json for pool and run id.
RunTrace read_trace_dir(const std::filesystem::path& dir);

}  // namespace wfmini
