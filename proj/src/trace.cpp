#include "wfmini/trace.hpp"

#include <algorithm>
#include <fstream>

#include "wfmini/error.hpp"

namespace wfmini {

std::string_view to_string(EventKind kind) noexcept {
  switch (kind) {
    case EventKind::task_start: return "task_start";
    case EventKind::task_end: return "task_end";
    case EventKind::kernel: return "kernel";
    case EventKind::slot_busy: return "slot_busy";
    case EventKind::slot_idle: return "slot_idle";
  }
  return "?";
}

EventKind parse_event_kind(std::string_view s) {
  for (auto k : {EventKind::task_start, EventKind::task_end, EventKind::kernel, EventKind::slot_busy,
                 EventKind::slot_idle}) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorCode::SchemaError, "unknown event kind '" + std::string(s) + "'");
}

void MetricsSink::append(Event e) {
  std::lock_guard lk(mu_);
  events_.push_back(std::move(e));
}

void MetricsSink::append(TaskRecord r) {
  std::lock_guard lk(mu_);
  records_.push_back(std::move(r));
}

std::vector<Event> MetricsSink::events() const {
  std::lock_guard lk(mu_);
  return events_;
}

std::vector<TaskRecord> MetricsSink::records() const {
  std::lock_guard lk(mu_);
  return records_;
}

const TaskRecord& RunTrace::record(std::string_view task) const {
  auto it = std::find_if(records.begin(), records.end(), [&](const auto& r) { return r.task_name == task; });
  if (it == records.end()) throw Error(ErrorCode::UnknownTaskReference, "no record for task '" + std::string(task) + "'");
  return *it;
}

nlohmann::json to_json(const TaskRecord& r) {
  return {{"task", r.task_name},
          {"category", r.category},
          {"start", r.start},
          {"end", r.end},
          {"ranks", r.ranks},
          {"slots", r.slots_used},
          {"bytes_read", r.bytes_read},
          {"bytes_written", r.bytes_written},
          {"bytes_communicated", r.bytes_communicated},
          {"status", r.status == TaskStatus::ok ? "ok" : "failed"}};
}

TaskRecord record_from_json(const nlohmann::json& j) {
  TaskRecord r;
  r.task_name = j.at("task").get<std::string>();
  r.category = j.value("category", "");
  r.start = j.at("start").get<double>();
  r.end = j.at("end").get<double>();
  r.ranks = j.value("ranks", 0);
  r.slots_used = j.value("slots", std::vector<int>{});
  r.bytes_read = j.value("bytes_read", std::uint64_t{0});
  r.bytes_written = j.value("bytes_written", std::uint64_t{0});
  r.bytes_communicated = j.value("bytes_communicated", std::uint64_t{0});
  r.status = j.value("status", "ok") == "ok" ? TaskStatus::ok : TaskStatus::failed;
  return r;
}

nlohmann::json to_json(const Event& e) {
  nlohmann::json j{{"kind", to_string(e.kind)}, {"t", e.t}, {"task", e.task}};
  if (e.rank >= 0) j["rank"] = e.rank;
  if (e.slot >= 0) j["slot"] = e.slot;
  if (e.kind == EventKind::kernel) {
    j["kernel"] = e.kernel;
    j["duration"] = e.duration;
    j["bytes_read"] = e.bytes_read;
    j["bytes_written"] = e.bytes_written;
    j["bytes_communicated"] = e.bytes_communicated;
    j["checksum"] = e.checksum;
  }
  return j;
}

Event event_from_json(const nlohmann::json& j) {
  Event e;
  e.kind = parse_event_kind(j.at("kind").get<std::string>());
  e.t = j.at("t").get<double>();
  e.task = j.value("task", "");
  e.rank = j.value("rank", -1);
  e.slot = j.value("slot", -1);
  e.kernel = j.value("kernel", "");
  e.duration = j.value("duration", 0.0);
  e.bytes_read = j.value("bytes_read", std::uint64_t{0});
  e.bytes_written = j.value("bytes_written", std::uint64_t{0});
  e.bytes_communicated = j.value("bytes_communicated", std::uint64_t{0});
  e.checksum = j.value("checksum", 0.0);
  return e;
}

void write_trace_jsonl(const RunTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::ScratchUnavailable, "cannot write " + path.string());
  for (const auto& e : trace.events) {
    auto j = to_json(e);
    if (e.kind == EventKind::task_end) {
      auto it = std::find_if(trace.records.begin(), trace.records.end(),
                             [&](const auto& r) { return r.task_name == e.task; });
      if (it != trace.records.end()) j["record"] = to_json(*it);
    }
    out << j.dump() << '\n';
  }
}

RunTrace read_trace_dir(const std::filesystem::path& dir) {
  const auto trace_path = dir / "trace.jsonl";
  std::ifstream in(trace_path);
  if (!in) throw Error(ErrorCode::EmptyTrace, "no trace.jsonl in " + dir.string());
  RunTrace trace;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      trace.events.push_back(event_from_json(j));
      if (j.contains("record")) trace.records.push_back(record_from_json(j.at("record")));
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::SchemaError, trace_path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
  std::ifstream run(dir / "run.json");
  if (run) {
    try {
      const auto j = nlohmann::json::parse(run);
      trace.run_id = j.value("run_id", "");
      if (j.contains("resources")) trace.pool = pool_from_json(j.at("resources"));
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::SchemaError, std::string("run.json: ") + ex.what());
    }
  }
  return trace;
}

}  // namespace wfmini
