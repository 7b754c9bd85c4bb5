#include "wfmini/task.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <future>
#include <mutex>
#include <thread>

#include "wfmini/error.hpp"
#include "wfmini/seed.hpp"

namespace wfmini {

// ---------------------------------------------------------------------------
// validation and JSON

namespace {

[[noreturn]] void schema_error(const std::string& task, const std::string& what) {
  throw Error(ErrorCode::SchemaError, "task '" + task + "': " + what);
}

bool uses_accelerator(const std::vector<ProgramStep>& steps) {
  return std::any_of(steps.begin(), steps.end(), [](const ProgramStep& s) {
    if (s.kind == ProgramStep::Kind::loop) return uses_accelerator(s.body);
    return s.kernel.device().kind == DeviceKind::accelerator;
  });
}

void validate_steps(const std::string& task, const std::vector<ProgramStep>& steps, int depth) {
  if (depth > 16) schema_error(task, "loops nested deeper than 16");
  const auto& catalog = KernelCatalog::instance();
  for (const auto& s : steps) {
    if (s.kind == ProgramStep::Kind::loop) {
      if (s.count < 1) schema_error(task, "loop count must be >= 1");
      if (s.body.empty()) schema_error(task, "loop body must not be empty");
      validate_steps(task, s.body, depth + 1);
      continue;
    }
    catalog.at(s.kernel.kernel);  // UnknownKernel propagates as-is
    try {
      catalog.validate(s.kernel);
    } catch (const Error& e) {
      schema_error(task, e.what());
    }
  }
}

ProgramStep step_from_json(const std::string& task, const nlohmann::json& j) {
  if (!j.is_object()) schema_error(task, "program steps must be objects");
  std::string kind = j.value("kind", "");
  if (kind.empty()) kind = j.contains("kernel") ? "kernel" : "loop";
  if (kind == "kernel") {
    try {
      return ProgramStep::call(kernel_call_from_json(j));
    } catch (const Error& e) {
      schema_error(task, e.what());
    }
  }
  if (kind != "loop") schema_error(task, "unknown step kind '" + kind + "'");
  if (!j.contains("count") || !j.at("count").is_number_integer()) schema_error(task, "loop needs an integer count");
  if (!j.contains("body") || !j.at("body").is_array()) schema_error(task, "loop needs a body array");
  std::vector<ProgramStep> body;
  for (const auto& b : j.at("body")) body.push_back(step_from_json(task, b));
  return ProgramStep::loop(j.at("count").get<std::int64_t>(), std::move(body));
}

nlohmann::json step_to_json(const ProgramStep& s) {
  if (s.kind == ProgramStep::Kind::kernel) return to_json(s.kernel);
  auto body = nlohmann::json::array();
  for (const auto& b : s.body) body.push_back(step_to_json(b));
  return {{"kind", "loop"}, {"count", s.count}, {"body", body}};
}

}  // namespace

void validate_task_spec(const TaskSpec& spec) {
  if (spec.name.empty()) schema_error(spec.name, "name must not be empty");
  if (spec.num_ranks < 1) schema_error(spec.name, "num_ranks must be >= 1");
  if (spec.cpus_per_rank < 1) schema_error(spec.name, "cpus_per_rank must be >= 1");
  if (spec.gpus_per_rank < 0) schema_error(spec.name, "gpus_per_rank must be >= 0");
  if (spec.program.empty()) schema_error(spec.name, "program must not be empty");
  validate_steps(spec.name, spec.program, 0);
  if (spec.gpus_per_rank < 1 && uses_accelerator(spec.program))
    schema_error(spec.name, "accelerator kernels need gpus_per_rank >= 1");
}

TaskSpec parse_task_spec(const nlohmann::json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::SchemaError, "task spec must be an object");
  TaskSpec spec;
  try {
    spec.name = doc.at("name").get<std::string>();
    spec.category = doc.value("category", "task");
    spec.num_ranks = doc.value("num_ranks", 1);
    spec.cpus_per_rank = doc.value("cpus_per_rank", 1);
    spec.gpus_per_rank = doc.value("gpus_per_rank", 0);
    spec.phase = doc.value("phase", 0);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("task spec: ") + e.what());
  }
  if (!doc.contains("program") || !doc.at("program").is_array()) schema_error(spec.name, "program array required");
  for (const auto& s : doc.at("program")) spec.program.push_back(step_from_json(spec.name, s));
  validate_task_spec(spec);
  return spec;
}

nlohmann::json to_json(const TaskSpec& spec) {
  auto program = nlohmann::json::array();
  for (const auto& s : spec.program) program.push_back(step_to_json(s));
  nlohmann::json j{{"name", spec.name},
                   {"category", spec.category},
                   {"num_ranks", spec.num_ranks},
                   {"cpus_per_rank", spec.cpus_per_rank},
                   {"gpus_per_rank", spec.gpus_per_rank}};
  if (spec.phase != 0) j["phase"] = spec.phase;
  j["program"] = program;
  return j;
}

// ---------------------------------------------------------------------------
// dotted paths

namespace {

struct PathTarget {
  std::int64_t* integer = nullptr;
  int* small = nullptr;
  double* real = nullptr;
};

std::vector<std::string_view> split_path(std::string_view path) {
  std::vector<std::string_view> parts;
  while (!path.empty()) {
    const auto dot = path.find('.');
    parts.push_back(path.substr(0, dot));
    if (dot == std::string_view::npos) break;
    path.remove_prefix(dot + 1);
  }
  return parts;
}

[[noreturn]] void unknown_path(std::string_view path) {
  throw Error(ErrorCode::UnknownParameter, "no tunable at path '" + std::string(path) + "'");
}

std::size_t parse_index(std::string_view part, std::string_view path) {
  std::size_t idx = 0;
  const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), idx);
  if (ec != std::errc{} || ptr != part.data() + part.size()) unknown_path(path);
  return idx;
}

PathTarget resolve(TaskSpec& spec, std::string_view path) {
  const auto parts = split_path(path);
  if (parts.size() == 1) {
    if (parts[0] == "num_ranks") return {.small = &spec.num_ranks};
    if (parts[0] == "cpus_per_rank") return {.small = &spec.cpus_per_rank};
    if (parts[0] == "gpus_per_rank") return {.small = &spec.gpus_per_rank};
    unknown_path(path);
  }
  if (parts.empty() || parts[0] != "program") unknown_path(path);
  std::vector<ProgramStep>* steps = &spec.program;
  std::size_t i = 1;
  while (i < parts.size()) {
    const auto idx = parse_index(parts[i], path);
    if (idx >= steps->size()) unknown_path(path);
    ProgramStep& step = (*steps)[idx];
    ++i;
    if (i >= parts.size()) unknown_path(path);
    if (step.kind == ProgramStep::Kind::loop) {
      if (parts[i] == "count" && i + 1 == parts.size()) return {.integer = &step.count};
      if (parts[i] != "body") unknown_path(path);
      steps = &step.body;
      ++i;
      continue;
    }
    if (parts[i] != "params" || i + 1 >= parts.size()) unknown_path(path);
    auto it = step.kernel.params.find(parts[i + 1]);
    if (it == step.kernel.params.end()) unknown_path(path);
    i += 2;
    ParamValue& value = it->second;
    if (auto* iv = std::get_if<std::int64_t>(&value); iv && i == parts.size()) return {.integer = iv};
    if (auto* dv = std::get_if<double>(&value); dv && i == parts.size()) return {.real = dv};
    if (auto* dims = std::get_if<std::vector<DimTriple>>(&value); dims && i + 2 == parts.size()) {
      const auto e = parse_index(parts[i], path);
      const auto c = parse_index(parts[i + 1], path);
      if (e >= dims->size() || c >= 3) unknown_path(path);
      return {.integer = &(*dims)[e][c]};
    }
    unknown_path(path);
  }
  unknown_path(path);
}

void collect_paths(const std::vector<ProgramStep>& steps, const std::string& prefix, std::vector<std::string>& out) {
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto base = prefix + "." + std::to_string(i);
    const auto& s = steps[i];
    if (s.kind == ProgramStep::Kind::loop) {
      out.push_back(base + ".count");
      collect_paths(s.body, base + ".body", out);
      continue;
    }
    for (const auto& [name, value] : s.kernel.params) {
      if (std::holds_alternative<std::int64_t>(value) || std::holds_alternative<double>(value)) {
        out.push_back(base + ".params." + name);
      } else if (auto* dims = std::get_if<std::vector<DimTriple>>(&value)) {
        for (std::size_t e = 0; e < dims->size(); ++e)
          for (int c = 0; c < 3; ++c) out.push_back(base + ".params." + name + "." + std::to_string(e) + "." + std::to_string(c));
      }
    }
  }
}

}  // namespace

double read_path(const TaskSpec& spec, std::string_view path) {
  auto t = resolve(const_cast<TaskSpec&>(spec), path);
  if (t.integer) return static_cast<double>(*t.integer);
  if (t.small) return static_cast<double>(*t.small);
  return *t.real;
}

void write_path(TaskSpec& spec, std::string_view path, double value) {
  auto t = resolve(spec, path);
  const auto rounded = std::max<std::int64_t>(1, std::llround(value));
  if (t.integer) {
    *t.integer = rounded;
  } else if (t.small) {
    *t.small = static_cast<int>(rounded);
  } else {
    *t.real = value;
  }
}

std::vector<std::string> numeric_paths(const TaskSpec& spec) {
  std::vector<std::string> out{"num_ranks", "cpus_per_rank", "gpus_per_rank"};
  collect_paths(spec.program, "program", out);
  return out;
}

TaskSpec scale_task(const TaskSpec& spec, const std::map<std::string, double, std::less<>>& factors) {
  TaskSpec out = spec;
  for (const auto& [path, factor] : factors) {
    if (!(factor > 0)) throw Error(ErrorCode::PreconditionFailed, "scale factor for '" + path + "' must be > 0");
    write_path(out, path, read_path(spec, path) * factor);
  }
  return out;
}

// ---------------------------------------------------------------------------
// execution

namespace {

bool touches_shared_state(const KernelCall& call) {
  return KernelCatalog::instance().at(call.kernel).needs_comm || call.kernel.starts_with("dataCopy");
}

class RankRunner {
 public:
  RankRunner(KernelContext ctx) : ctx_(std::move(ctx)) {}

  void run(const std::vector<ProgramStep>& steps) {
    run_steps(steps);
    drain();
  }

  const KernelResult& totals() const noexcept { return totals_; }
  const std::vector<double>& checksums() const noexcept { return checksums_; }

 private:
  void run_steps(const std::vector<ProgramStep>& steps) {
    for (const auto& s : steps) {
      if (s.kind == ProgramStep::Kind::loop) {
        for (std::int64_t i = 0; i < s.count; ++i) run_steps(s.body);
      } else {
        run_kernel(s.kernel);
      }
    }
  }

  void run_kernel(const KernelCall& call) {
    if (ctx_.comm && ctx_.comm->group().aborted())
      throw Error(ErrorCode::KernelFailure, "aborted because a peer rank failed");
    if (touches_shared_state(call)) drain();
    if (call.is_async()) {
      pending_.push_back(std::async(std::launch::async, [call, ctx = ctx_]() mutable {
        return execute_kernel(call, ctx);
      }));
      return;
    }
    absorb(execute_kernel(call, ctx_));
    drain();
  }

  void drain() {
    std::exception_ptr first;
    for (auto& f : pending_) {
      try {
        absorb(f.get());
      } catch (...) {
        if (!first) first = std::current_exception();
      }
    }
    pending_.clear();
    if (first) std::rethrow_exception(first);
  }

  void absorb(const KernelResult& r) {
    totals_ += r;
    checksums_.push_back(r.checksum);
  }

  KernelContext ctx_;
  KernelResult totals_;
  std::vector<double> checksums_;
  std::vector<std::future<KernelResult>> pending_;
};

}  // namespace

TaskRecord run_task(const TaskSpec& spec, const SlotAssignment& assignment, MetricsSink& sink, std::uint64_t seed,
                    const TaskEnvironment& env) {
  const auto need_cpu = static_cast<std::size_t>(spec.num_ranks) * static_cast<std::size_t>(spec.cpus_per_rank);
  const auto need_gpu = static_cast<std::size_t>(spec.num_ranks) * static_cast<std::size_t>(spec.gpus_per_rank);
  if (assignment.cpu_slots.size() < need_cpu || assignment.gpu_slots.size() < need_gpu)
    throw Error(ErrorCode::InsufficientSlots, "task '" + spec.name + "' needs " + std::to_string(need_cpu) +
                                                  " cpu and " + std::to_string(need_gpu) + " gpu slots");

  std::vector<int> slots(assignment.cpu_slots.begin(), assignment.cpu_slots.begin() + static_cast<std::ptrdiff_t>(need_cpu));
  slots.insert(slots.end(), assignment.gpu_slots.begin(), assignment.gpu_slots.begin() + static_cast<std::ptrdiff_t>(need_gpu));

  const auto tseed = task_seed(seed, spec.name);
  const auto comms = Communicator::create(spec.num_ranks, env.runtime.collective_timeout);
  const int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const int threads = std::min(spec.cpus_per_rank, hw);

  TaskRecord record;
  record.task_name = spec.name;
  record.category = spec.category;
  record.ranks = spec.num_ranks;
  record.slots_used = slots;
  record.start = sink.now();
  sink.append(Event{.kind = EventKind::task_start, .t = record.start, .task = spec.name});
  for (int s : slots) sink.append(Event{.kind = EventKind::slot_busy, .t = record.start, .task = spec.name, .slot = s});

  std::vector<KernelResult> totals(static_cast<std::size_t>(spec.num_ranks));
  std::mutex failure_mu;
  std::exception_ptr failure;
  {
    std::vector<std::jthread> ranks;
    ranks.reserve(totals.size());
    for (int r = 0; r < spec.num_ranks; ++r) {
      ranks.emplace_back([&, r] {
        DeviceMemory memory;
        KernelContext ctx;
        ctx.comm = &comms[static_cast<std::size_t>(r)];
        ctx.sink = &sink;
        ctx.scratch = env.scratch;
        ctx.memory = &memory;
        ctx.options = env.runtime;
        ctx.task = spec.name;
        ctx.rank = r;
        ctx.task_seed = tseed;
        ctx.rank_seed = rank_seed(tseed, r);
        ctx.threads = threads;
        RankRunner runner(std::move(ctx));
        try {
          runner.run(spec.program);
        } catch (const std::exception& e) {
          {
            std::lock_guard lk(failure_mu);
            if (!failure) failure = std::current_exception();
          }
          comms.front().group().abort(std::string("rank ") + std::to_string(r) + ": " + e.what());
        }
        totals[static_cast<std::size_t>(r)] = runner.totals();
      });
    }
  }

  for (const auto& t : totals) {
    record.bytes_read += t.bytes_read;
    record.bytes_written += t.bytes_written;
    record.bytes_communicated += t.bytes_communicated;
  }
  record.end = sink.now();
  record.status = failure ? TaskStatus::failed : TaskStatus::ok;
  for (int s : slots) sink.append(Event{.kind = EventKind::slot_idle, .t = record.end, .task = spec.name, .slot = s});
  sink.append(Event{.kind = EventKind::task_end, .t = record.end, .task = spec.name});
  sink.append(record);

  if (failure) {
    try {
      std::rethrow_exception(failure);
    } catch (const std::exception& e) {
      throw Error(ErrorCode::KernelFailure, "task '" + spec.name + "' failed: " + e.what());
    }
  }
  return record;
}

}  // namespace wfmini
