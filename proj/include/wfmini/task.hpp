#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "wfmini/catalog.hpp"
#include "wfmini/kernel_call.hpp"
#include "wfmini/trace.hpp"

namespace wfmini {

struct ProgramStep {
  enum class Kind { kernel, loop };

  Kind kind = Kind::kernel;
  KernelCall kernel;               // kind == kernel
  std::int64_t count = 1;          // kind == loop
  std::vector<ProgramStep> body;   // kind == loop

  static ProgramStep call(KernelCall k) { return {Kind::kernel, std::move(k), 1, {}}; }
  static ProgramStep loop(std::int64_t count, std::vector<ProgramStep> body) {
    return {Kind::loop, {}, count, std::move(body)};
  }

  friend bool operator==(const ProgramStep&, const ProgramStep&) = default;
};

/// An emulated task: every rank runs `program` (SPMD).
struct TaskSpec {
  std::string name;
  std::string category = "task";
  int num_ranks = 1;
  int cpus_per_rank = 1;
  int gpus_per_rank = 0;
  int phase = 0;  // 0 = not part of a phased workflow
  std::vector<ProgramStep> program;

  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

/// Throws SchemaError (shape, counts, accelerator without gpus) or UnknownKernel.
void validate_task_spec(const TaskSpec& spec);

TaskSpec parse_task_spec(const nlohmann::json& doc);
nlohmann::json to_json(const TaskSpec& spec);

// Dotted-path addressing of tunable values, e.g. "program.0.count",
// "program.0.body.1.params.data_size", "program.2.params.dim_list.0.1",
// "num_ranks". Unknown paths throw UnknownParameter.
double read_path(const TaskSpec& spec, std::string_view path);
/// Integer targets are rounded to nearest and floored at 1.
void write_path(TaskSpec& spec, std::string_view path, double value);
/// Every addressable numeric path in the task.
std::vector<std::string> numeric_paths(const TaskSpec& spec);

/// Multiplies each addressed value by its factor (original untouched).
TaskSpec scale_task(const TaskSpec& spec, const std::map<std::string, double, std::less<>>& factors);

struct SlotAssignment {
  std::vector<int> cpu_slots;
  std::vector<int> gpu_slots;
};

struct TaskEnvironment {
  ScratchSpace* scratch = nullptr;  // process default when null
  RuntimeOptions runtime;
};

/// Runs all ranks concurrently and returns once every rank finished. Appends
/// task_start/slot_busy at start, kernel events while running, slot_idle/
/// task_end and the record at the end. The first kernel failure aborts the
/// remaining ranks; the failed record is still appended before KernelFailure
/// is thrown.
TaskRecord run_task(const TaskSpec& spec, const SlotAssignment& assignment, MetricsSink& sink, std::uint64_t seed,
                    const TaskEnvironment& env = {});

}  // namespace wfmini
