#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "wfmini/catalog.hpp"
#include "wfmini/resources.hpp"
#include "wfmini/task.hpp"
#include "wfmini/trace.hpp"

namespace wfmini {

enum class ExecutionModel { serial, parallel, sync, async };

std::string_view to_string(ExecutionModel m) noexcept;
ExecutionModel parse_execution_model(std::string_view s);  // SchemaError

/// Knobs of the original workflow (the Table 2 columns).
struct WorkflowConfig {
  int num_nodes = 1;
  int num_cpus = 1;
  int num_gpus = 0;
  std::map<std::string, int, std::less<>> ranks;  // category -> ranks
  int epochs = 1;
  double data_scale = 1.0;
  int phases = 1;
  int steps = 1;

  friend bool operator==(const WorkflowConfig&, const WorkflowConfig&) = default;
};

void validate_config(const WorkflowConfig& c);  // SchemaError
WorkflowConfig config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const WorkflowConfig& c);

/// A tunable value: `path` inside every task matching `target` (category or
/// task name). `metric` is what the value drives during calibration, `knob`
/// the config entry it follows when deriving new configs.
struct Tunable {
  std::string target;
  std::string path;
  std::string metric = "makespan";  // makespan | read_bytes | write_bytes | none
  std::string knob;                 // epochs | data_scale | phases | steps | ranks.<cat> | empty

  friend bool operator==(const Tunable&, const Tunable&) = default;
};

struct WorkflowSpec {
  std::vector<TaskSpec> tasks;
  std::vector<std::pair<std::string, std::string>> edges;  // (pred, succ)
  int phases = 1;
  ExecutionModel execution_model = ExecutionModel::parallel;
  std::optional<WorkflowConfig> config;
  std::vector<Tunable> tunables;

  const TaskSpec& task(std::string_view name) const;  // UnknownTaskReference
  std::vector<std::string> predecessors(std::string_view name) const;

  friend bool operator==(const WorkflowSpec&, const WorkflowSpec&) = default;
};

/// Parses and validates, including validate_dag.
WorkflowSpec load_workflow(const nlohmann::json& doc);
WorkflowSpec load_workflow_file(const std::filesystem::path& path);
nlohmann::json to_json(const WorkflowSpec& spec);

/// Names and edges only: SchemaError on duplicates, UnknownTaskReference on
/// dangling edges, CycleDetected (message lists one cycle).
void validate_dag(const WorkflowSpec& spec);

/// Task names in a deterministic topological order (declaration order among
/// independent tasks).
std::vector<std::string> topological_order(const WorkflowSpec& spec);

struct ExecOptions {
  std::uint64_t seed = 0;
  std::filesystem::path scratch_root;  // ScratchSpace::default_root() when empty
  bool keep_scratch = false;
  RuntimeOptions runtime;
  std::string run_id;                  // generated when empty
};

/// Pilot-style execution: the pool is held for the whole run, ready tasks are
/// started in ready order (declaration order on ties), skipping over tasks that
/// do not fit yet. The serial model runs one task at a time.
/// Throws InsufficientPool, TaskFailed.
RunTrace execute(const WorkflowSpec& spec, const ResourcePool& pool, const ExecOptions& options = {});

/// Longest dependency-weighted path. PreconditionFailed if a duration is missing.
double critical_path(const WorkflowSpec& spec, const std::map<std::string, double, std::less<>>& durations);

/// Sync phased workflow (sim -> train -> select -> agent per phase) to the
/// one-phase-deep async pipeline. ShapeMismatch when the shape is not recognized.
WorkflowSpec async_overlap(const WorkflowSpec& spec);

}  // namespace wfmini
