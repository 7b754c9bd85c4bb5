#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "wfmini/metrics.hpp"
#include "wfmini/workflow.hpp"

namespace wfmini {

struct MetricTarget {
  double makespan = 0.0;
  double read_bytes = 0.0;
  double write_bytes = 0.0;
  int num_ranks = 0;
};

struct TargetMetrics {
  MetricTarget workflow;
  std::map<std::string, MetricTarget, std::less<>> categories;
};

/// {workflow:{makespan_s, read_bytes, write_bytes},
///  categories:{name:{makespan_s, read_bytes, write_bytes, num_ranks}}}
/// SchemaError on missing fields, negatives, no categories, a category
/// makespan above the workflow's, or category byte sums above the totals.
TargetMetrics ingest_profile(const nlohmann::json& doc);
nlohmann::json to_json(const TargetMetrics& t);

struct CalibrationMapping {
  double ratio = 1.0;
  std::map<std::string, double, std::less<>> param_factors;   // "<target>.<path>" -> value per knob unit
  WorkflowConfig base_config;
  std::map<std::string, double, std::less<>> residual_error;  // "<target>:<metric>" -> relative error
  int iterations = 0;
  WorkflowSpec tuned_spec;
};

nlohmann::json to_json(const CalibrationMapping& m);
CalibrationMapping mapping_from_json(const nlohmann::json& doc);  // SchemaError

struct CalibrationStep {
  int iteration = 0;
  double residual = 0.0;
  bool accepted = true;
  std::map<std::string, double, std::less<>> errors;
};

struct CalibrationResult {
  WorkflowSpec spec;
  CalibrationMapping mapping;
  std::vector<CalibrationStep> history;
};

/// Runs a candidate spec and reports its metrics. Exceptions become RunnerFailure.
using Runner = std::function<MetricsSummary(const WorkflowSpec&)>;

inline constexpr double kMakespanDamping = 0.8;

/// Tunes the spec's tunables until every (target, metric) pair is within
/// `tolerance` of ratio * target. All parameters of a pair move together:
/// makespan ones by (goal/measured)^0.8, byte ones by (goal/measured)^1. A step
/// that worsens the residual is undone and retried at half the exponent.
/// Tasks sharing a target share the value. Each runner call is one iteration.
/// PreconditionFailed, NonConvergence, RunnerFailure.
CalibrationResult calibrate(const WorkflowSpec& spec, const TargetMetrics& target, double ratio, double tolerance,
                            int max_iters, const Runner& runner);

/// Mapping of an already tuned spec: factors from its current values.
CalibrationMapping mapping_from_spec(const WorkflowSpec& spec, double ratio);

/// Mini-app spec for a new original configuration, without running anything.
/// UnmappedKnob when a changed knob has no tunable following it (or the
/// phase count cannot be re-derived).
WorkflowSpec derive_config(const CalibrationMapping& mapping, const WorkflowConfig& new_config);

/// Knob expression value: names (epochs, data_scale, phases, steps,
/// ranks.<category>) and numbers joined by * and /, e.g. "data_scale/ranks.sim".
/// UnmappedKnob for unknown names.
double knob_value(const WorkflowConfig& c, std::string_view knob);
/// Names referenced by a knob expression.
std::vector<std::string> knob_names(std::string_view knob);

/// Tasks a tunable applies to: matching category, or matching name.
std::vector<std::size_t> tunable_tasks(const WorkflowSpec& spec, const Tunable& t);

/// Grows or shrinks a phased spec by repeating the last phase's pattern
/// (tasks and the edges into them). ShapeMismatch when there is no pattern.
WorkflowSpec reshape_phases(const WorkflowSpec& spec, int phases);

}  // namespace wfmini
