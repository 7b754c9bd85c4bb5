#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "wfmini/resources.hpp"
#include "wfmini/workflow.hpp"

namespace wfmini {

enum class Family { inverse_problem, deepdrivemd };
enum class Model { serial_cpu, serial_cpu_gpu, parallel_cpu, sync, async };

std::string_view to_string(Family f) noexcept;
std::string_view to_string(Model m) noexcept;

inline constexpr double kDefaultDeskScale = 0.02;

struct ExemplarId {
  Family family = Family::inverse_problem;
  Model model = Model::serial_cpu;
  int config = 1;  // V1..V3
  double desk_scale = kDefaultDeskScale;
};

/// "ip:serial_cpu:V1", "ddmd:async:V2" (long family names accepted too).
/// InvalidExemplar on anything else.
ExemplarId parse_exemplar_id(std::string_view selector, double desk_scale = kDefaultDeskScale);
std::string to_string(const ExemplarId& id);

/// InvalidExemplar for model/family mismatches, ddmd V3, config outside 1..3,
/// or a non-positive scale.
void validate_exemplar(const ExemplarId& id);

struct ExemplarOptions {
  std::optional<int> train_ranks;  // overrides the scaled ml rank count
};

/// Configuration of the original workflow behind an exemplar (Table 2 rows).
WorkflowConfig original_config(Family family, Model model, int config);

WorkflowSpec inverse_problem_spec(Model model, int config, double desk_scale, const ExemplarOptions& opts = {});
WorkflowSpec deep_drive_md_spec(Model model, int config, double desk_scale, const ExemplarOptions& opts = {});
WorkflowSpec exemplar_spec(const ExemplarId& id, const ExemplarOptions& opts = {});

/// Pool shaped after the Table 2 node counts, sized so every task fits and
/// the overlapping models can actually overlap.
ResourcePool exemplar_pool(const ExemplarId& id, const WorkflowSpec& spec);

/// Ranks after desk scaling: round(ranks * scale), at least 1.
int scaled_ranks(int ranks, double desk_scale);

}  // namespace wfmini
