#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "wfmini/trace.hpp"

namespace wfmini {

struct TaskMetrics {
  double makespan = 0.0;  // seconds; for a category, the time any of its tasks was running
  std::uint64_t read_bytes = 0;
  std::uint64_t write_bytes = 0;
  int num_ranks = 0;

  friend bool operator==(const TaskMetrics&, const TaskMetrics&) = default;
};

struct MetricsSummary {
  double makespan = 0.0;
  double cpu_util_pct = 0.0;
  double gpu_util_pct = 0.0;
  std::uint64_t read_bytes = 0;
  std::uint64_t write_bytes = 0;
  std::map<std::string, TaskMetrics, std::less<>> per_task;
  std::map<std::string, TaskMetrics, std::less<>> per_category;

  friend bool operator==(const MetricsSummary&, const MetricsSummary&) = default;
};

/// EmptyTrace when the trace has no records.
MetricsSummary summarize(const RunTrace& trace);

nlohmann::json to_json(const MetricsSummary& s);
MetricsSummary summary_from_json(const nlohmann::json& j);  // SchemaError
MetricsSummary read_summary(const std::filesystem::path& path);

struct BusyInterval {
  double start = 0.0;  // seconds since the first task start
  double end = 0.0;
  std::string task;
};

struct SlotTimeline {
  int slot = 0;
  std::string label;  // cpu3, gpu0, ...
  std::vector<BusyInterval> intervals;
};

/// One entry per pool slot (idle slots have no intervals), in slot id order.
std::vector<SlotTimeline> utilization_timeline(const RunTrace& trace);

struct IoSegment {
  std::string task;
  double start = 0.0;
  double end = 0.0;
  std::uint64_t read_bytes = 0;
  std::uint64_t write_bytes = 0;
};

/// One segment per task, ordered by start.
std::vector<IoSegment> io_timeline(const RunTrace& trace);

struct Ratios {
  double r_time = 0.0;
  double r_read = 0.0;
  double r_write = 0.0;
};

struct RatioReport {
  std::vector<Ratios> per_config;
  double spread_time = 1.0;  // max / min across configs
  double spread_read = 1.0;
  double spread_write = 1.0;
  double tolerance = 1.15;
  bool constant = true;
};

inline constexpr double kRatioTolerance = 1.15;

/// mini / original per configuration. LengthMismatch, ZeroDenominator.
RatioReport compute_ratios(const std::vector<MetricsSummary>& original, const std::vector<MetricsSummary>& mini,
                           double tolerance = kRatioTolerance);
nlohmann::json to_json(const RatioReport& r);

struct Stat {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation
  double cv = 0.0;   // std / mean, 0 when mean is 0

  std::string formatted(int precision = 3) const;  // "57.2 ± 4.6"
};

Stat describe(const std::vector<double>& values);

struct VariationReport {
  std::size_t samples = 0;
  std::map<std::string, Stat, std::less<>> per_metric;  // makespan, read_bytes, write_bytes, cpu/gpu util
  std::map<std::string, Stat, std::less<>> per_stage;   // category makespan
};

/// InsufficientSamples below two summaries.
VariationReport reproducibility_stats(const std::vector<MetricsSummary>& summaries);
nlohmann::json to_json(const VariationReport& r);

// Exports for plots. Each writer returns the number of data rows or bands.
std::size_t write_utilization_csv(const std::vector<SlotTimeline>& tl, const std::filesystem::path& path);
std::size_t write_io_csv(const std::vector<IoSegment>& tl, bool reads, const std::filesystem::path& path);
std::size_t write_utilization_svg(const std::vector<SlotTimeline>& tl, double makespan,
                                  const std::filesystem::path& path);
std::size_t write_io_svg(const std::vector<IoSegment>& tl, double makespan, const std::filesystem::path& path);

}  // namespace wfmini
