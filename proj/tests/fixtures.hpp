#pragma once

#include <filesystem>
#include <string>

#include "wfmini/error.hpp"
#include "wfmini/workflow.hpp"

namespace fixture {

// A task whose duration is set by a modeled device copy, so it barely touches
// the CPU and many of them can run side by side on a small machine.
inline wfmini::TaskSpec timed(const std::string& name, double seconds, int ranks = 1, const std::string& cat = "task",
                              std::int64_t write_bytes = 0) {
  wfmini::TaskSpec t;
  t.name = name;
  t.category = cat;
  t.num_ranks = ranks;
  t.program.push_back(wfmini::ProgramStep::call(wfmini::KernelCall(
      "dataCopyH2D", {{"data_size", static_cast<std::int64_t>(seconds * 1e6)}, {"bandwidth", 1e6}})));
  if (write_bytes > 0)
    t.program.push_back(
        wfmini::ProgramStep::call(wfmini::KernelCall("writeNonMPI", {{"data_size", write_bytes}})));
  return t;
}

inline wfmini::ExecOptions options(std::uint64_t seed = 1) {
  wfmini::ExecOptions o;
  o.seed = seed;
  o.scratch_root = std::filesystem::temp_directory_path() / "wfmini-test-runs";
  return o;
}

template <class F>
wfmini::ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const wfmini::Error& e) {
    return e.code();
  }
  return wfmini::ErrorCode::KernelFailure;  // sentinel: nothing thrown
}

}  // namespace fixture

#include <algorithm>
#include <map>
#include <random>
#include <vector>

namespace fixture {

// Random DAG by topological construction: edges only go from lower to higher index.
inline wfmini::WorkflowSpec random_dag(std::mt19937_64& rng, int max_tasks, int max_ranks) {
  std::uniform_int_distribution<int> count(1, max_tasks);
  std::uniform_int_distribution<int> ranks(1, max_ranks);
  std::uniform_real_distribution<double> dur(0.0, 0.03);
  std::bernoulli_distribution coin(0.5);
  const int n = count(rng);
  const double density = std::uniform_real_distribution<double>(0.0, 0.3)(rng);
  std::bernoulli_distribution link(density);
  wfmini::WorkflowSpec spec;
  spec.execution_model = coin(rng) ? wfmini::ExecutionModel::parallel : wfmini::ExecutionModel::sync;
  for (int i = 0; i < n; ++i) spec.tasks.push_back(timed("t" + std::to_string(i), dur(rng), ranks(rng)));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (link(rng)) spec.edges.emplace_back("t" + std::to_string(i), "t" + std::to_string(j));
  return spec;
}

struct Violations {
  int dependency = 0;
  int exclusivity = 0;
  int critical_path = 0;
  int missing = 0;
  int total() const { return dependency + exclusivity + critical_path + missing; }
};

inline double makespan(const wfmini::RunTrace& trace) {
  double lo = 1e300, hi = -1e300;
  for (const auto& r : trace.records) {
    lo = std::min(lo, r.start);
    hi = std::max(hi, r.end);
  }
  return trace.records.empty() ? 0.0 : hi - lo;
}

inline Violations check_trace(const wfmini::WorkflowSpec& spec, const wfmini::RunTrace& trace) {
  Violations v;
  std::map<std::string, const wfmini::TaskRecord*, std::less<>> rec;
  for (const auto& r : trace.records) rec[r.task_name] = &r;
  for (const auto& t : spec.tasks) v.missing += rec.contains(t.name) ? 0 : 1;
  if (v.missing) return v;
  for (const auto& [p, s] : spec.edges)
    if (rec.at(s)->start < rec.at(p)->end) ++v.dependency;
  std::map<int, std::vector<std::pair<double, double>>> slots;
  for (const auto& r : trace.records)
    for (int s : r.slots_used) slots[s].emplace_back(r.start, r.end);
  for (auto& [s, iv] : slots) {
    std::sort(iv.begin(), iv.end());
    for (std::size_t i = 1; i < iv.size(); ++i)
      if (iv[i].first < iv[i - 1].second) ++v.exclusivity;
  }
  std::map<std::string, double, std::less<>> d;
  for (const auto& r : trace.records) d[r.task_name] = r.duration();
  if (makespan(trace) + 1e-9 < wfmini::critical_path(spec, d)) ++v.critical_path;
  return v;
}

}  // namespace fixture
