#include "wfmini/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "wfmini/error.hpp"

namespace wfmini {

using nlohmann::json;

namespace {

constexpr double kGB = 1e9;

double first_start(const RunTrace& trace) {
  double t = std::numeric_limits<double>::infinity();
  for (const auto& r : trace.records) t = std::min(t, r.start);
  return t;
}

void require_records(const RunTrace& trace) {
  if (trace.records.empty()) throw Error(ErrorCode::EmptyTrace, "trace has no task records");
}

// Length of the union of a category's task intervals.
double busy_span(const RunTrace& trace, std::string_view category) {
  std::vector<std::pair<double, double>> iv;
  for (const auto& r : trace.records)
    if (r.category == category) iv.emplace_back(r.start, r.end);
  std::sort(iv.begin(), iv.end());
  double total = 0, lo = 0, hi = -std::numeric_limits<double>::infinity();
  for (const auto& [a, b] : iv) {
    if (a > hi) {
      if (hi > lo) total += hi - lo;
      lo = a;
      hi = b;
    } else {
      hi = std::max(hi, b);
    }
  }
  if (hi > lo) total += hi - lo;
  return total;
}

}  // namespace

// ---------------------------------------------------------------------------
// timelines

std::vector<SlotTimeline> utilization_timeline(const RunTrace& trace) {
  require_records(trace);
  const double t0 = first_start(trace);
  std::vector<SlotTimeline> out;
  if (!trace.pool.slots().empty()) {
    for (const auto& s : trace.pool.slots()) out.push_back({s.id, s.label(), {}});
  } else {
    int max_id = -1;
    for (const auto& r : trace.records)
      for (int s : r.slots_used) max_id = std::max(max_id, s);
    for (int i = 0; i <= max_id; ++i) out.push_back({i, "slot" + std::to_string(i), {}});
  }
  for (const auto& r : trace.records) {
    for (int s : r.slots_used) {
      if (s < 0 || static_cast<std::size_t>(s) >= out.size())
        throw Error(ErrorCode::SchemaError, "record of '" + r.task_name + "' names slot " + std::to_string(s));
      out[static_cast<std::size_t>(s)].intervals.push_back({r.start - t0, r.end - t0, r.task_name});
    }
  }
  for (auto& tl : out)
    std::sort(tl.intervals.begin(), tl.intervals.end(),
              [](const BusyInterval& a, const BusyInterval& b) { return a.start < b.start; });
  return out;
}

std::vector<IoSegment> io_timeline(const RunTrace& trace) {
  require_records(trace);
  const double t0 = first_start(trace);
  std::vector<IoSegment> out;
  for (const auto& r : trace.records)
    out.push_back({r.task_name, r.start - t0, r.end - t0, r.bytes_read, r.bytes_written});
  std::stable_sort(out.begin(), out.end(), [](const IoSegment& a, const IoSegment& b) { return a.start < b.start; });
  return out;
}

// ---------------------------------------------------------------------------
// summary

MetricsSummary summarize(const RunTrace& trace) {
  require_records(trace);
  MetricsSummary s;
  double t0 = std::numeric_limits<double>::infinity(), t1 = -t0;
  for (const auto& r : trace.records) {
    t0 = std::min(t0, r.start);
    t1 = std::max(t1, r.end);
    s.read_bytes += r.bytes_read;
    s.write_bytes += r.bytes_written;
    auto& task = s.per_task[r.task_name];
    task.makespan += r.duration();
    task.read_bytes += r.bytes_read;
    task.write_bytes += r.bytes_written;
    task.num_ranks = r.ranks;
    auto& cat = s.per_category[r.category];
    cat.read_bytes += r.bytes_read;
    cat.write_bytes += r.bytes_written;
    cat.num_ranks = std::max(cat.num_ranks, r.ranks);
  }
  s.makespan = t1 - t0;
  for (auto& [name, cat] : s.per_category) cat.makespan = busy_span(trace, name);

  double cpu_busy = 0, gpu_busy = 0;
  int cpu_slots = 0, gpu_slots = 0;
  for (const auto& tl : utilization_timeline(trace)) {
    const bool gpu = !trace.pool.slots().empty() && trace.pool.slot(tl.slot).kind == SlotKind::gpu;
    (gpu ? gpu_slots : cpu_slots) += 1;
    for (const auto& iv : tl.intervals) (gpu ? gpu_busy : cpu_busy) += iv.end - iv.start;
  }
  auto pct = [&](double busy, int slots) {
    if (slots == 0 || s.makespan <= 0) return 0.0;
    return std::clamp(100.0 * busy / (s.makespan * slots), 0.0, 100.0);
  };
  s.cpu_util_pct = pct(cpu_busy, cpu_slots);
  s.gpu_util_pct = pct(gpu_busy, gpu_slots);
  return s;
}

namespace {

json metrics_json(const TaskMetrics& m) {
  return {{"makespan_s", m.makespan},
          {"read_bytes", m.read_bytes},
          {"write_bytes", m.write_bytes},
          {"num_ranks", m.num_ranks}};
}

TaskMetrics metrics_from_json(const json& j) {
  TaskMetrics m;
  m.makespan = j.at("makespan_s").get<double>();
  m.read_bytes = j.value("read_bytes", std::uint64_t{0});
  m.write_bytes = j.value("write_bytes", std::uint64_t{0});
  m.num_ranks = j.value("num_ranks", 0);
  return m;
}

}  // namespace

json to_json(const MetricsSummary& s) {
  json tasks = json::object(), cats = json::object();
  for (const auto& [k, v] : s.per_task) tasks[k] = metrics_json(v);
  for (const auto& [k, v] : s.per_category) cats[k] = metrics_json(v);
  return {{"makespan_s", s.makespan},
          {"cpu_util_pct", s.cpu_util_pct},
          {"gpu_util_pct", s.gpu_util_pct},
          {"read_bytes", s.read_bytes},
          {"write_bytes", s.write_bytes},
          {"read_gb", static_cast<double>(s.read_bytes) / kGB},
          {"write_gb", static_cast<double>(s.write_bytes) / kGB},
          {"per_task", tasks},
          {"per_category", cats}};
}

MetricsSummary summary_from_json(const json& j) {
  try {
    MetricsSummary s;
    s.makespan = j.at("makespan_s").get<double>();
    s.cpu_util_pct = j.value("cpu_util_pct", 0.0);
    s.gpu_util_pct = j.value("gpu_util_pct", 0.0);
    s.read_bytes = j.value("read_bytes", std::uint64_t{0});
    s.write_bytes = j.value("write_bytes", std::uint64_t{0});
    if (j.contains("per_task"))
      for (const auto& [k, v] : j.at("per_task").items()) s.per_task[k] = metrics_from_json(v);
    if (j.contains("per_category"))
      for (const auto& [k, v] : j.at("per_category").items()) s.per_category[k] = metrics_from_json(v);
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("summary: ") + e.what());
  }
}

MetricsSummary read_summary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::SchemaError, "cannot open summary " + path.string());
  try {
    return summary_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// ratios

RatioReport compute_ratios(const std::vector<MetricsSummary>& original, const std::vector<MetricsSummary>& mini,
                           double tolerance) {
  if (original.size() != mini.size() || original.empty())
    throw Error(ErrorCode::LengthMismatch, "need the same non-zero number of original (" +
                                               std::to_string(original.size()) + ") and mini (" +
                                               std::to_string(mini.size()) + ") summaries");
  auto ratio = [](double mini_v, double orig_v, const char* what, std::size_t i) {
    if (orig_v == 0.0) {
      if (mini_v == 0.0) return 1.0;
      throw Error(ErrorCode::ZeroDenominator, std::string("original ") + what + " is zero in config " +
                                                  std::to_string(i + 1));
    }
    return mini_v / orig_v;
  };
  RatioReport rep;
  rep.tolerance = tolerance;
  for (std::size_t i = 0; i < original.size(); ++i) {
    if (original[i].makespan <= 0.0)
      throw Error(ErrorCode::ZeroDenominator, "original makespan is zero in config " + std::to_string(i + 1));
    rep.per_config.push_back({mini[i].makespan / original[i].makespan,
                              ratio(static_cast<double>(mini[i].read_bytes),
                                    static_cast<double>(original[i].read_bytes), "read", i),
                              ratio(static_cast<double>(mini[i].write_bytes),
                                    static_cast<double>(original[i].write_bytes), "write", i)});
  }
  auto spread = [&](double Ratios::*f) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    for (const auto& r : rep.per_config) {
      lo = std::min(lo, r.*f);
      hi = std::max(hi, r.*f);
    }
    return lo > 0 ? hi / lo : std::numeric_limits<double>::infinity();
  };
  rep.spread_time = spread(&Ratios::r_time);
  rep.spread_read = spread(&Ratios::r_read);
  rep.spread_write = spread(&Ratios::r_write);
  rep.constant = rep.spread_time <= tolerance && rep.spread_read <= tolerance && rep.spread_write <= tolerance;
  return rep;
}

json to_json(const RatioReport& r) {
  json per = json::array();
  for (const auto& c : r.per_config) per.push_back({{"r_time", c.r_time}, {"r_read", c.r_read}, {"r_write", c.r_write}});
  return {{"per_config", per},
          {"spread", {{"time", r.spread_time}, {"read", r.spread_read}, {"write", r.spread_write}}},
          {"tolerance", r.tolerance},
          {"constant", r.constant}};
}

// ---------------------------------------------------------------------------
// variation

std::string Stat::formatted(int precision) const {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.*g \xC2\xB1 %.*g", precision, mean, precision, std);
  return buf;
}

Stat describe(const std::vector<double>& values) {
  if (values.size() < 2) throw Error(ErrorCode::InsufficientSamples, "need at least two samples");
  // sorted so the result does not depend on input order
  auto v = values;
  std::sort(v.begin(), v.end());
  const auto n = static_cast<double>(v.size());
  double mean = 0;
  for (double x : v) mean += x;
  mean /= n;
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  Stat s;
  s.mean = mean;
  s.std = std::sqrt(ss / (n - 1));
  s.cv = mean != 0 ? s.std / std::abs(mean) : 0.0;
  return s;
}

VariationReport reproducibility_stats(const std::vector<MetricsSummary>& summaries) {
  if (summaries.size() < 2)
    throw Error(ErrorCode::InsufficientSamples, "reproducibility needs at least two runs, got " +
                                                    std::to_string(summaries.size()));
  VariationReport rep;
  rep.samples = summaries.size();
  auto collect = [&](auto get) {
    std::vector<double> v;
    for (const auto& s : summaries) v.push_back(get(s));
    return describe(v);
  };
  rep.per_metric["makespan_s"] = collect([](const MetricsSummary& s) { return s.makespan; });
  rep.per_metric["read_bytes"] = collect([](const MetricsSummary& s) { return static_cast<double>(s.read_bytes); });
  rep.per_metric["write_bytes"] = collect([](const MetricsSummary& s) { return static_cast<double>(s.write_bytes); });
  rep.per_metric["cpu_util_pct"] = collect([](const MetricsSummary& s) { return s.cpu_util_pct; });
  rep.per_metric["gpu_util_pct"] = collect([](const MetricsSummary& s) { return s.gpu_util_pct; });
  for (const auto& [cat, m] : summaries.front().per_category) {
    std::vector<double> v;
    for (const auto& s : summaries) {
      auto it = s.per_category.find(cat);
      v.push_back(it == s.per_category.end() ? 0.0 : it->second.makespan);
    }
    rep.per_stage[cat] = describe(v);
  }
  return rep;
}

json to_json(const VariationReport& r) {
  auto stat = [](const Stat& s) {
    return json{{"mean", s.mean}, {"std", s.std}, {"cv", s.cv}, {"formatted", s.formatted()}};
  };
  json metrics = json::object(), stages = json::object();
  for (const auto& [k, v] : r.per_metric) metrics[k] = stat(v);
  for (const auto& [k, v] : r.per_stage) stages[k] = stat(v);
  return {{"samples", r.samples}, {"per_metric", metrics}, {"per_stage", stages}};
}

}  // namespace wfmini
