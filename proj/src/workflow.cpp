#include "wfmini/workflow.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <functional>
#include <mutex>
#include <set>
#include <thread>

#include "wfmini/error.hpp"

namespace wfmini {

using nlohmann::json;

std::string_view to_string(ExecutionModel m) noexcept {
  switch (m) {
    case ExecutionModel::serial: return "serial";
    case ExecutionModel::parallel: return "parallel";
    case ExecutionModel::sync: return "sync";
    case ExecutionModel::async: return "async";
  }
  return "parallel";
}

ExecutionModel parse_execution_model(std::string_view s) {
  if (s == "serial") return ExecutionModel::serial;
  if (s == "parallel") return ExecutionModel::parallel;
  if (s == "sync") return ExecutionModel::sync;
  if (s == "async") return ExecutionModel::async;
  throw Error(ErrorCode::SchemaError, "unknown execution_model '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// config

void validate_config(const WorkflowConfig& c) {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::SchemaError, "config: " + what); };
  if (c.num_nodes < 1) bad("num_nodes must be >= 1");
  if (c.num_cpus < 1) bad("num_cpus must be >= 1");
  if (c.num_gpus < 0) bad("num_gpus must be >= 0");
  if (c.epochs < 1) bad("epochs must be >= 1");
  if (!(c.data_scale > 0)) bad("data_scale must be > 0");
  if (c.phases < 1) bad("phases must be >= 1");
  if (c.steps < 1) bad("steps must be >= 1");
  for (const auto& [cat, n] : c.ranks)
    if (n < 1) bad("ranks." + cat + " must be >= 1");
}

WorkflowConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::SchemaError, "config must be an object");
  WorkflowConfig c;
  try {
    c.num_nodes = doc.value("num_nodes", 1);
    c.num_cpus = doc.value("num_cpus", 1);
    c.num_gpus = doc.value("num_gpus", 0);
    c.epochs = doc.value("epochs", 1);
    c.data_scale = doc.value("data_scale", 1.0);
    c.phases = doc.value("phases", 1);
    c.steps = doc.value("steps", 1);
    if (doc.contains("ranks"))
      for (const auto& [k, v] : doc.at("ranks").items()) c.ranks[k] = v.get<int>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("config: ") + e.what());
  }
  validate_config(c);
  return c;
}

json to_json(const WorkflowConfig& c) {
  json ranks = json::object();
  for (const auto& [k, v] : c.ranks) ranks[k] = v;
  return {{"num_nodes", c.num_nodes}, {"num_cpus", c.num_cpus}, {"num_gpus", c.num_gpus},
          {"ranks", ranks},           {"epochs", c.epochs},     {"data_scale", c.data_scale},
          {"phases", c.phases},       {"steps", c.steps}};
}

// ---------------------------------------------------------------------------
// spec

const TaskSpec& WorkflowSpec::task(std::string_view name) const {
  for (const auto& t : tasks)
    if (t.name == name) return t;
  throw Error(ErrorCode::UnknownTaskReference, "no task named '" + std::string(name) + "'");
}

std::vector<std::string> WorkflowSpec::predecessors(std::string_view name) const {
  std::vector<std::string> out;
  for (const auto& [p, s] : edges)
    if (s == name) out.push_back(p);
  return out;
}

namespace {

struct Graph {
  std::vector<std::vector<std::size_t>> succ;  // sorted, deduplicated
  std::vector<std::vector<std::size_t>> pred;
};

Graph build_graph(const WorkflowSpec& spec) {
  std::map<std::string, std::size_t, std::less<>> index;
  for (std::size_t i = 0; i < spec.tasks.size(); ++i) {
    const auto& name = spec.tasks[i].name;
    if (name.empty()) throw Error(ErrorCode::SchemaError, "task with empty name");
    if (!index.emplace(name, i).second) throw Error(ErrorCode::SchemaError, "duplicate task name '" + name + "'");
  }
  Graph g;
  g.succ.resize(spec.tasks.size());
  g.pred.resize(spec.tasks.size());
  for (const auto& [p, s] : spec.edges) {
    auto pi = index.find(p);
    auto si = index.find(s);
    if (pi == index.end()) throw Error(ErrorCode::UnknownTaskReference, "edge references undeclared task '" + p + "'");
    if (si == index.end()) throw Error(ErrorCode::UnknownTaskReference, "edge references undeclared task '" + s + "'");
    g.succ[pi->second].push_back(si->second);
    g.pred[si->second].push_back(pi->second);
  }
  for (auto* adj : {&g.succ, &g.pred}) {
    for (auto& v : *adj) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
  }
  return g;
}

void check_acyclic(const WorkflowSpec& spec, const Graph& g) {
  enum Color { white, grey, black };
  std::vector<Color> color(spec.tasks.size(), white);
  std::vector<std::size_t> stack;
  std::function<void(std::size_t)> visit = [&](std::size_t u) {
    color[u] = grey;
    stack.push_back(u);
    for (auto v : g.succ[u]) {
      if (color[v] == grey) {
        auto it = std::find(stack.begin(), stack.end(), v);
        std::string cycle;
        for (; it != stack.end(); ++it) cycle += spec.tasks[*it].name + " -> ";
        cycle += spec.tasks[v].name;
        throw Error(ErrorCode::CycleDetected, "cycle: " + cycle);
      }
      if (color[v] == white) visit(v);
    }
    stack.pop_back();
    color[u] = black;
  };
  for (std::size_t i = 0; i < spec.tasks.size(); ++i)
    if (color[i] == white) visit(i);
}

std::vector<std::size_t> topo_indices(const Graph& g) {
  const auto n = g.succ.size();
  std::vector<std::size_t> indeg(n);
  for (std::size_t i = 0; i < n; ++i) indeg[i] = g.pred[i].size();
  std::set<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indeg[i] == 0) ready.insert(i);
  std::vector<std::size_t> order;
  while (!ready.empty()) {
    const auto u = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(u);
    for (auto v : g.succ[u])
      if (--indeg[v] == 0) ready.insert(v);
  }
  return order;
}

}  // namespace

void validate_dag(const WorkflowSpec& spec) {
  check_acyclic(spec, build_graph(spec));
}

std::vector<std::string> topological_order(const WorkflowSpec& spec) {
  const auto g = build_graph(spec);
  check_acyclic(spec, g);
  std::vector<std::string> out;
  for (auto i : topo_indices(g)) out.push_back(spec.tasks[i].name);
  return out;
}

WorkflowSpec load_workflow(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::SchemaError, "workflow must be an object");
  WorkflowSpec spec;
  try {
    spec.execution_model = parse_execution_model(doc.value("execution_model", "parallel"));
    spec.phases = doc.value("phases", 1);
    if (!doc.contains("tasks") || !doc.at("tasks").is_array() || doc.at("tasks").empty())
      throw Error(ErrorCode::SchemaError, "workflow needs a non-empty tasks array");
    for (const auto& t : doc.at("tasks")) spec.tasks.push_back(parse_task_spec(t));
    if (doc.contains("edges")) {
      for (const auto& e : doc.at("edges")) {
        if (!e.is_array() || e.size() != 2) throw Error(ErrorCode::SchemaError, "edges must be [pred, succ] pairs");
        spec.edges.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
      }
    }
    if (doc.contains("config")) spec.config = config_from_json(doc.at("config"));
    if (doc.contains("tunables")) {
      for (const auto& t : doc.at("tunables")) {
        Tunable tu;
        tu.target = t.at("target").get<std::string>();
        tu.path = t.at("path").get<std::string>();
        tu.metric = t.value("metric", "makespan");
        tu.knob = t.value("knob", "");
        if (tu.metric != "makespan" && tu.metric != "read_bytes" && tu.metric != "write_bytes" && tu.metric != "none")
          throw Error(ErrorCode::SchemaError, "tunable metric '" + tu.metric + "' unknown");
        spec.tunables.push_back(std::move(tu));
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("workflow: ") + e.what());
  }
  if (spec.phases < 1) throw Error(ErrorCode::SchemaError, "phases must be >= 1");
  validate_dag(spec);
  return spec;
}

WorkflowSpec load_workflow_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::SchemaError, "cannot open workflow " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, path.string() + ": " + e.what());
  }
  return load_workflow(doc);
}

json to_json(const WorkflowSpec& spec) {
  json tasks = json::array();
  for (const auto& t : spec.tasks) tasks.push_back(to_json(t));
  json edges = json::array();
  for (const auto& [p, s] : spec.edges) edges.push_back({p, s});
  json doc{{"execution_model", to_string(spec.execution_model)},
           {"phases", spec.phases},
           {"tasks", tasks},
           {"edges", edges}};
  if (spec.config) doc["config"] = to_json(*spec.config);
  if (!spec.tunables.empty()) {
    json tun = json::array();
    for (const auto& t : spec.tunables)
      tun.push_back({{"target", t.target}, {"path", t.path}, {"metric", t.metric}, {"knob", t.knob}});
    doc["tunables"] = tun;
  }
  return doc;
}

// ---------------------------------------------------------------------------
// execution

namespace {

std::string fresh_run_id(std::uint64_t seed) {
  static std::atomic<std::uint64_t> counter{0};
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::system_clock::now().time_since_epoch())
                      .count();
  return "run-" + std::to_string(ms) + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + "-s" +
         std::to_string(seed);
}

struct Completion {
  std::size_t task;
  std::exception_ptr error;
};

}  // namespace

RunTrace execute(const WorkflowSpec& spec, const ResourcePool& pool, const ExecOptions& options) {
  const auto g = build_graph(spec);
  check_acyclic(spec, g);
  const auto n = spec.tasks.size();

  std::vector<int> need_cpu(n), need_gpu(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = spec.tasks[i];
    need_cpu[i] = t.num_ranks * t.cpus_per_rank;
    need_gpu[i] = t.num_ranks * t.gpus_per_rank;
    if (need_cpu[i] > pool.total_cpus() || need_gpu[i] > pool.total_gpus())
      throw Error(ErrorCode::InsufficientPool, "task '" + t.name + "' needs " + std::to_string(need_cpu[i]) +
                                                   " cpus and " + std::to_string(need_gpu[i]) +
                                                   " gpus; pool has " + std::to_string(pool.total_cpus()) + "/" +
                                                   std::to_string(pool.total_gpus()));
  }

  RunTrace trace;
  trace.run_id = options.run_id.empty() ? fresh_run_id(options.seed) : options.run_id;
  trace.pool = pool;

  const auto root = options.scratch_root.empty() ? ScratchSpace::default_root() : options.scratch_root;
  ScratchSpace scratch(root / trace.run_id);
  TaskEnvironment env{&scratch, options.runtime};

  MetricsSink sink;
  std::vector<bool> busy(pool.slots().size(), false);
  std::vector<SlotAssignment> held(n);
  std::vector<std::size_t> waiting(n);
  for (std::size_t i = 0; i < n; ++i) waiting[i] = g.pred[i].size();

  std::vector<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (waiting[i] == 0) ready.push_back(i);

  std::mutex mu;
  std::condition_variable cv;
  std::deque<Completion> done;
  std::vector<std::jthread> workers;
  workers.reserve(n);

  const std::size_t max_running = spec.execution_model == ExecutionModel::serial ? 1 : n;
  std::size_t running = 0;
  std::size_t finished = 0;
  std::string failure;

  auto try_assign = [&](std::size_t i) -> std::optional<SlotAssignment> {
    SlotAssignment a;
    for (const auto& s : pool.slots()) {
      if (busy[static_cast<std::size_t>(s.id)]) continue;
      if (s.kind == SlotKind::cpu && static_cast<int>(a.cpu_slots.size()) < need_cpu[i]) a.cpu_slots.push_back(s.id);
      if (s.kind == SlotKind::gpu && static_cast<int>(a.gpu_slots.size()) < need_gpu[i]) a.gpu_slots.push_back(s.id);
    }
    if (static_cast<int>(a.cpu_slots.size()) < need_cpu[i] || static_cast<int>(a.gpu_slots.size()) < need_gpu[i])
      return std::nullopt;
    return a;
  };

  while (finished < n) {
    if (failure.empty()) {
      for (auto it = ready.begin(); it != ready.end() && running < max_running;) {
        const auto i = *it;
        auto a = try_assign(i);
        if (!a) {
          ++it;
          continue;
        }
        for (int s : a->cpu_slots) busy[static_cast<std::size_t>(s)] = true;
        for (int s : a->gpu_slots) busy[static_cast<std::size_t>(s)] = true;
        held[i] = *a;
        ++running;
        it = ready.erase(it);
        workers.emplace_back([&, i, a = *a] {
          std::exception_ptr err;
          try {
            run_task(spec.tasks[i], a, sink, options.seed, env);
          } catch (...) {
            err = std::current_exception();
          }
          {
            std::lock_guard lk(mu);
            done.push_back({i, err});
          }
          cv.notify_one();
        });
      }
    }
    if (running == 0) break;  // only after a failure: nothing left to wait for

    Completion c;
    {
      std::unique_lock lk(mu);
      cv.wait(lk, [&] { return !done.empty(); });
      c = done.front();
      done.pop_front();
    }
    --running;
    ++finished;
    for (int s : held[c.task].cpu_slots) busy[static_cast<std::size_t>(s)] = false;
    for (int s : held[c.task].gpu_slots) busy[static_cast<std::size_t>(s)] = false;
    if (c.error) {
      if (failure.empty()) {
        try {
          std::rethrow_exception(c.error);
        } catch (const std::exception& e) {
          failure = e.what();
        }
      }
      continue;
    }
    for (auto v : g.succ[c.task])
      if (--waiting[v] == 0) ready.push_back(v);
  }
  workers.clear();

  if (!options.keep_scratch) scratch.remove_all();
  if (!failure.empty()) throw Error(ErrorCode::TaskFailed, failure);

  trace.events = sink.events();
  std::stable_sort(trace.events.begin(), trace.events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
  trace.records = sink.records();
  return trace;
}

// ---------------------------------------------------------------------------
// analysis

double critical_path(const WorkflowSpec& spec, const std::map<std::string, double, std::less<>>& durations) {
  const auto g = build_graph(spec);
  check_acyclic(spec, g);
  std::vector<double> finish(spec.tasks.size(), 0.0);
  double best = 0.0;
  for (auto i : topo_indices(g)) {
    auto it = durations.find(spec.tasks[i].name);
    if (it == durations.end())
      throw Error(ErrorCode::PreconditionFailed, "no duration for task '" + spec.tasks[i].name + "'");
    double start = 0.0;
    for (auto p : g.pred[i]) start = std::max(start, finish[p]);
    finish[i] = start + it->second;
    best = std::max(best, finish[i]);
  }
  return best;
}

WorkflowSpec async_overlap(const WorkflowSpec& spec) {
  validate_dag(spec);
  int max_phase = 0;
  for (const auto& t : spec.tasks) max_phase = std::max(max_phase, t.phase);
  if (max_phase <= 1) return spec;

  auto mismatch = [](const std::string& why) { throw Error(ErrorCode::ShapeMismatch, why); };
  const std::set<std::string, std::less<>> roles{"sim", "train", "select", "agent"};
  std::map<int, std::vector<std::string>> sims;
  std::map<int, std::string> train, agent;
  std::map<std::string, const TaskSpec*, std::less<>> by_name;
  for (const auto& t : spec.tasks) {
    by_name[t.name] = &t;
    if (t.phase < 1) mismatch("task '" + t.name + "' has no phase");
    if (!roles.contains(t.category)) mismatch("task '" + t.name + "' has category '" + t.category + "'");
    if (t.category == "sim") sims[t.phase].push_back(t.name);
    auto single = [&](std::map<int, std::string>& m) {
      if (!m.emplace(t.phase, t.name).second) mismatch("phase " + std::to_string(t.phase) + " has two " + t.category);
    };
    if (t.category == "train") single(train);
    if (t.category == "agent") single(agent);
  }
  for (int p = 1; p <= max_phase; ++p) {
    if (sims[p].empty() || !train.contains(p) || !agent.contains(p))
      mismatch("phase " + std::to_string(p) + " lacks sim, train or agent tasks");
  }

  WorkflowSpec out = spec;
  out.execution_model = ExecutionModel::async;
  std::vector<std::pair<std::string, std::string>> edges;
  for (const auto& e : spec.edges) {
    const auto* p = by_name.at(e.first);
    const auto* s = by_name.at(e.second);
    if (s->category == "sim" && s->phase == p->phase + 1) continue;
    edges.push_back(e);
  }
  auto add = [&](const std::string& a, const std::string& b) {
    if (std::find(edges.begin(), edges.end(), std::pair{a, b}) == edges.end()) edges.emplace_back(a, b);
  };
  for (int p = 1; p < max_phase; ++p) {
    const auto& cur = sims[p];
    const auto& next = sims[p + 1];
    for (std::size_t j = 0; j < next.size(); ++j) {
      add(cur[std::min(j, cur.size() - 1)], next[j]);
      if (p >= 2) add(agent[p - 1], next[j]);
    }
    add(train[p], train[p + 1]);
  }
  out.edges = std::move(edges);
  validate_dag(out);
  return out;
}

}  // namespace wfmini
