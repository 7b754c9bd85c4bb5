#include <doctest.h>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace wfmini;
using fixture::code_of;
using nlohmann::json;

namespace {

json task_doc(const std::string& name) {
  return {{"name", name}, {"program", json::array({{{"kernel", "axpy"}, {"params", {{"data_size", 8}}}}})}};
}

// Inverse-problem style phases with the given edges rule.
WorkflowSpec ip_like(ExecutionModel model, int phases, double sim_s, double train_s) {
  WorkflowSpec spec;
  spec.execution_model = model;
  spec.phases = phases;
  for (int i = 1; i <= phases; ++i) {
    spec.tasks.push_back(fixture::timed("sim" + std::to_string(i), sim_s, 2, "sim"));
    spec.tasks.push_back(fixture::timed("train" + std::to_string(i), train_s, 1, "train"));
  }
  for (int i = 1; i <= phases; ++i) {
    const auto s = "sim" + std::to_string(i), t = "train" + std::to_string(i);
    spec.edges.emplace_back(s, t);
    if (i == 1) continue;
    const auto ps = "sim" + std::to_string(i - 1), pt = "train" + std::to_string(i - 1);
    if (model == ExecutionModel::serial) {
      spec.edges.emplace_back(pt, s);
    } else {
      spec.edges.emplace_back(pt, t);
      spec.edges.emplace_back(ps, s);
    }
  }
  return spec;
}

}  // namespace

TEST_CASE("load_workflow parses a serial chain") {
  json doc{{"execution_model", "serial"}, {"phases", 3}, {"tasks", json::array()}, {"edges", json::array()}};
  std::vector<std::string> chain;
  for (int i = 1; i <= 3; ++i) {
    chain.push_back("sim" + std::to_string(i));
    chain.push_back("train" + std::to_string(i));
  }
  for (const auto& n : chain) doc["tasks"].push_back(task_doc(n));
  for (std::size_t i = 1; i < chain.size(); ++i) doc["edges"].push_back({chain[i - 1], chain[i]});
  const auto spec = load_workflow(doc);
  CHECK(spec.tasks.size() == 6);
  CHECK(spec.edges.size() == 5);
  CHECK(spec.execution_model == ExecutionModel::serial);
  CHECK(load_workflow(to_json(spec)) == spec);
  CHECK(topological_order(spec) == chain);
}

TEST_CASE("load_workflow rejects bad documents") {
  json one{{"tasks", json::array({task_doc("a")})}};
  CHECK_NOTHROW(load_workflow(one));

  auto dangling = one;
  dangling["edges"] = json::array({json::array({"a", "ghost"})});
  CHECK(code_of([&] { load_workflow(dangling); }) == ErrorCode::UnknownTaskReference);

  auto dup = one;
  dup["tasks"].push_back(task_doc("a"));
  CHECK(code_of([&] { load_workflow(dup); }) == ErrorCode::SchemaError);

  auto model = one;
  model["execution_model"] = "eventually";
  CHECK(code_of([&] { load_workflow(model); }) == ErrorCode::SchemaError);

  CHECK(code_of([&] { load_workflow(json{{"tasks", json::array()}}); }) == ErrorCode::SchemaError);
  CHECK(code_of([&] { load_workflow(json::array()); }) == ErrorCode::SchemaError);
}

TEST_CASE("validate_dag reports a cycle") {
  WorkflowSpec spec;
  spec.tasks = {fixture::timed("A", 0), fixture::timed("B", 0), fixture::timed("C", 0)};
  spec.edges = {{"A", "B"}, {"B", "C"}};
  CHECK_NOTHROW(validate_dag(spec));
  spec.edges = {{"A", "B"}, {"B", "A"}};
  try {
    validate_dag(spec);
    FAIL("expected cycle");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CycleDetected);
    CHECK(std::string(e.what()).find("A -> B -> A") != std::string::npos);
  }
}

TEST_CASE("random topological DAGs validate") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) CHECK_NOTHROW(validate_dag(fixture::random_dag(rng, 50, 2)));
}

TEST_CASE("critical path") {
  WorkflowSpec chain;
  chain.tasks = {fixture::timed("a", 0), fixture::timed("b", 0), fixture::timed("c", 0)};
  chain.edges = {{"a", "b"}, {"b", "c"}};
  CHECK(critical_path(chain, {{"a", 2}, {"b", 3}, {"c", 2}}) == 7);
  chain.edges.clear();
  CHECK(critical_path(chain, {{"a", 2}, {"b", 3}, {"c", 2}}) == 3);
  CHECK(code_of([&] { critical_path(chain, {{"a", 2}}); }) == ErrorCode::PreconditionFailed);

  const auto par = ip_like(ExecutionModel::parallel, 3, 0, 0);
  std::map<std::string, double, std::less<>> unit;
  std::vector<std::string> names;
  for (const auto& t : par.tasks) {
    unit[t.name] = 1.0;
    names.push_back(t.name);
  }
  CHECK(critical_path(par, unit) == oracle::longest_path(names, par.edges, unit));

  std::mt19937_64 rng(8);
  for (int k = 0; k < 30; ++k) {
    const auto spec = fixture::random_dag(rng, 12, 1);
    std::map<std::string, double, std::less<>> d;
    std::vector<std::string> ns;
    for (const auto& t : spec.tasks) {
      d[t.name] = std::uniform_real_distribution<double>(0, 5)(rng);
      ns.push_back(t.name);
    }
    CHECK(oracle::close(critical_path(spec, d), oracle::longest_path(ns, spec.edges, d), 1e-12));
  }
}

TEST_CASE("serial execution never overlaps tasks") {
  const auto spec = ip_like(ExecutionModel::serial, 3, 0.02, 0.02);
  const auto trace = execute(spec, ResourcePool(1, 4, 0), fixture::options());
  CHECK(fixture::check_trace(spec, trace).total() == 0);
  for (int i = 1; i <= 3; ++i) {
    const auto s = trace.record("sim" + std::to_string(i));
    const auto t = trace.record("train" + std::to_string(i));
    CHECK(t.start >= s.end);
    if (i < 3) CHECK(trace.record("sim" + std::to_string(i + 1)).start >= t.end);
  }
  auto recs = trace.records;
  std::sort(recs.begin(), recs.end(), [](auto& a, auto& b) { return a.start < b.start; });
  for (std::size_t i = 1; i < recs.size(); ++i) CHECK(recs[i].start >= recs[i - 1].end);
}

TEST_CASE("serial model runs one task at a time even when slots are free") {
  WorkflowSpec spec;
  spec.execution_model = ExecutionModel::serial;
  spec.tasks = {fixture::timed("a", 0.05), fixture::timed("b", 0.05)};
  const auto trace = execute(spec, ResourcePool(1, 4, 0), fixture::options());
  CHECK(trace.record("b").start >= trace.record("a").end);
}

TEST_CASE("parallel execution overlaps the next simulation with training") {
  const auto spec = ip_like(ExecutionModel::parallel, 3, 0.05, 0.15);
  const auto trace = execute(spec, ResourcePool(1, 4, 0), fixture::options());
  CHECK(fixture::check_trace(spec, trace).total() == 0);
  bool overlap = false;
  for (int i = 1; i < 3; ++i) {
    const auto& t = trace.record("train" + std::to_string(i));
    overlap |= trace.record("sim" + std::to_string(i + 1)).start < t.end;
    CHECK(trace.record("train" + std::to_string(i + 1)).start >= t.end);
  }
  CHECK(overlap);
}

TEST_CASE("independent tasks finish in the longer duration") {
  WorkflowSpec spec;
  spec.tasks = {fixture::timed("two", 0.2), fixture::timed("three", 0.3)};
  const auto trace = execute(spec, ResourcePool(1, 2, 0), fixture::options());
  const double m = fixture::makespan(trace);
  CHECK(m >= 0.3);
  CHECK(m < 0.45);
}

TEST_CASE("ready tasks start in declaration order and later ones backfill") {
  WorkflowSpec spec;
  spec.tasks = {fixture::timed("wide", 0.05, 2), fixture::timed("narrow1", 0.05), fixture::timed("narrow2", 0.05)};
  const auto trace = execute(spec, ResourcePool(1, 3, 0), fixture::options());
  CHECK(trace.record("wide").slots_used == std::vector<int>{0, 1});
  CHECK(trace.record("narrow1").slots_used == std::vector<int>{2});
  const double next_free = std::min(trace.record("wide").end, trace.record("narrow1").end);
  CHECK(trace.record("narrow2").start >= next_free);
}

TEST_CASE("gpu tasks take gpu slots after their cpu slots") {
  WorkflowSpec spec;
  auto t = fixture::timed("g", 0.01, 2);
  t.gpus_per_rank = 1;
  spec.tasks = {t};
  const ResourcePool pool(2, 1, 1);  // slot ids: cpu0=0 gpu0=1 cpu1=2 gpu1=3
  const auto trace = execute(spec, pool, fixture::options());
  CHECK(trace.record("g").slots_used == std::vector<int>{0, 2, 1, 3});
}

TEST_CASE("execute errors") {
  WorkflowSpec spec;
  spec.tasks = {fixture::timed("big", 0.0, 5)};
  CHECK(code_of([&] { execute(spec, ResourcePool(1, 4, 0), fixture::options()); }) == ErrorCode::InsufficientPool);

  TaskSpec bad;
  bad.name = "bad";
  bad.program = {ProgramStep::call(KernelCall("testAlwaysFails"))};
  register_kernel(
      "testAlwaysFails", [](const KernelCall&, KernelContext&) -> KernelResult { throw std::runtime_error("boom"); },
      {});
  spec.tasks = {fixture::timed("ok", 0.0), bad, fixture::timed("after", 0.0)};
  spec.edges = {{"bad", "after"}};
  CHECK(code_of([&] { execute(spec, ResourcePool(1, 2, 0), fixture::options()); }) == ErrorCode::TaskFailed);
}

TEST_CASE("trace events are time ordered and paired") {
  const auto spec = ip_like(ExecutionModel::parallel, 2, 0.01, 0.01);
  const auto trace = execute(spec, ResourcePool(1, 4, 0), fixture::options());
  for (std::size_t i = 1; i < trace.events.size(); ++i) CHECK(trace.events[i].t >= trace.events[i - 1].t);
  std::map<std::string, int> open;
  for (const auto& e : trace.events) {
    if (e.kind == EventKind::task_start) ++open[e.task];
    if (e.kind == EventKind::task_end) --open[e.task];
  }
  for (const auto& [k, v] : open) CHECK(v == 0);
  CHECK(trace.records.size() == spec.tasks.size());
}

namespace {

WorkflowSpec ddmd_like(int phases) {
  WorkflowSpec spec;
  spec.execution_model = ExecutionModel::sync;
  spec.phases = phases;
  for (int p = 1; p <= phases; ++p) {
    const auto sfx = "_" + std::to_string(p);
    for (int j = 0; j < 3; ++j) {
      auto s = fixture::timed("sim" + sfx + "_" + std::to_string(j), 0.1, 1, "sim");
      s.phase = p;
      spec.tasks.push_back(s);
    }
    for (const char* role : {"train", "select", "agent"}) {
      auto t = fixture::timed(role + sfx, 0.05, 1, role);
      t.phase = p;
      spec.tasks.push_back(t);
    }
    for (int j = 0; j < 3; ++j) spec.edges.emplace_back("sim" + sfx + "_" + std::to_string(j), "train" + sfx);
    spec.edges.emplace_back("train" + sfx, "select" + sfx);
    spec.edges.emplace_back("select" + sfx, "agent" + sfx);
    if (p > 1)
      for (int j = 0; j < 3; ++j)
        spec.edges.emplace_back("agent_" + std::to_string(p - 1), "sim" + sfx + "_" + std::to_string(j));
  }
  return spec;
}

}  // namespace

TEST_CASE("async overlap drops the phase boundary before simulations") {
  const auto sync = ddmd_like(3);
  const auto async = async_overlap(sync);
  CHECK(async.execution_model == ExecutionModel::async);
  for (int j = 0; j < 3; ++j) {
    const auto preds = async.predecessors("sim_2_" + std::to_string(j));
    CHECK(std::find(preds.begin(), preds.end(), "train_1") == preds.end());
    CHECK(std::find(preds.begin(), preds.end(), "agent_1") == preds.end());
    CHECK(std::find(preds.begin(), preds.end(), "sim_1_" + std::to_string(j)) != preds.end());
    const auto p3 = async.predecessors("sim_3_" + std::to_string(j));
    CHECK(std::find(p3.begin(), p3.end(), "agent_1") != p3.end());
  }
  const auto tp = async.predecessors("train_2");
  CHECK(std::find(tp.begin(), tp.end(), "train_1") != tp.end());
  const auto sp = async.predecessors("select_2");
  CHECK(std::find(sp.begin(), sp.end(), "train_2") != sp.end());

  std::map<std::string, double, std::less<>> d;
  for (const auto& t : sync.tasks) d[t.name] = t.category == "sim" ? 1.0 : 0.5;
  CHECK(critical_path(async, d) < critical_path(sync, d));

  CHECK(async_overlap(ddmd_like(1)) == ddmd_like(1));
  auto odd = ddmd_like(2);
  odd.tasks[0].category = "misc";
  CHECK(code_of([&] { async_overlap(odd); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("dependency safety over random DAGs") {
  std::mt19937_64 rng(21);
  int violations = 0;
  for (int i = 0; i < 15; ++i) {
    const auto spec = fixture::random_dag(rng, 15, 3);
    const ResourcePool pool(1 + static_cast<int>(rng() % 2), 3 + static_cast<int>(rng() % 3), 0);
    violations += fixture::check_trace(spec, execute(spec, pool, fixture::options(i))).total();
  }
  CHECK(violations == 0);
}

TEST_CASE("config JSON round trip and validation") {
  WorkflowConfig c;
  c.num_nodes = 4;
  c.ranks = {{"sim", 128}, {"ml", 4}};
  c.epochs = 100;
  c.data_scale = 2.0;
  c.phases = 3;
  CHECK(config_from_json(to_json(c)) == c);
  auto bad = to_json(c);
  bad["data_scale"] = 0;
  CHECK(code_of([&] { config_from_json(bad); }) == ErrorCode::SchemaError);
}
