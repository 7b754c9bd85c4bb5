#include <doctest.h>

#include <filesystem>

#include "wfmini/error.hpp"
#include "wfmini/task.hpp"

using namespace wfmini;
using nlohmann::json;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::KernelFailure;
}

json sim_doc() {
  return json::parse(R"({
    "name": "sim", "category": "sim", "num_ranks": 2,
    "program": [
      {"kind": "loop", "count": 2, "body": [
        {"kernel": "readNonMPI", "params": {"data_size": 1000}},
        {"kind": "loop", "count": 3, "body": [{"kernel": "matMulSimple2D", "params": {"dim": 16}}]},
        {"kernel": "writeNonMPI", "params": {"data_size": 500}}
      ]},
      {"kernel": "matMulGeneral", "params": {"dim_list": [[4, 4, 4], [2, 3, 5]]}}
    ]})");
}

struct Env {
  ScratchSpace scratch{std::filesystem::temp_directory_path() / "wfmini-test-task"};
  TaskEnvironment env{&scratch, {}};
  ~Env() { scratch.remove_all(); }
};

SlotAssignment cpus(int n) {
  SlotAssignment a;
  for (int i = 0; i < n; ++i) a.cpu_slots.push_back(i);
  return a;
}

}  // namespace

TEST_CASE("task spec round trips through JSON") {
  const auto spec = parse_task_spec(sim_doc());
  CHECK(spec.num_ranks == 2);
  REQUIRE(spec.program.size() == 2);
  CHECK(spec.program[0].kind == ProgramStep::Kind::loop);
  CHECK(spec.program[0].body[1].body[0].kernel.kernel == "matMulSimple2D");
  CHECK(parse_task_spec(to_json(spec)) == spec);
}

TEST_CASE("task spec validation") {
  auto doc = sim_doc();
  doc["num_ranks"] = 0;
  CHECK(code_of([&] { parse_task_spec(doc); }) == ErrorCode::SchemaError);

  doc = sim_doc();
  doc["program"] = json::array();
  CHECK(code_of([&] { parse_task_spec(doc); }) == ErrorCode::SchemaError);

  doc = sim_doc();
  doc["program"][1]["kernel"] = "noSuchKernel";
  CHECK(code_of([&] { parse_task_spec(doc); }) == ErrorCode::UnknownKernel);

  doc = sim_doc();
  doc["program"][1]["params"] = json::object();
  CHECK(code_of([&] { parse_task_spec(doc); }) == ErrorCode::SchemaError);

  doc = sim_doc();
  doc["program"][1]["params"]["device"] = "accelerator";
  CHECK(code_of([&] { parse_task_spec(doc); }) == ErrorCode::SchemaError);
  doc["gpus_per_rank"] = 1;
  CHECK_NOTHROW(parse_task_spec(doc));

  doc = sim_doc();
  doc["program"][0]["count"] = 0;
  CHECK(code_of([&] { parse_task_spec(doc); }) == ErrorCode::SchemaError);
}

TEST_CASE("dotted paths address counts, sizes and dims") {
  auto spec = parse_task_spec(sim_doc());
  CHECK(read_path(spec, "program.0.count") == 2);
  CHECK(read_path(spec, "program.0.body.0.params.data_size") == 1000);
  CHECK(read_path(spec, "program.0.body.1.count") == 3);
  CHECK(read_path(spec, "program.1.params.dim_list.1.2") == 5);
  CHECK(read_path(spec, "num_ranks") == 2);
  CHECK(code_of([&] { read_path(spec, "program.9.count"); }) == ErrorCode::UnknownParameter);
  CHECK(code_of([&] { read_path(spec, "program.0.body.0.params.nope"); }) == ErrorCode::UnknownParameter);
  CHECK(code_of([&] { read_path(spec, "program.1.count"); }) == ErrorCode::UnknownParameter);

  write_path(spec, "program.0.body.2.params.data_size", 123.6);
  CHECK(read_path(spec, "program.0.body.2.params.data_size") == 124);
  write_path(spec, "program.0.count", 0.2);
  CHECK(read_path(spec, "program.0.count") == 1);

  const auto paths = numeric_paths(spec);
  CHECK(std::find(paths.begin(), paths.end(), "program.1.params.dim_list.0.0") != paths.end());
  for (const auto& p : paths) CHECK_NOTHROW(read_path(spec, p));
}

TEST_CASE("scale_task multiplies and composes on integral steps") {
  const auto spec = parse_task_spec(sim_doc());
  const std::string p = "program.0.body.0.params.data_size";
  const auto once = scale_task(spec, {{p, 2.0}});
  CHECK(read_path(once, p) == 2000);
  CHECK(read_path(spec, p) == 1000);
  const auto twice = scale_task(once, {{p, 3.0}});
  CHECK(twice == scale_task(spec, {{p, 6.0}}));
  // rounding keeps a composed scale within one unit of the direct one
  const auto a = scale_task(scale_task(spec, {{p, 1.37}}), {{p, 0.41}});
  const auto b = scale_task(spec, {{p, 1.37 * 0.41}});
  CHECK(std::abs(read_path(a, p) - read_path(b, p)) <= 1.0);
  CHECK(scale_task(spec, {}) == spec);
  CHECK(code_of([&] { scale_task(spec, {{p, 0.0}}); }) == ErrorCode::PreconditionFailed);
}

TEST_CASE("run_task executes all ranks and accounts bytes") {
  Env e;
  MetricsSink sink;
  const auto spec = parse_task_spec(sim_doc());
  const auto rec = run_task(spec, cpus(2), sink, 11, e.env);
  CHECK(rec.status == TaskStatus::ok);
  CHECK(rec.bytes_read == 2 * 2 * 1000);
  CHECK(rec.bytes_written == 2 * 2 * 500);
  CHECK(rec.slots_used == std::vector<int>{0, 1});
  CHECK(rec.end >= rec.start);

  const auto ev = sink.events();
  int kernels = 0, busy = 0, idle = 0, starts = 0, ends = 0;
  for (const auto& x : ev) {
    kernels += x.kind == EventKind::kernel;
    busy += x.kind == EventKind::slot_busy;
    idle += x.kind == EventKind::slot_idle;
    starts += x.kind == EventKind::task_start;
    ends += x.kind == EventKind::task_end;
  }
  CHECK(kernels == 2 * (2 * (1 + 3 + 1) + 1));
  CHECK(busy == 2);
  CHECK(idle == 2);
  CHECK(starts == 1);
  CHECK(ends == 1);
  CHECK(sink.records().size() == 1);
}

TEST_CASE("run_task with collectives and async kernels") {
  Env e;
  MetricsSink sink;
  const auto spec = parse_task_spec(json::parse(R"({
    "name": "train", "num_ranks": 3,
    "program": [
      {"kernel": "MPIallReduceAsync", "params": {"data_size": 64}},
      {"kernel": "axpy", "params": {"data_size": 64}},
      {"kernel": "MPIallGather", "params": {"data_size": 8}},
      {"kernel": "dataCopyH2DAsync", "params": {"data_size": 1024}}
    ]})"));
  const auto rec = run_task(spec, cpus(3), sink, 1, e.env);
  CHECK(rec.bytes_communicated == 3 * (64 * 8 * 2 + 8 * 8 * 2));
}

TEST_CASE("run_task checks the assignment") {
  Env e;
  MetricsSink sink;
  const auto spec = parse_task_spec(sim_doc());
  CHECK(code_of([&] { run_task(spec, cpus(1), sink, 0, e.env); }) == ErrorCode::InsufficientSlots);
}

TEST_CASE("a failing rank aborts its peers and records the failure") {
  Env e;
  MetricsSink sink;
  TaskSpec spec;
  spec.name = "bad";
  spec.num_ranks = 2;
  // rank-dependent sizes make the allreduce inconsistent
  register_kernel(
      "testRankSized",
      [](const KernelCall&, KernelContext& ctx) {
        std::vector<double> buf(static_cast<std::size_t>(ctx.rank + 1), 1.0);
        ctx.comm->allreduce(buf);
        return KernelResult{};
      },
      {}, true);
  spec.program = {ProgramStep::call(KernelCall("testRankSized"))};
  CHECK(code_of([&] { run_task(spec, cpus(2), sink, 0, e.env); }) == ErrorCode::KernelFailure);
  REQUIRE(sink.records().size() == 1);
  CHECK(sink.records()[0].status == TaskStatus::failed);
}
