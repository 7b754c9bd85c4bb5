#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <thread>

#include "wfmini/catalog.hpp"
#include "wfmini/error.hpp"

using namespace wfmini;

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

std::filesystem::path fresh_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("wfmini-test-catalog-" + name);
  std::filesystem::remove_all(d);
  return d;
}

}  // namespace

TEST_CASE("catalog lists every kernel of the API table") {
  const auto names = KernelCatalog::instance().names();
  for (const char* n : {"readNonMPI", "writeNonMPI", "readWithMPI", "writeWithMPI", "MPIallReduce", "MPIallGather",
                        "MPIallReduceAsync", "matMulGeneral", "matMulSimple2D", "fft", "RNG", "axpy", "scatterAdd",
                        "reduction", "inplaceCompute", "dataCopyD2H", "dataCopyH2D", "dataCopyD2HAsync",
                        "dataCopyH2DAsync"}) {
    CHECK(std::find(names.begin(), names.end(), n) != names.end());
  }
}

TEST_CASE("parameter validation") {
  KernelContext ctx;
  CHECK(code_of([&] { execute_kernel(KernelCall("nope"), ctx); }) == ErrorCode::UnknownKernel);
  CHECK(code_of([&] { execute_kernel(KernelCall("axpy"), ctx); }) == ErrorCode::MissingParameter);
  CHECK(code_of([&] { execute_kernel(KernelCall("axpy", {{"data_size", std::int64_t{0}}}), ctx); }) ==
        ErrorCode::InvalidParameter);
  CHECK(code_of([&] { execute_kernel(KernelCall("fft", {{"data_size", std::int64_t{12}}}), ctx); }) ==
        ErrorCode::InvalidParameter);
  CHECK(code_of([&] {
          execute_kernel(KernelCall("axpy", {{"data_size", std::int64_t{4}}, {"bogus", std::int64_t{1}}}), ctx);
        }) == ErrorCode::InvalidParameter);
  CHECK(code_of([&] {
          execute_kernel(KernelCall("inplaceCompute", {{"data_size", std::int64_t{4}}, {"functor", std::string("cube")}}),
                         ctx);
        }) == ErrorCode::InvalidParameter);
  CHECK(code_of([&] { execute_kernel(KernelCall("MPIallReduce", {{"data_size", std::int64_t{4}}}), ctx); }) ==
        ErrorCode::CommunicatorRequired);
}

TEST_CASE("compute kernels are deterministic for a seed") {
  KernelContext a, b;
  a.rank_seed = b.rank_seed = 99;
  a.task_seed = b.task_seed = 5;
  b.threads = 3;
  for (const auto& call :
       {KernelCall("matMulSimple2D", {{"dim", std::int64_t{32}}}),
        KernelCall("matMulGeneral", {{"dim_list", std::vector<DimTriple>{{4, 8, 2}, {3, 3, 3}}}}),
        KernelCall("fft", {{"data_size", std::int64_t{256}}, {"transform_dim", std::int64_t{2}}}),
        KernelCall("RNG", {{"data_size", std::int64_t{1000}}, {"distribution", std::string("normal")}}),
        KernelCall("axpy", {{"data_size", std::int64_t{1000}}}),
        KernelCall("scatterAdd", {{"x_size", std::int64_t{1000}}, {"y_size", std::int64_t{50}}}),
        KernelCall("reduction", {{"data_size", std::int64_t{10000}}}),
        KernelCall("inplaceCompute", {{"data_size", std::int64_t{100}}, {"functor", std::string("sqrt")}})}) {
    CAPTURE(call.kernel);
    const auto ra = execute_kernel(call, a);
    const auto rb = execute_kernel(call, b);
    CHECK(ra.checksum == rb.checksum);
    CHECK(ra.bytes_read == 0);
    CHECK(ra.wall_time >= 0.0);
  }
}

TEST_CASE("file I/O kernels count exact bytes") {
  ScratchSpace scratch(fresh_dir("io"));
  KernelContext ctx;
  ctx.scratch = &scratch;
  const std::int64_t n = 5 * 1024 * 1024 + 17;
  auto w = execute_kernel(KernelCall("writeNonMPI", {{"data_size", n}}), ctx);
  CHECK(w.bytes_written == static_cast<std::uint64_t>(n));
  CHECK(std::filesystem::file_size(scratch.rank_output("adhoc", 0)) == static_cast<std::uintmax_t>(n));
  auto r = execute_kernel(KernelCall("readNonMPI", {{"data_size", n}}), ctx);
  CHECK(r.bytes_read == static_cast<std::uint64_t>(n));
  auto z = execute_kernel(KernelCall("readNonMPI", {{"data_size", std::int64_t{0}}}), ctx);
  CHECK(z.bytes_read == 0);
  scratch.remove_all();
}

TEST_CASE("MPI-IO kernels write disjoint regions of one file") {
  ScratchSpace scratch(fresh_dir("mpiio"));
  auto comms = Communicator::create(3, std::chrono::seconds(10));
  std::vector<KernelResult> w(3), r(3);
  {
    std::vector<std::jthread> ts;
    for (int rank = 0; rank < 3; ++rank)
      ts.emplace_back([&, rank] {
        KernelContext ctx;
        ctx.comm = &comms[static_cast<std::size_t>(rank)];
        ctx.scratch = &scratch;
        ctx.task = "shared";
        ctx.rank = rank;
        w[static_cast<std::size_t>(rank)] = execute_kernel(KernelCall("writeWithMPI", {{"data_size", std::int64_t{1000}}}), ctx);
        r[static_cast<std::size_t>(rank)] = execute_kernel(KernelCall("readWithMPI", {{"data_size", std::int64_t{1000}}}), ctx);
      });
  }
  CHECK(std::filesystem::file_size(scratch.shared_file("shared")) == 3000);
  for (int i = 0; i < 3; ++i) {
    CHECK(w[static_cast<std::size_t>(i)].bytes_written == 1000);
    CHECK(r[static_cast<std::size_t>(i)].bytes_read == 1000);
  }
  scratch.remove_all();
}

TEST_CASE("collective kernels use the ring byte model") {
  auto comms = Communicator::create(4, std::chrono::seconds(10));
  std::vector<KernelResult> out(4);
  {
    std::vector<std::jthread> ts;
    for (int rank = 0; rank < 4; ++rank)
      ts.emplace_back([&, rank] {
        KernelContext ctx;
        ctx.comm = &comms[static_cast<std::size_t>(rank)];
        ctx.rank = rank;
        out[static_cast<std::size_t>(rank)] = execute_kernel(KernelCall("MPIallReduce", {{"data_size", std::int64_t{100}}}), ctx);
      });
  }
  for (const auto& o : out) {
    CHECK(o.bytes_communicated == 100 * 8 * 3);
    CHECK(o.checksum == out[0].checksum);
  }
}

TEST_CASE("device copies follow the modeled bandwidth") {
  KernelContext ctx;
  ctx.options.copy_bandwidth = 100.0 * 1024 * 1024;  // 100 MiB/s
  const auto r = execute_kernel(KernelCall("dataCopyH2D", {{"data_size", std::int64_t{10 * 1024 * 1024}}}), ctx);
  CHECK(r.wall_time >= 0.099);
  CHECK(r.wall_time < 0.5);
  const auto z = execute_kernel(KernelCall("dataCopyD2H", {{"data_size", std::int64_t{0}}}), ctx);
  CHECK(z.wall_time < 0.05);
}

TEST_CASE("accelerator slowdown pads the measured time") {
  KernelContext ctx;
  const KernelCall host("matMulSimple2D", {{"dim", std::int64_t{128}}});
  auto slow = host;
  slow.params["device"] = std::string("accelerator");
  slow.params["slowdown_factor"] = 3.0;
  double h = 1e9, s = 1e9;
  for (int i = 0; i < 3; ++i) {
    h = std::min(h, execute_kernel(host, ctx).wall_time);
    s = std::min(s, execute_kernel(slow, ctx).wall_time);
  }
  CHECK(s > 1.8 * h);
}

TEST_CASE("repetitions and trace events") {
  MetricsSink sink;
  KernelContext ctx;
  ctx.sink = &sink;
  ctx.task = "t";
  auto call = KernelCall("axpy", {{"data_size", std::int64_t{16}}, {"repetitions", std::int64_t{3}}});
  execute_kernel(call, ctx);
  const auto ev = sink.events();
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].kind == EventKind::kernel);
  CHECK(ev[0].kernel == "axpy");
  CHECK(ev[0].task == "t");
}

TEST_CASE("custom kernels can be registered once") {
  register_kernel(
      "testTouch", [](const KernelCall& c, KernelContext&) { return KernelResult{0, 0, 0, 0, static_cast<double>(c.integer("n"))}; },
      {{"n", ParamType::integer}});
  KernelContext ctx;
  CHECK(execute_kernel(KernelCall("testTouch", {{"n", std::int64_t{7}}}), ctx).checksum == 7.0);
  CHECK(code_of([] { register_kernel("testTouch", {}, {}); }) == ErrorCode::DuplicateKernel);
}
