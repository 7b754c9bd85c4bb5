#include <cstring>
#include <thread>

#include "builtin.hpp"
#include "wfmini/kernels/dense.hpp"

namespace wfmini::kernels {

namespace {

// Ring-allreduce accounting: each rank moves n * width * (size - 1) bytes.
std::uint64_t ring_bytes(std::size_t n, int size) {
  return static_cast<std::uint64_t>(n) * sizeof(double) * static_cast<std::uint64_t>(size - 1);
}

KernelResult all_reduce(const KernelCall& call, KernelContext& ctx) {
  std::vector<double> buf(static_cast<std::size_t>(call.integer("data_size")));
  fill_uniform(buf, salted(ctx.rank_seed, "MPIallReduce"), ctx.threads);
  ctx.comm->allreduce(buf, ctx.threads);
  return {.bytes_communicated = ring_bytes(buf.size(), ctx.comm->size()), .checksum = reduce_sum(buf, ctx.threads)};
}

KernelResult all_gather(const KernelCall& call, KernelContext& ctx) {
  std::vector<double> buf(static_cast<std::size_t>(call.integer("data_size")));
  fill_uniform(buf, salted(ctx.rank_seed, "MPIallGather"), ctx.threads);
  const auto out = ctx.comm->allgather(buf);
  return {.bytes_communicated = ring_bytes(buf.size(), ctx.comm->size()), .checksum = reduce_sum(out, ctx.threads)};
}

void ensure_filled(std::vector<std::byte>& pool, std::size_t n, std::uint64_t seed) {
  if (pool.size() >= n) return;
  const std::size_t old = pool.size();
  pool.resize(n);
  for (std::size_t i = old; i < n; i += 8) {
    const auto word = splitmix64(seed ^ i);
    std::memcpy(pool.data() + i, &word, std::min<std::size_t>(8, n - i));
  }
}

double byte_sum(const std::byte* p, std::size_t n) {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < n; ++i) s += static_cast<std::uint8_t>(p[i]);
  return static_cast<double>(s);
}

// Moves bytes between the host pool and the emulated device pool, then holds
// the caller until data_size / bandwidth has elapsed.
KernelResult data_copy(const KernelCall& call, KernelContext& ctx, bool to_device) {
  const auto start = std::chrono::steady_clock::now();
  const auto n = static_cast<std::size_t>(call.integer("data_size"));
  const double bandwidth = call.real_or("bandwidth", ctx.options.copy_bandwidth);
  auto& mem = *ctx.memory;
  auto& src = to_device ? mem.host : mem.device;
  auto& dst = to_device ? mem.device : mem.host;
  ensure_filled(src, n, salted(ctx.rank_seed, "dataCopy"));
  if (dst.size() < n) dst.resize(n);
  if (n > 0) std::memcpy(dst.data(), src.data(), n);
  const double checksum = byte_sum(dst.data(), n);
  const auto modeled = std::chrono::duration<double>(static_cast<double>(n) / bandwidth);
  std::this_thread::sleep_until(start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(modeled));
  return {.checksum = checksum};
}

}  // namespace

std::vector<KernelSpec> comm_kernels() {
  const std::vector<ParamSpec> size{{"data_size", ParamType::integer}};
  return {
      {"MPIallReduce", all_reduce, size, true, "elementwise sum across ranks"},
      {"MPIallReduceAsync", all_reduce, size, true, "allreduce overlapped with the next kernel"},
      {"MPIallGather", all_gather, size, true, "rank-ordered concatenation across ranks"},
  };
}

std::vector<KernelSpec> copy_kernels() {
  const std::vector<ParamSpec> params{{"data_size", ParamType::integer, true, Constraint::non_negative},
                                      {"bandwidth", ParamType::real, false, Constraint::positive}};
  auto h2d = [](const KernelCall& c, KernelContext& ctx) { return data_copy(c, ctx, true); };
  auto d2h = [](const KernelCall& c, KernelContext& ctx) { return data_copy(c, ctx, false); };
  return {
      {"dataCopyH2D", h2d, params, false, "host to device copy at the modeled bandwidth"},
      {"dataCopyD2H", d2h, params, false, "device to host copy at the modeled bandwidth"},
      {"dataCopyH2DAsync", h2d, params, false, "host to device copy overlapped with the next kernel"},
      {"dataCopyD2HAsync", d2h, params, false, "device to host copy overlapped with the next kernel"},
  };
}

}  // namespace wfmini::kernels
