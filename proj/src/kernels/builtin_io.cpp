#include <fcntl.h>
#include <unistd.h>

#include <algorithm>

#include "builtin.hpp"
#include "wfmini/error.hpp"

namespace wfmini::kernels {

namespace {

class Fd {
 public:
  Fd(const std::filesystem::path& path, int flags) : fd_(::open(path.c_str(), flags, 0644)) {
    if (fd_ < 0) throw Error(ErrorCode::ScratchUnavailable, "cannot open " + path.string());
  }
  ~Fd() { ::close(fd_); }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  int get() const noexcept { return fd_; }

 private:
  int fd_;
};

ScratchSpace& scratch_of(KernelContext& ctx) {
  return ctx.scratch ? *ctx.scratch : ScratchSpace::process_default();
}

const std::vector<char>& write_block() {
  static const std::vector<char> block = [] {
    std::vector<char> b(kIoBlock);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = static_cast<char>((i * 31 + 11) & 0xff);
    return b;
  }();
  return block;
}

// Reads `size` bytes starting at `offset` in kIoBlock chunks.
std::uint64_t read_range(const std::filesystem::path& path, std::uint64_t offset, std::uint64_t size) {
  Fd fd(path, O_RDONLY);
  std::vector<char> buf(static_cast<std::size_t>(std::min<std::uint64_t>(size, kIoBlock)));
  std::uint64_t done = 0;
  while (done < size) {
    const auto want = static_cast<std::size_t>(std::min<std::uint64_t>(buf.size(), size - done));
    const auto got = ::pread(fd.get(), buf.data(), want, static_cast<off_t>(offset + done));
    if (got <= 0)
      throw Error(ErrorCode::ShortRead, path.string() + ": read " + std::to_string(done) + " of " +
                                            std::to_string(size) + " bytes");
    done += static_cast<std::uint64_t>(got);
  }
  return done;
}

std::uint64_t write_range(const std::filesystem::path& path, int flags, std::uint64_t offset, std::uint64_t size,
                          bool sync) {
  Fd fd(path, flags);
  const auto& block = write_block();
  std::uint64_t done = 0;
  while (done < size) {
    const auto want = static_cast<std::size_t>(std::min<std::uint64_t>(block.size(), size - done));
    const auto put = ::pwrite(fd.get(), block.data(), want, static_cast<off_t>(offset + done));
    if (put <= 0)
      throw Error(ErrorCode::ShortWrite, path.string() + ": wrote " + std::to_string(done) + " of " +
                                             std::to_string(size) + " bytes");
    done += static_cast<std::uint64_t>(put);
  }
  if (sync) ::fsync(fd.get());
  return done;
}

std::uint64_t bytes_param(const KernelCall& call) { return static_cast<std::uint64_t>(call.integer("data_size")); }

KernelResult read_non_mpi(const KernelCall& call, KernelContext& ctx) {
  const auto size = bytes_param(call);
  if (size == 0) return {};
  const auto path = scratch_of(ctx).staged_input(size);
  return {.bytes_read = read_range(path, 0, size)};
}

KernelResult write_non_mpi(const KernelCall& call, KernelContext& ctx) {
  const auto size = bytes_param(call);
  if (size == 0) return {};
  const auto path = scratch_of(ctx).rank_output(ctx.task, ctx.rank);
  return {.bytes_written = write_range(path, O_WRONLY | O_CREAT | O_TRUNC, 0, size, ctx.options.fsync)};
}

// Each rank owns the region [rank * size, (rank + 1) * size) of one file.
KernelResult read_with_mpi(const KernelCall& call, KernelContext& ctx) {
  const auto size = bytes_param(call);
  const auto& comm = *ctx.comm;
  const auto path = scratch_of(ctx).staged_input(size * static_cast<std::uint64_t>(comm.size()));
  comm.barrier();
  if (size == 0) return {};
  return {.bytes_read = read_range(path, size * static_cast<std::uint64_t>(comm.rank_id()), size)};
}

KernelResult write_with_mpi(const KernelCall& call, KernelContext& ctx) {
  const auto size = bytes_param(call);
  const auto& comm = *ctx.comm;
  const auto path = scratch_of(ctx).shared_file(ctx.task);
  comm.barrier();
  if (size == 0) return {};
  return {.bytes_written = write_range(path, O_WRONLY | O_CREAT, size * static_cast<std::uint64_t>(comm.rank_id()),
                                       size, ctx.options.fsync)};
}

}  // namespace

std::vector<KernelSpec> io_kernels() {
  const std::vector<ParamSpec> size{{"data_size", ParamType::integer, true, Constraint::non_negative}};
  return {
      {"readNonMPI", read_non_mpi, size, false, "read data_size bytes from the staged input"},
      {"writeNonMPI", write_non_mpi, size, false, "write data_size bytes to a per-rank file"},
      {"readWithMPI", read_with_mpi, size, true, "collective read of a per-rank region of a shared file"},
      {"writeWithMPI", write_with_mpi, size, true, "collective write of a per-rank region of a shared file"},
  };
}

}  // namespace wfmini::kernels
