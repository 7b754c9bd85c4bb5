#include "wfmini/catalog.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "kernels/builtin.hpp"
#include "wfmini/error.hpp"
#include "wfmini/kernels/dense.hpp"

namespace wfmini {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// scratch

ScratchSpace::ScratchSpace(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec || !fs::is_directory(dir_))
    throw Error(ErrorCode::ScratchUnavailable, "cannot create scratch directory " + dir_.string());
}

fs::path ScratchSpace::default_root() {
  if (const char* env = std::getenv("WFMINI_SCRATCH"); env && *env) return fs::path(env);
  return fs::temp_directory_path() / "wfmini-scratch";
}

ScratchSpace& ScratchSpace::process_default() {
  static ScratchSpace space(default_root() / ("proc-" + std::to_string(::getpid())));
  return space;
}

fs::path ScratchSpace::staged_input(std::uint64_t min_size) {
  const auto path = dir_ / "staged-input.bin";
  std::lock_guard lk(mu_);
  if (staged_ >= min_size) return path;
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT, 0644);
  if (fd < 0) throw Error(ErrorCode::ScratchUnavailable, "cannot stage " + path.string());
  std::vector<char> block(kIoBlock);
  for (std::size_t i = 0; i < block.size(); ++i) block[i] = static_cast<char>((i * 131 + 7) & 0xff);
  std::uint64_t off = staged_;
  while (off < min_size) {
    const auto n = static_cast<std::size_t>(std::min<std::uint64_t>(block.size(), min_size - off));
    const auto w = ::pwrite(fd, block.data(), n, static_cast<off_t>(off));
    if (w <= 0) {
      ::close(fd);
      throw Error(ErrorCode::ScratchUnavailable, "staging write failed in " + dir_.string());
    }
    off += static_cast<std::uint64_t>(w);
  }
  ::close(fd);
  staged_ = off;
  return path;
}

fs::path ScratchSpace::rank_output(std::string_view task, int rank) const {
  return dir_ / (std::string(task) + ".r" + std::to_string(rank) + ".out");
}

fs::path ScratchSpace::shared_file(std::string_view task) const {
  return dir_ / (std::string(task) + ".shared.bin");
}

void ScratchSpace::remove_all() {
  std::lock_guard lk(mu_);
  std::error_code ec;
  fs::remove_all(dir_, ec);
  staged_ = 0;
}

// ---------------------------------------------------------------------------
// catalog

KernelCatalog::KernelCatalog() {
  for (auto& spec : kernels::builtin_kernels()) kernels_.emplace(spec.name, std::move(spec));
}

KernelCatalog& KernelCatalog::instance() {
  static KernelCatalog catalog;
  return catalog;
}

void KernelCatalog::add(KernelSpec spec) {
  std::unique_lock lk(mu_);
  if (kernels_.contains(spec.name))
    throw Error(ErrorCode::DuplicateKernel, "kernel '" + spec.name + "' already registered");
  auto name = spec.name;
  kernels_.emplace(std::move(name), std::move(spec));
}

bool KernelCatalog::contains(std::string_view name) const {
  std::shared_lock lk(mu_);
  return kernels_.find(name) != kernels_.end();
}

const KernelSpec& KernelCatalog::at(std::string_view name) const {
  std::shared_lock lk(mu_);
  auto it = kernels_.find(name);
  if (it == kernels_.end()) throw Error(ErrorCode::UnknownKernel, "no kernel named '" + std::string(name) + "'");
  return it->second;
}

std::vector<std::string> KernelCatalog::names() const {
  std::shared_lock lk(mu_);
  std::vector<std::string> out;
  for (const auto& [name, spec] : kernels_) out.push_back(name);
  return out;
}

namespace {

const std::vector<ParamSpec>& common_params() {
  static const std::vector<ParamSpec> common{
      {"device", ParamType::string, false, Constraint::none, {"host", "cpu", "accelerator", "gpu"}},
      {"slowdown_factor", ParamType::real, false, Constraint::positive, {}},
      {"repetitions", ParamType::integer, false, Constraint::positive, {}},
      {"async", ParamType::integer, false, Constraint::non_negative, {}},
  };
  return common;
}

void check_number(const KernelCall& call, const ParamSpec& p, double v) {
  auto bad = [&](const char* what) {
    throw Error(ErrorCode::InvalidParameter, call.kernel + "." + p.name + " " + what);
  };
  switch (p.constraint) {
    case Constraint::none: break;
    case Constraint::positive:
      if (!(v > 0)) bad("must be positive");
      break;
    case Constraint::non_negative:
      if (!(v >= 0)) bad("must be non-negative");
      break;
    case Constraint::power_of_two:
      if (v < 2 || !kernels::is_power_of_two(static_cast<std::size_t>(v)) || std::floor(v) != v)
        bad("must be a power of two >= 2");
      break;
  }
}

void check_param(const KernelCall& call, const ParamSpec& p) {
  switch (p.type) {
    case ParamType::integer: check_number(call, p, static_cast<double>(call.integer(p.name))); break;
    case ParamType::real: check_number(call, p, call.real(p.name)); break;
    case ParamType::string: {
      const auto s = call.string(p.name);
      if (!p.choices.empty() && std::find(p.choices.begin(), p.choices.end(), s) == p.choices.end())
        throw Error(ErrorCode::InvalidParameter, call.kernel + "." + p.name + " has unsupported value '" + s + "'");
      break;
    }
    case ParamType::dim_list:
      for (const auto& t : call.dims(p.name)) {
        if (t[0] < 1 || t[1] < 1 || t[2] < 1)
          throw Error(ErrorCode::InvalidParameter, call.kernel + "." + p.name + " entries must be positive");
      }
      break;
  }
}

}  // namespace

void KernelCatalog::validate(const KernelCall& call) const {
  const auto& spec = at(call.kernel);
  for (const auto& p : spec.params) {
    if (!call.has(p.name)) {
      if (p.required) throw Error(ErrorCode::MissingParameter, call.kernel + " requires '" + p.name + "'");
      continue;
    }
    check_param(call, p);
  }
  for (const auto& p : common_params()) {
    if (call.has(p.name)) check_param(call, p);
  }
  for (const auto& [name, value] : call.params) {
    auto known = [&](const std::vector<ParamSpec>& list) {
      return std::any_of(list.begin(), list.end(), [&](const auto& p) { return p.name == name; });
    };
    if (!known(spec.params) && !known(common_params()))
      throw Error(ErrorCode::InvalidParameter, call.kernel + " has no parameter '" + name + "'");
  }
}

void register_kernel(std::string name, KernelBody body, std::vector<ParamSpec> schema, bool needs_comm,
                     std::string description) {
  KernelCatalog::instance().add(
      KernelSpec{std::move(name), std::move(body), std::move(schema), needs_comm, std::move(description)});
}

KernelResult execute_kernel(const KernelCall& call, KernelContext& ctx) {
  auto& catalog = KernelCatalog::instance();
  const auto& spec = catalog.at(call.kernel);
  catalog.validate(call);
  if (spec.needs_comm && ctx.comm == nullptr)
    throw Error(ErrorCode::CommunicatorRequired, call.kernel + " must be called with a communicator");

  DeviceMemory private_memory;
  if (ctx.memory == nullptr) ctx.memory = &private_memory;
  struct Restore {
    KernelContext& ctx;
    DeviceMemory* own;
    ~Restore() {
      if (ctx.memory == own) ctx.memory = nullptr;
    }
  } restore{ctx, &private_memory};

  const Device device = call.device();
  const double t0 = ctx.sink ? ctx.sink->now() : 0.0;
  const auto start = std::chrono::steady_clock::now();

  KernelResult total;
  const auto reps = call.repetitions();
  for (std::int64_t r = 0; r < reps; ++r) {
    auto one = spec.body(call, ctx);
    total += one;
    total.checksum = one.checksum;
  }

  if (device.kind == DeviceKind::accelerator && device.slowdown_factor > 1.0) {
    const auto compute = std::chrono::steady_clock::now() - start;
    std::this_thread::sleep_until(start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                              compute * device.slowdown_factor));
  }
  total.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (ctx.sink) {
    Event e;
    e.kind = EventKind::kernel;
    e.t = t0;
    e.task = ctx.task;
    e.rank = ctx.rank;
    e.kernel = call.kernel;
    e.duration = total.wall_time;
    e.bytes_read = total.bytes_read;
    e.bytes_written = total.bytes_written;
    e.bytes_communicated = total.bytes_communicated;
    e.checksum = total.checksum;
    ctx.sink->append(std::move(e));
  }
  return total;
}

}  // namespace wfmini
