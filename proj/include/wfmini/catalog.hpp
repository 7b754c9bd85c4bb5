#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "wfmini/comm.hpp"
#include "wfmini/kernel_call.hpp"
#include "wfmini/trace.hpp"

namespace wfmini {

inline constexpr std::uint64_t kMiB = 1024ULL * 1024ULL;
inline constexpr std::uint64_t kGiB = 1024ULL * kMiB;
inline constexpr std::size_t kIoBlock = 4 * kMiB;

struct RuntimeOptions {
  double copy_bandwidth = static_cast<double>(kGiB);  // bytes/s for dataCopy*
  bool fsync = false;
  std::chrono::milliseconds collective_timeout{60'000};
};

/// Files backing the I/O kernels for one run. The read-side input file is
/// staged lazily and only ever grows.
class ScratchSpace {
 public:
  explicit ScratchSpace(std::filesystem::path dir);

  /// $WFMINI_SCRATCH or <tmp>/wfmini-scratch, shared by ad-hoc kernel calls.
  static ScratchSpace& process_default();
  static std::filesystem::path default_root();

  const std::filesystem::path& dir() const noexcept { return dir_; }

  std::filesystem::path staged_input(std::uint64_t min_size);
  std::filesystem::path rank_output(std::string_view task, int rank) const;
  std::filesystem::path shared_file(std::string_view task) const;

  void remove_all();

 private:
  std::filesystem::path dir_;
  std::mutex mu_;
  std::uint64_t staged_ = 0;
};

/// Host pool and emulated device pool of one rank, used by dataCopy*.
struct DeviceMemory {
  std::vector<std::byte> host;
  std::vector<std::byte> device;
};

struct KernelContext {
  const Communicator* comm = nullptr;
  MetricsSink* sink = nullptr;
  ScratchSpace* scratch = nullptr;   // process default when null
  DeviceMemory* memory = nullptr;    // private pool when null
  RuntimeOptions options;
  std::string task = "adhoc";
  int rank = 0;
  std::uint64_t task_seed = 0;
  std::uint64_t rank_seed = 0;
  int threads = 1;
};

enum class ParamType { integer, real, string, dim_list };
enum class Constraint { none, positive, non_negative, power_of_two };

struct ParamSpec {
  std::string name;
  ParamType type = ParamType::integer;
  bool required = true;
  Constraint constraint = Constraint::positive;
  std::vector<std::string> choices{};  // string params only; empty = free-form
};

/// Body for one repetition. Wall time, repetition, device padding and trace
/// emission are handled by execute_kernel around it.
using KernelBody = std::function<KernelResult(const KernelCall&, KernelContext&)>;

struct KernelSpec {
  std::string name;
  KernelBody body;
  std::vector<ParamSpec> params;
  bool needs_comm = false;
  std::string description;
};

class KernelCatalog {
 public:
  static KernelCatalog& instance();

  void add(KernelSpec spec);  // DuplicateKernel
  bool contains(std::string_view name) const;
  const KernelSpec& at(std::string_view name) const;  // UnknownKernel
  std::vector<std::string> names() const;

  /// Full parameter check, including the common device/repetitions/async keys.
  void validate(const KernelCall& call) const;

 private:
  KernelCatalog();
  mutable std::shared_mutex mu_;
  std::map<std::string, KernelSpec, std::less<>> kernels_;
};

void register_kernel(std::string name, KernelBody body, std::vector<ParamSpec> schema,
                     bool needs_comm = false, std::string description = {});

KernelResult execute_kernel(const KernelCall& call, KernelContext& ctx);

}  // namespace wfmini
