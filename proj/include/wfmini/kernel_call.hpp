#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace wfmini {

enum class DeviceKind { host, accelerator };

/// Where a kernel nominally runs. Accelerator kernels execute on host cores;
/// the emulation pads their wall time up to `slowdown_factor` times the host
/// compute time and they occupy an accelerator slot in the resource model.
struct Device {
  DeviceKind kind = DeviceKind::host;
  double slowdown_factor = 1.0;

  static Device host() { return {}; }
  static Device accelerator(double slowdown = 1.0) { return {DeviceKind::accelerator, slowdown}; }
  friend bool operator==(const Device&, const Device&) = default;
};

using DimTriple = std::array<std::int64_t, 3>;  // (m, k, n)
using ParamValue = std::variant<std::int64_t, double, std::string, std::vector<DimTriple>>;

struct KernelCall {
  std::string kernel;
  std::map<std::string, ParamValue, std::less<>> params;

  KernelCall() = default;
  KernelCall(std::string name, std::map<std::string, ParamValue, std::less<>> p = {})
      : kernel(std::move(name)), params(std::move(p)) {}

  bool has(std::string_view name) const { return params.find(name) != params.end(); }

  // Typed accessors. They assume validation already happened and throw
  // MissingParameter / InvalidParameter otherwise.
  std::int64_t integer(std::string_view name) const;
  std::int64_t integer_or(std::string_view name, std::int64_t fallback) const;
  double real(std::string_view name) const;
  double real_or(std::string_view name, double fallback) const;
  std::string string(std::string_view name) const;
  std::string string_or(std::string_view name, std::string fallback) const;
  const std::vector<DimTriple>& dims(std::string_view name) const;

  Device device() const;
  std::int64_t repetitions() const { return integer_or("repetitions", 1); }
  /// Async variants (name suffix "Async" or async=1) overlap with the caller's next kernel.
  bool is_async() const;

  friend bool operator==(const KernelCall&, const KernelCall&) = default;
};

struct KernelResult {
  double wall_time = 0.0;
  std::uint64_t bytes_read = 0;
  std::uint64_t bytes_written = 0;
  std::uint64_t bytes_communicated = 0;
  double checksum = 0.0;

  KernelResult& operator+=(const KernelResult& o) {
    wall_time += o.wall_time;
    bytes_read += o.bytes_read;
    bytes_written += o.bytes_written;
    bytes_communicated += o.bytes_communicated;
    return *this;
  }
};

nlohmann::json to_json(const ParamValue& v);
ParamValue param_from_json(const nlohmann::json& j);

/// {"kernel": name, "params": {...}}
nlohmann::json to_json(const KernelCall& call);
KernelCall kernel_call_from_json(const nlohmann::json& j);

}  // namespace wfmini
