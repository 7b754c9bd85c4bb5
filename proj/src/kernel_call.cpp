#include "wfmini/kernel_call.hpp"

#include <cmath>

#include "wfmini/error.hpp"

namespace wfmini {

namespace {

const ParamValue& lookup(const KernelCall& call, std::string_view name) {
  auto it = call.params.find(name);
  if (it == call.params.end())
    throw Error(ErrorCode::MissingParameter, call.kernel + " requires '" + std::string(name) + "'");
  return it->second;
}

[[noreturn]] void wrong_type(const KernelCall& call, std::string_view name, const char* want) {
  throw Error(ErrorCode::InvalidParameter,
              call.kernel + "." + std::string(name) + " must be " + want);
}

}  // namespace

std::int64_t KernelCall::integer(std::string_view name) const {
  const auto& v = lookup(*this, name);
  if (auto* i = std::get_if<std::int64_t>(&v)) return *i;
  if (auto* d = std::get_if<double>(&v); d && std::floor(*d) == *d) return static_cast<std::int64_t>(*d);
  wrong_type(*this, name, "an integer");
}

std::int64_t KernelCall::integer_or(std::string_view name, std::int64_t fallback) const {
  return has(name) ? integer(name) : fallback;
}

double KernelCall::real(std::string_view name) const {
  const auto& v = lookup(*this, name);
  if (auto* d = std::get_if<double>(&v)) return *d;
  if (auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  wrong_type(*this, name, "a number");
}

double KernelCall::real_or(std::string_view name, double fallback) const {
  return has(name) ? real(name) : fallback;
}

std::string KernelCall::string(std::string_view name) const {
  const auto& v = lookup(*this, name);
  if (auto* s = std::get_if<std::string>(&v)) return *s;
  wrong_type(*this, name, "a string");
}

std::string KernelCall::string_or(std::string_view name, std::string fallback) const {
  return has(name) ? string(name) : std::move(fallback);
}

const std::vector<DimTriple>& KernelCall::dims(std::string_view name) const {
  const auto& v = lookup(*this, name);
  if (auto* d = std::get_if<std::vector<DimTriple>>(&v)) return *d;
  wrong_type(*this, name, "a list of [m,k,n] triples");
}

Device KernelCall::device() const {
  const auto kind = string_or("device", "host");
  Device d;
  if (kind == "host" || kind == "cpu") {
    d.kind = DeviceKind::host;
  } else if (kind == "accelerator" || kind == "gpu") {
    d.kind = DeviceKind::accelerator;
    d.slowdown_factor = real_or("slowdown_factor", 1.0);
  } else {
    throw Error(ErrorCode::InvalidParameter, kernel + ".device must be host or accelerator");
  }
  return d;
}

bool KernelCall::is_async() const {
  constexpr std::string_view suffix = "Async";
  if (kernel.size() >= suffix.size() && kernel.compare(kernel.size() - suffix.size(), suffix.size(), suffix) == 0)
    return true;
  return integer_or("async", 0) != 0;
}

nlohmann::json to_json(const ParamValue& v) {
  return std::visit(
      [](const auto& x) -> nlohmann::json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::vector<DimTriple>>) {
          auto arr = nlohmann::json::array();
          for (const auto& t : x) arr.push_back({t[0], t[1], t[2]});
          return arr;
        } else {
          return x;
        }
      },
      v);
}

ParamValue param_from_json(const nlohmann::json& j) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  if (j.is_boolean()) return std::int64_t{j.get<bool>() ? 1 : 0};
  if (j.is_array()) {
    std::vector<DimTriple> dims;
    for (const auto& t : j) {
      if (!t.is_array() || t.size() != 3)
        throw Error(ErrorCode::SchemaError, "dim_list entries must be [m, k, n]");
      dims.push_back({t[0].get<std::int64_t>(), t[1].get<std::int64_t>(), t[2].get<std::int64_t>()});
    }
    return dims;
  }
  throw Error(ErrorCode::SchemaError, "unsupported parameter value " + j.dump());
}

nlohmann::json to_json(const KernelCall& call) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [k, v] : call.params) params[k] = to_json(v);
  return {{"kind", "kernel"}, {"kernel", call.kernel}, {"params", params}};
}

KernelCall kernel_call_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kernel") || !j.at("kernel").is_string())
    throw Error(ErrorCode::SchemaError, "kernel step needs a string 'kernel' field");
  KernelCall call;
  call.kernel = j.at("kernel").get<std::string>();
  if (j.contains("params")) {
    if (!j.at("params").is_object()) throw Error(ErrorCode::SchemaError, "'params' must be an object");
    for (const auto& [k, v] : j.at("params").items()) call.params.emplace(k, param_from_json(v));
  }
  return call;
}

}  // namespace wfmini
