#pragma once

#include <string_view>
#include <vector>

#include "wfmini/catalog.hpp"
#include "wfmini/seed.hpp"

namespace wfmini::kernels {

std::vector<KernelSpec> compute_kernels();
std::vector<KernelSpec> io_kernels();
std::vector<KernelSpec> comm_kernels();
std::vector<KernelSpec> copy_kernels();

inline std::vector<KernelSpec> builtin_kernels() {
  std::vector<KernelSpec> all;
  for (auto group : {compute_kernels, io_kernels, comm_kernels, copy_kernels}) {
    for (auto& k : group()) all.push_back(std::move(k));
  }
  return all;
}

inline std::uint64_t salted(std::uint64_t seed, std::string_view salt) { return seed ^ fnv1a64(salt); }


}  // namespace wfmini::kernels
