#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace wfmini {

enum class SlotKind { cpu, gpu };

struct Slot {
  int id = 0;          // global, node-major: node 0 cpus, node 0 gpus, node 1 cpus, ...
  SlotKind kind = SlotKind::cpu;
  int node = 0;
  int index = 0;       // per-kind global index, e.g. gpu 5 is the sixth gpu in the pool

  std::string label() const { return (kind == SlotKind::cpu ? "cpu" : "gpu") + std::to_string(index); }
};

class ResourcePool {
 public:
  ResourcePool() = default;
  ResourcePool(int num_nodes, int cpus_per_node, int gpus_per_node);

  int num_nodes() const noexcept { return num_nodes_; }
  int cpus_per_node() const noexcept { return cpus_per_node_; }
  int gpus_per_node() const noexcept { return gpus_per_node_; }
  int total_cpus() const noexcept { return num_nodes_ * cpus_per_node_; }
  int total_gpus() const noexcept { return num_nodes_ * gpus_per_node_; }

  const std::vector<Slot>& slots() const noexcept { return slots_; }
  const Slot& slot(int id) const { return slots_.at(static_cast<std::size_t>(id)); }

  friend bool operator==(const ResourcePool& a, const ResourcePool& b) {
    return a.num_nodes_ == b.num_nodes_ && a.cpus_per_node_ == b.cpus_per_node_ &&
           a.gpus_per_node_ == b.gpus_per_node_;
  }

 private:
  int num_nodes_ = 0;
  int cpus_per_node_ = 0;
  int gpus_per_node_ = 0;
  std::vector<Slot> slots_;
};

/// {num_nodes, cpus_per_node, gpus_per_node}
ResourcePool pool_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ResourcePool& pool);

}  // namespace wfmini
