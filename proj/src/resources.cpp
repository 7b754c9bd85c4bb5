#include "wfmini/resources.hpp"

#include "wfmini/error.hpp"

namespace wfmini {

ResourcePool::ResourcePool(int num_nodes, int cpus_per_node, int gpus_per_node)
    : num_nodes_(num_nodes), cpus_per_node_(cpus_per_node), gpus_per_node_(gpus_per_node) {
  if (num_nodes < 1 || cpus_per_node < 0 || gpus_per_node < 0 || cpus_per_node + gpus_per_node < 1)
    throw Error(ErrorCode::SchemaError, "resource pool needs >= 1 node and >= 1 slot per node");
  int id = 0;
  for (int n = 0; n < num_nodes; ++n) {
    for (int c = 0; c < cpus_per_node; ++c) slots_.push_back({id++, SlotKind::cpu, n, n * cpus_per_node + c});
    for (int g = 0; g < gpus_per_node; ++g) slots_.push_back({id++, SlotKind::gpu, n, n * gpus_per_node + g});
  }
}

ResourcePool pool_from_json(const nlohmann::json& doc) {
  try {
    return ResourcePool(doc.at("num_nodes").get<int>(), doc.at("cpus_per_node").get<int>(),
                        doc.value("gpus_per_node", 0));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("resources: ") + e.what());
  }
}

nlohmann::json to_json(const ResourcePool& pool) {
  return {{"num_nodes", pool.num_nodes()},
          {"cpus_per_node", pool.cpus_per_node()},
          {"gpus_per_node", pool.gpus_per_node()}};
}

}  // namespace wfmini
