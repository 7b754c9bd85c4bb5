#include "wfmini/exemplars.hpp"

#include <algorithm>
#include <cmath>

#include "wfmini/catalog.hpp"
#include "wfmini/error.hpp"

namespace wfmini {

std::string_view to_string(Family f) noexcept {
  return f == Family::inverse_problem ? "ip" : "ddmd";
}

std::string_view to_string(Model m) noexcept {
  switch (m) {
    case Model::serial_cpu: return "serial_cpu";
    case Model::serial_cpu_gpu: return "serial_cpu_gpu";
    case Model::parallel_cpu: return "parallel_cpu";
    case Model::sync: return "sync";
    case Model::async: return "async";
  }
  return "serial_cpu";
}

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::InvalidExemplar, what); }

bool is_ip_model(Model m) {
  return m == Model::serial_cpu || m == Model::serial_cpu_gpu || m == Model::parallel_cpu;
}

using I = std::int64_t;

std::int64_t at_least_one(double v) { return std::max<std::int64_t>(1, std::llround(v)); }

ProgramStep call(std::string kernel, std::map<std::string, ParamValue, std::less<>> params = {}) {
  return ProgramStep::call(KernelCall(std::move(kernel), std::move(params)));
}

// Inverse problem, per unit desk scale and unit data_scale.
constexpr int kNumData = 4;
constexpr I kMatDim = 64;
constexpr double kSimMults = 30000;                 // per simulation task
constexpr double kSimRead = 2.0 * kGiB;             // per simulation task
constexpr double kSimWrite = 1.0 * kGiB;
constexpr double kTrainDataset = 4.0 * kGiB;        // read in full by every training rank
constexpr double kCheckpoint = 256.0 * kMiB;        // split across training ranks
constexpr double kTrainMultsPerEpoch = 300;
constexpr double kGradientDoubles = 1 << 20;

// DeepDriveMD. Durations come mostly from device copies over a slow link so
// that concurrent tasks overlap without competing for host cores.
constexpr double kLink = 4.0 * kMiB;          // bytes/s
constexpr double kMdCopyPerStep = 25600;      // bytes per MD step, each direction
constexpr double kMdWritePerStep = 1000;
constexpr double kMdReadPerStep = 500;
constexpr double kMdAxpy = 3.2768e6;
constexpr double kTrainCopyPerEpoch = 5e5;
constexpr double kModelBytes = 5e6;
constexpr double kSelectDoubles = 5e7;
constexpr double kAgentCopy = 5e6;
constexpr int kMdTasks = 12;

}  // namespace

int scaled_ranks(int ranks, double desk_scale) {
  return static_cast<int>(at_least_one(ranks * desk_scale));
}

void validate_exemplar(const ExemplarId& id) {
  if (!(id.desk_scale > 0)) invalid("desk scale must be > 0");
  if (id.family == Family::inverse_problem) {
    if (!is_ip_model(id.model)) invalid("inverse problem has no model " + std::string(to_string(id.model)));
    if (id.config < 1 || id.config > 3) invalid("inverse problem configs are V1-V3");
  } else {
    if (id.model != Model::sync && id.model != Model::async)
      invalid("deepdrivemd has no model " + std::string(to_string(id.model)));
    if (id.config < 1 || id.config > 2) invalid("deepdrivemd configs are V1-V2");
  }
}

ExemplarId parse_exemplar_id(std::string_view selector, double desk_scale) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : selector) {
    if (c == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  if (parts.size() != 3) invalid("exemplar selector is family:model:config, got '" + std::string(selector) + "'");
  ExemplarId id;
  id.desk_scale = desk_scale;
  if (parts[0] == "ip" || parts[0] == "inverse_problem") {
    id.family = Family::inverse_problem;
  } else if (parts[0] == "ddmd" || parts[0] == "deepdrivemd") {
    id.family = Family::deepdrivemd;
  } else {
    invalid("unknown exemplar family '" + parts[0] + "'");
  }
  static const std::map<std::string, Model, std::less<>> models{{"serial_cpu", Model::serial_cpu},
                                                                {"serial_cpu_gpu", Model::serial_cpu_gpu},
                                                                {"parallel_cpu", Model::parallel_cpu},
                                                                {"sync", Model::sync},
                                                                {"async", Model::async}};
  auto m = models.find(parts[1]);
  if (m == models.end()) invalid("unknown exemplar model '" + parts[1] + "'");
  id.model = m->second;
  if (parts[2].size() != 2 || (parts[2][0] != 'V' && parts[2][0] != 'v') || parts[2][1] < '1' || parts[2][1] > '9')
    invalid("exemplar config must be V1, V2 or V3");
  id.config = parts[2][1] - '0';
  validate_exemplar(id);
  return id;
}

std::string to_string(const ExemplarId& id) {
  return std::string(to_string(id.family)) + ":" + std::string(to_string(id.model)) + ":V" + std::to_string(id.config);
}

WorkflowConfig original_config(Family family, Model model, int config) {
  validate_exemplar({family, model, config, 1.0});
  WorkflowConfig c;
  if (family == Family::inverse_problem) {
    c.num_nodes = model == Model::parallel_cpu ? 8 : 4;
    c.num_cpus = model == Model::parallel_cpu ? 256 : 128;
    c.num_gpus = model == Model::serial_cpu_gpu ? 16 : 0;
    c.ranks = {{"sim", 128}, {"ml", model == Model::serial_cpu_gpu ? 16 : 4}};
    const bool gpu = model == Model::serial_cpu_gpu;
    c.epochs = config == 1 ? (gpu ? 1600 : 100) : (gpu ? 800 : 50);
    c.data_scale = config == 3 ? 2.0 : 1.0;
    c.phases = 3;
    c.steps = 1;
  } else {
    c.num_nodes = 3;
    c.num_cpus = 96;
    c.num_gpus = 12;
    c.ranks = {{"sim", kMdTasks}, {"ml", 1}, {"rest", 1}};
    c.epochs = config == 1 ? 100 : 150;
    c.data_scale = 1.0;
    c.phases = config == 1 ? 2 : 3;
    c.steps = config == 1 ? 4000 : 5000;
  }
  return c;
}

namespace {

// Mini-app epoch counts from the Table 2 m-app rows.
int mini_epochs(Family family, Model model, int config) {
  if (family == Family::deepdrivemd) return config == 1 ? 100 : 150;
  if (model == Model::serial_cpu_gpu) return config == 1 ? 200 : 100;
  return config == 1 ? 50 : 25;
}

TaskSpec ip_sim(int phase, int ranks, double s, double ds) {
  TaskSpec t;
  t.name = "sim" + std::to_string(phase);
  t.category = "sim";
  t.phase = phase;
  t.num_ranks = ranks;
  const double per = s * ds / (ranks * kNumData);
  t.program = {ProgramStep::loop(
      kNumData, {call("readNonMPI", {{"data_size", at_least_one(kSimRead * per)}}),
                 ProgramStep::loop(at_least_one(kSimMults * per), {call("matMulSimple2D", {{"dim", kMatDim}})}),
                 call("writeNonMPI", {{"data_size", at_least_one(kSimWrite * per)}})})};
  return t;
}

TaskSpec ip_train(int phase, int ranks, int epochs, bool gpu, double s, double ds) {
  TaskSpec t;
  t.name = "train" + std::to_string(phase);
  t.category = "train";
  t.phase = phase;
  t.num_ranks = ranks;
  t.gpus_per_rank = gpu ? 1 : 0;
  std::map<std::string, ParamValue, std::less<>> mm{{"dim_list", std::vector<DimTriple>{{kMatDim, kMatDim, kMatDim}}},
                                                     {"repetitions", at_least_one(kTrainMultsPerEpoch * s / ranks)}};
  if (gpu) mm["device"] = std::string("accelerator");
  t.program = {call("readNonMPI", {{"data_size", at_least_one(kTrainDataset * s * ds)}}),
               ProgramStep::loop(epochs, {call("matMulGeneral", mm),
                                          call("MPIallReduce", {{"data_size", at_least_one(kGradientDoubles * s)}})}),
               call("writeNonMPI", {{"data_size", at_least_one(kCheckpoint * s / ranks)}})};
  return t;
}

std::map<std::string, ParamValue, std::less<>> link_copy(double bytes) {
  return {{"data_size", at_least_one(bytes)}, {"bandwidth", kLink}};
}

std::map<std::string, ParamValue, std::less<>> on_device(std::map<std::string, ParamValue, std::less<>> p) {
  p["device"] = std::string("accelerator");
  return p;
}

}  // namespace

WorkflowSpec inverse_problem_spec(Model model, int config, double desk_scale, const ExemplarOptions& opts) {
  validate_exemplar({Family::inverse_problem, model, config, desk_scale});
  const auto cfg = original_config(Family::inverse_problem, model, config);
  const int epochs = mini_epochs(Family::inverse_problem, model, config);
  const int sim_ranks = scaled_ranks(cfg.ranks.at("sim"), desk_scale);
  const int ml_ranks = opts.train_ranks.value_or(scaled_ranks(cfg.ranks.at("ml"), desk_scale));
  if (ml_ranks < 1) invalid("training ranks must be >= 1");
  const bool gpu = model == Model::serial_cpu_gpu;

  WorkflowSpec spec;
  spec.execution_model = model == Model::parallel_cpu ? ExecutionModel::parallel : ExecutionModel::serial;
  spec.phases = cfg.phases;
  spec.config = cfg;
  for (int p = 1; p <= cfg.phases; ++p) {
    spec.tasks.push_back(ip_sim(p, sim_ranks, desk_scale, cfg.data_scale));
    spec.tasks.push_back(ip_train(p, ml_ranks, epochs, gpu, desk_scale, cfg.data_scale));
  }
  for (int p = 1; p <= cfg.phases; ++p) {
    const auto sim = "sim" + std::to_string(p), train = "train" + std::to_string(p);
    spec.edges.emplace_back(sim, train);
    if (p == 1) continue;
    const auto psim = "sim" + std::to_string(p - 1), ptrain = "train" + std::to_string(p - 1);
    if (spec.execution_model == ExecutionModel::serial) {
      spec.edges.emplace_back(ptrain, sim);
    } else {
      spec.edges.emplace_back(ptrain, train);
      spec.edges.emplace_back(psim, sim);
    }
  }
  spec.tunables = {
      {"sim", "program.0.body.0.params.data_size", "read_bytes", "data_scale/ranks.sim"},
      {"sim", "program.0.body.1.count", "makespan", "data_scale/ranks.sim"},
      {"sim", "program.0.body.2.params.data_size", "write_bytes", "data_scale/ranks.sim"},
      {"sim", "num_ranks", "none", "ranks.sim"},
      {"train", "program.0.params.data_size", "read_bytes", "data_scale"},
      {"train", "program.1.count", "makespan", "epochs"},
      {"train", "program.1.body.0.params.repetitions", "none", "1/ranks.ml"},
      {"train", "program.2.params.data_size", "write_bytes", "1/ranks.ml"},
      {"train", "num_ranks", "none", "ranks.ml"},
  };
  return spec;
}

WorkflowSpec deep_drive_md_spec(Model model, int config, double desk_scale, const ExemplarOptions& opts) {
  validate_exemplar({Family::deepdrivemd, model, config, desk_scale});
  const auto cfg = original_config(Family::deepdrivemd, model, config);
  const double s = desk_scale;
  const double steps = cfg.steps;
  const int epochs = mini_epochs(Family::deepdrivemd, model, config);
  const int ml_ranks = opts.train_ranks.value_or(cfg.ranks.at("ml"));
  if (ml_ranks < 1) invalid("training ranks must be >= 1");

  WorkflowSpec spec;
  spec.execution_model = ExecutionModel::sync;
  spec.phases = cfg.phases;
  spec.config = cfg;
  const auto md_write = at_least_one(kMdWritePerStep * steps * s);
  for (int p = 1; p <= cfg.phases; ++p) {
    const auto sfx = "_" + std::to_string(p);
    for (int j = 0; j < kMdTasks; ++j) {
      TaskSpec t;
      t.name = "sim" + sfx + "_" + std::to_string(j);
      t.category = "sim";
      t.phase = p;
      t.gpus_per_rank = 1;
      t.program = {
          call("dataCopyH2D", link_copy(kMdCopyPerStep * steps * s)),
          ProgramStep::loop(at_least_one(steps / 1000),
                            {call("axpy", on_device({{"data_size", at_least_one(kMdAxpy * s)}}))}),
          call("dataCopyD2H", link_copy(kMdCopyPerStep * steps * s)),
          call("readNonMPI", {{"data_size", at_least_one(kMdReadPerStep * steps * s)}}),
          call("writeNonMPI", {{"data_size", md_write}}),
      };
      spec.tasks.push_back(std::move(t));
    }
    TaskSpec train;
    train.name = "train" + sfx;
    train.category = "train";
    train.phase = p;
    train.num_ranks = ml_ranks;
    train.gpus_per_rank = 1;
    train.program = {
        call("readNonMPI", {{"data_size", md_write * kMdTasks}}),
        call("dataCopyH2D", link_copy(kTrainCopyPerEpoch * epochs * s / ml_ranks)),
        ProgramStep::loop(epochs, {call("matMulGeneral", on_device({{"dim_list", std::vector<DimTriple>{{32, 32, 32}}}})),
                                   call("MPIallReduce", {{"data_size", I{4096}}})}),
        call("dataCopyD2H", link_copy(kTrainCopyPerEpoch * epochs * s / ml_ranks)),
        call("writeNonMPI", {{"data_size", at_least_one(kModelBytes * s / ml_ranks)}}),
    };
    spec.tasks.push_back(std::move(train));

    TaskSpec select;
    select.name = "select" + sfx;
    select.category = "select";
    select.phase = p;
    select.program = {
        call("readNonMPI", {{"data_size", at_least_one(kModelBytes * s)}}),
        call("reduction", {{"data_size", at_least_one(kSelectDoubles * s)}}),
        call("writeNonMPI", {{"data_size", at_least_one(kModelBytes * s / 10)}}),
    };
    spec.tasks.push_back(std::move(select));

    TaskSpec agent;
    agent.name = "agent" + sfx;
    agent.category = "agent";
    agent.phase = p;
    agent.gpus_per_rank = 1;
    agent.program = {
        call("readNonMPI", {{"data_size", md_write * kMdTasks}}),
        call("dataCopyH2D", link_copy(kAgentCopy * s)),
        call("inplaceCompute", on_device({{"data_size", at_least_one(kSelectDoubles * s / 10)}, {"functor", std::string("sqrt")}})),
        call("dataCopyD2H", link_copy(kAgentCopy * s)),
        call("writeNonMPI", {{"data_size", at_least_one(kModelBytes * s / 10)}}),
    };
    spec.tasks.push_back(std::move(agent));

    for (int j = 0; j < kMdTasks; ++j) spec.edges.emplace_back("sim" + sfx + "_" + std::to_string(j), "train" + sfx);
    spec.edges.emplace_back("train" + sfx, "select" + sfx);
    spec.edges.emplace_back("select" + sfx, "agent" + sfx);
    if (p > 1)
      for (int j = 0; j < kMdTasks; ++j)
        spec.edges.emplace_back("agent_" + std::to_string(p - 1), "sim" + sfx + "_" + std::to_string(j));
  }
  spec.tunables = {
      {"sim", "program.0.params.data_size", "makespan", "steps"},
      {"sim", "program.2.params.data_size", "makespan", "steps"},
      {"sim", "program.1.count", "none", "steps"},
      {"sim", "program.3.params.data_size", "none", "steps"},
      {"sim", "program.4.params.data_size", "write_bytes", "steps"},
      {"train", "program.2.count", "makespan", "epochs"},
      {"train", "program.1.params.data_size", "makespan", "epochs/ranks.ml"},
      {"train", "program.3.params.data_size", "makespan", "epochs/ranks.ml"},
      {"train", "program.0.params.data_size", "read_bytes", "steps"},
      {"train", "program.4.params.data_size", "write_bytes", "1/ranks.ml"},
      {"train", "num_ranks", "none", "ranks.ml"},
      {"agent", "program.0.params.data_size", "read_bytes", "steps"},
  };
  if (model == Model::async) spec = async_overlap(spec);
  return spec;
}

WorkflowSpec exemplar_spec(const ExemplarId& id, const ExemplarOptions& opts) {
  validate_exemplar(id);
  return id.family == Family::inverse_problem ? inverse_problem_spec(id.model, id.config, id.desk_scale, opts)
                                              : deep_drive_md_spec(id.model, id.config, id.desk_scale, opts);
}

ResourcePool exemplar_pool(const ExemplarId& id, const WorkflowSpec& spec) {
  validate_exemplar(id);
  const auto cfg = original_config(id.family, id.model, id.config);
  if (id.family == Family::deepdrivemd) {
    // one spare gpu per node so the next phase's simulations fit next to training
    return ResourcePool(cfg.num_nodes, cfg.num_cpus / cfg.num_nodes, cfg.num_gpus / cfg.num_nodes + 1);
  }
  int cpus = static_cast<int>(std::ceil(cfg.num_cpus * id.desk_scale));
  int gpus = static_cast<int>(std::ceil(cfg.num_gpus * id.desk_scale));
  int sim_cpu = 0, train_cpu = 0, train_gpu = 0;
  for (const auto& t : spec.tasks) {
    (t.category == "sim" ? sim_cpu : train_cpu) = std::max(t.category == "sim" ? sim_cpu : train_cpu,
                                                           t.num_ranks * t.cpus_per_rank);
    train_gpu = std::max(train_gpu, t.num_ranks * t.gpus_per_rank);
  }
  if (spec.execution_model == ExecutionModel::serial) {
    cpus = std::max({cpus, sim_cpu, train_cpu});
  } else {
    cpus = std::max(cpus, sim_cpu + train_cpu);
  }
  gpus = std::max(gpus, train_gpu);
  const int nodes = cfg.num_nodes;
  return ResourcePool(nodes, (cpus + nodes - 1) / nodes, (gpus + nodes - 1) / nodes);
}

}  // namespace wfmini
