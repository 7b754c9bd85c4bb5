#include "wfmini/calibrator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "wfmini/error.hpp"

namespace wfmini {

using json = nlohmann::json;

namespace {

[[noreturn]] void schema(const std::string& what) { throw Error(ErrorCode::SchemaError, "profile: " + what); }

MetricTarget target_from_json(const json& j, const std::string& where, bool ranks) {
  if (!j.is_object()) schema(where + " must be an object");
  MetricTarget t;
  try {
    t.makespan = j.at("makespan_s").get<double>();
    t.read_bytes = j.value("read_bytes", 0.0);
    t.write_bytes = j.value("write_bytes", 0.0);
    if (ranks) t.num_ranks = j.value("num_ranks", 1);
  } catch (const json::exception& e) {
    schema(where + ": " + e.what());
  }
  if (!(t.makespan >= 0) || !(t.read_bytes >= 0) || !(t.write_bytes >= 0) || t.num_ranks < 0)
    schema(where + " has negative or invalid values");
  return t;
}

json target_json(const MetricTarget& t, bool ranks) {
  json j{{"makespan_s", t.makespan}, {"read_bytes", t.read_bytes}, {"write_bytes", t.write_bytes}};
  if (ranks) j["num_ranks"] = t.num_ranks;
  return j;
}

}  // namespace

TargetMetrics ingest_profile(const json& doc) {
  if (!doc.is_object()) schema("document must be an object");
  if (!doc.contains("workflow")) schema("missing 'workflow'");
  if (!doc.contains("categories") || !doc.at("categories").is_object() || doc.at("categories").empty())
    schema("needs at least one category");
  TargetMetrics t;
  t.workflow = target_from_json(doc.at("workflow"), "workflow", false);
  double reads = 0, writes = 0;
  for (const auto& [name, v] : doc.at("categories").items()) {
    auto c = target_from_json(v, "categories." + name, true);
    if (c.makespan > t.workflow.makespan * (1 + 1e-9))
      schema("category '" + name + "' makespan exceeds the workflow makespan");
    reads += c.read_bytes;
    writes += c.write_bytes;
    t.categories.emplace(name, c);
  }
  if (reads > t.workflow.read_bytes * (1 + 1e-9)) schema("category reads exceed the workflow total");
  if (writes > t.workflow.write_bytes * (1 + 1e-9)) schema("category writes exceed the workflow total");
  return t;
}

json to_json(const TargetMetrics& t) {
  json cats = json::object();
  for (const auto& [k, v] : t.categories) cats[k] = target_json(v, true);
  return {{"workflow", target_json(t.workflow, false)}, {"categories", cats}};
}

// ---------------------------------------------------------------------------
// knobs

namespace {

struct KnobTerm {
  bool divide = false;
  std::string name;  // empty for a literal
  double literal = 1.0;
};

std::vector<KnobTerm> parse_knob(std::string_view knob) {
  std::vector<KnobTerm> out;
  bool divide = false;
  std::size_t i = 0;
  while (i <= knob.size()) {
    auto j = knob.find_first_of("*/", i);
    if (j == std::string_view::npos) j = knob.size();
    auto tok = knob.substr(i, j - i);
    if (tok.empty()) throw Error(ErrorCode::UnmappedKnob, "malformed knob '" + std::string(knob) + "'");
    KnobTerm term;
    term.divide = divide;
    double v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec == std::errc() && p == tok.data() + tok.size()) {
      term.literal = v;
    } else {
      term.name = std::string(tok);
    }
    out.push_back(std::move(term));
    if (j == knob.size()) break;
    divide = knob[j] == '/';
    i = j + 1;
  }
  return out;
}

double named_knob(const WorkflowConfig& c, std::string_view name) {
  if (name == "epochs") return c.epochs;
  if (name == "data_scale") return c.data_scale;
  if (name == "phases") return c.phases;
  if (name == "steps") return c.steps;
  if (name.starts_with("ranks.")) {
    auto it = c.ranks.find(name.substr(6));
    if (it != c.ranks.end()) return it->second;
    throw Error(ErrorCode::UnmappedKnob, "config has no " + std::string(name));
  }
  throw Error(ErrorCode::UnmappedKnob, "unknown knob '" + std::string(name) + "'");
}

}  // namespace

double knob_value(const WorkflowConfig& c, std::string_view knob) {
  double v = 1.0;
  for (const auto& t : parse_knob(knob)) {
    const double x = t.name.empty() ? t.literal : named_knob(c, t.name);
    if (!(x > 0)) throw Error(ErrorCode::UnmappedKnob, "knob '" + std::string(knob) + "' is not positive");
    v = t.divide ? v / x : v * x;
  }
  return v;
}

std::vector<std::string> knob_names(std::string_view knob) {
  std::vector<std::string> out;
  if (knob.empty()) return out;
  for (auto& t : parse_knob(knob))
    if (!t.name.empty()) out.push_back(std::move(t.name));
  return out;
}

std::vector<std::size_t> tunable_tasks(const WorkflowSpec& spec, const Tunable& t) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < spec.tasks.size(); ++i)
    if (spec.tasks[i].category == t.target || spec.tasks[i].name == t.target) out.push_back(i);
  return out;
}

// ---------------------------------------------------------------------------
// calibration

namespace {

std::string key_of(const Tunable& t) { return t.target + "." + t.path; }

struct Group {
  std::string target;
  std::string metric;
  std::vector<std::size_t> tunables;
  double goal = 0.0;
};

double measured(const MetricsSummary& m, const Group& g) {
  const TaskMetrics* tm = nullptr;
  if (auto it = m.per_category.find(g.target); it != m.per_category.end()) {
    tm = &it->second;
  } else if (auto jt = m.per_task.find(g.target); jt != m.per_task.end()) {
    tm = &jt->second;
  }
  if (!tm) return 0.0;
  if (g.metric == "makespan") return tm->makespan;
  if (g.metric == "read_bytes") return static_cast<double>(tm->read_bytes);
  return static_cast<double>(tm->write_bytes);
}

double goal_of(const MetricTarget& t, const std::string& metric) {
  if (metric == "makespan") return t.makespan;
  if (metric == "read_bytes") return t.read_bytes;
  return t.write_bytes;
}

void apply(WorkflowSpec& spec, const std::vector<Tunable>& tunables, const std::vector<double>& values) {
  for (std::size_t i = 0; i < tunables.size(); ++i)
    for (auto ti : tunable_tasks(spec, tunables[i])) write_path(spec.tasks[ti], tunables[i].path, values[i]);
}

std::string describe_errors(const std::map<std::string, double, std::less<>>& errors) {
  std::ostringstream os;
  bool first = true;
  for (const auto& [k, v] : errors) {
    os << (first ? "" : ", ") << k << "=" << v;
    first = false;
  }
  return os.str();
}

}  // namespace

CalibrationResult calibrate(const WorkflowSpec& spec, const TargetMetrics& target, double ratio, double tolerance,
                            int max_iters, const Runner& runner) {
  if (!(ratio > 0 && ratio <= 1)) throw Error(ErrorCode::PreconditionFailed, "ratio must be in (0, 1]");
  if (!(tolerance > 0 && tolerance <= 0.5))
    throw Error(ErrorCode::PreconditionFailed, "tolerance must be in (0, 0.5]");
  if (max_iters < 1) throw Error(ErrorCode::PreconditionFailed, "max_iters must be >= 1");
  if (!runner) throw Error(ErrorCode::PreconditionFailed, "no runner");

  const auto& tunables = spec.tunables;
  std::vector<double> values(tunables.size());
  for (std::size_t i = 0; i < tunables.size(); ++i) {
    const auto tasks = tunable_tasks(spec, tunables[i]);
    if (tasks.empty())
      throw Error(ErrorCode::PreconditionFailed, "tunable target '" + tunables[i].target + "' matches no task");
    values[i] = read_path(spec.tasks[tasks.front()], tunables[i].path);
    if (!(values[i] > 0))
      throw Error(ErrorCode::PreconditionFailed, "tunable " + key_of(tunables[i]) + " must start positive");
  }

  std::vector<Group> groups;
  for (std::size_t i = 0; i < tunables.size(); ++i) {
    const auto& t = tunables[i];
    if (t.metric == "none") continue;
    auto g = std::find_if(groups.begin(), groups.end(),
                          [&](const Group& x) { return x.target == t.target && x.metric == t.metric; });
    if (g == groups.end()) {
      auto ct = target.categories.find(t.target);
      if (ct == target.categories.end())
        throw Error(ErrorCode::PreconditionFailed, "profile has no category '" + t.target + "'");
      const double goal = ratio * goal_of(ct->second, t.metric);
      if (goal <= 0) continue;
      groups.push_back({t.target, t.metric, {}, goal});
      g = std::prev(groups.end());
    }
    g->tunables.push_back(i);
  }
  if (groups.empty()) throw Error(ErrorCode::PreconditionFailed, "no tunable drives a non-zero target");

  auto step_from = [&](const std::vector<double>& base, const MetricsSummary& m, double step) {
    auto next = base;
    for (const auto& g : groups) {
      const double got = measured(m, g);
      const double damping = g.metric == "makespan" ? kMakespanDamping : 1.0;
      const double f = got > 0 ? std::pow(g.goal / got, damping * step) : 2.0;
      for (auto i : g.tunables) next[i] = base[i] * f;
    }
    return next;
  };

  CalibrationResult result;
  std::vector<double> accepted = values;
  MetricsSummary accepted_metrics;
  std::map<std::string, double, std::less<>> accepted_errors;
  double best = std::numeric_limits<double>::infinity();
  double step = 1.0;
  bool converged = false;

  for (int iter = 1; iter <= max_iters; ++iter) {
    WorkflowSpec candidate = spec;
    apply(candidate, tunables, values);
    MetricsSummary m;
    try {
      m = runner(candidate);
    } catch (const std::exception& e) {
      throw Error(ErrorCode::RunnerFailure, std::string("iteration ") + std::to_string(iter) + ": " + e.what());
    }
    CalibrationStep rec;
    rec.iteration = iter;
    for (const auto& g : groups) {
      const double err = std::abs(measured(m, g) - g.goal) / g.goal;
      rec.errors[g.target + ":" + g.metric] = err;
      rec.residual = std::max(rec.residual, err);
    }
    rec.accepted = rec.residual <= best;
    result.history.push_back(rec);

    if (rec.accepted) {
      best = rec.residual;
      accepted = values;
      accepted_metrics = m;
      accepted_errors = rec.errors;
      if (best <= tolerance) {
        converged = true;
        break;
      }
    } else {
      step *= 0.5;
    }
    values = step_from(accepted, accepted_metrics, step);
  }

  if (!converged)
    throw Error(ErrorCode::NonConvergence, "residual " + std::to_string(best) + " above tolerance " +
                                               std::to_string(tolerance) + " after " + std::to_string(max_iters) +
                                               " runs (" + describe_errors(accepted_errors) + ")");

  result.spec = spec;
  apply(result.spec, tunables, accepted);
  result.mapping = mapping_from_spec(result.spec, ratio);
  // continuous values, not the rounded ones
  for (std::size_t i = 0; i < tunables.size(); ++i)
    if (!tunables[i].knob.empty())
      result.mapping.param_factors[key_of(tunables[i])] =
          accepted[i] / knob_value(result.mapping.base_config, tunables[i].knob);
  result.spec.config = result.mapping.base_config;
  result.mapping.residual_error = accepted_errors;
  result.mapping.iterations = static_cast<int>(result.history.size());
  return result;
}

CalibrationMapping mapping_from_spec(const WorkflowSpec& spec, double ratio) {
  if (!(ratio > 0 && ratio <= 1)) throw Error(ErrorCode::PreconditionFailed, "ratio must be in (0, 1]");
  CalibrationMapping mp;
  mp.ratio = ratio;
  mp.base_config = spec.config.value_or(WorkflowConfig{});
  mp.tuned_spec = spec;
  mp.tuned_spec.config = mp.base_config;
  for (const auto& t : spec.tunables) {
    if (t.knob.empty()) continue;
    const auto tasks = tunable_tasks(spec, t);
    if (tasks.empty()) throw Error(ErrorCode::PreconditionFailed, "tunable target '" + t.target + "' matches no task");
    mp.param_factors[key_of(t)] = read_path(spec.tasks[tasks.front()], t.path) / knob_value(mp.base_config, t.knob);
  }
  return mp;
}

json to_json(const CalibrationMapping& m) {
  json factors = json::object(), residual = json::object();
  for (const auto& [k, v] : m.param_factors) factors[k] = v;
  for (const auto& [k, v] : m.residual_error) residual[k] = v;
  return {{"ratio", m.ratio},
          {"param_factors", factors},
          {"base_config", to_json(m.base_config)},
          {"residual_error", residual},
          {"iterations", m.iterations},
          {"tuned_spec", to_json(m.tuned_spec)}};
}

CalibrationMapping mapping_from_json(const json& doc) {
  CalibrationMapping m;
  try {
    m.ratio = doc.at("ratio").get<double>();
    for (const auto& [k, v] : doc.at("param_factors").items()) m.param_factors[k] = v.get<double>();
    m.base_config = config_from_json(doc.at("base_config"));
    if (doc.contains("residual_error"))
      for (const auto& [k, v] : doc.at("residual_error").items()) m.residual_error[k] = v.get<double>();
    m.iterations = doc.value("iterations", 0);
    m.tuned_spec = load_workflow(doc.at("tuned_spec"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("mapping: ") + e.what());
  }
  if (!(m.ratio > 0 && m.ratio <= 1)) throw Error(ErrorCode::SchemaError, "mapping: ratio must be in (0, 1]");
  for (const auto& [k, v] : m.param_factors)
    if (!(v > 0)) throw Error(ErrorCode::SchemaError, "mapping: factor " + k + " must be > 0");
  return m;
}

// ---------------------------------------------------------------------------
// derivation

namespace {

// Swaps the phase number in a task name: the first '_' token equal to it,
// otherwise trailing digits.
std::string rename_phase(const std::string& name, int from, int to) {
  const auto f = std::to_string(from), t = std::to_string(to);
  std::size_t begin = 0;
  while (begin <= name.size()) {
    auto end = name.find('_', begin);
    if (end == std::string::npos) end = name.size();
    if (begin > 0 && name.compare(begin, end - begin, f) == 0 && end - begin == f.size())
      return name.substr(0, begin) + t + name.substr(end);
    if (end == name.size()) break;
    begin = end + 1;
  }
  if (name.size() > f.size() && name.ends_with(f) && !std::isdigit(static_cast<unsigned char>(name[name.size() - f.size() - 1])))
    return name.substr(0, name.size() - f.size()) + t;
  throw Error(ErrorCode::ShapeMismatch, "cannot find phase " + f + " in task name '" + name + "'");
}

}  // namespace

WorkflowSpec reshape_phases(const WorkflowSpec& spec, int phases) {
  if (phases < 1) throw Error(ErrorCode::PreconditionFailed, "phases must be >= 1");
  std::map<std::string, int, std::less<>> phase_of;
  int last = 0;
  for (const auto& t : spec.tasks) {
    phase_of[t.name] = t.phase;
    last = std::max(last, t.phase);
  }
  if (last < 1) throw Error(ErrorCode::ShapeMismatch, "no phased tasks");
  WorkflowSpec out = spec;
  out.phases = phases;
  if (phases == last) return out;

  if (phases < last) {
    std::erase_if(out.tasks, [&](const TaskSpec& t) { return t.phase > phases; });
    std::erase_if(out.edges, [&](const auto& e) { return phase_of[e.first] > phases || phase_of[e.second] > phases; });
    return out;
  }

  if (last < 2) throw Error(ErrorCode::ShapeMismatch, "need two phases to repeat the phase pattern");
  for (int k = 1; k <= phases - last; ++k) {
    for (const auto& t : spec.tasks) {
      if (t.phase != last) continue;
      TaskSpec c = t;
      c.name = rename_phase(t.name, last, last + k);
      c.phase = last + k;
      out.tasks.push_back(std::move(c));
    }
    for (const auto& [a, b] : spec.edges) {
      if (phase_of[b] != last) continue;
      const int pa = phase_of[a];
      out.edges.emplace_back(pa >= 1 ? rename_phase(a, pa, pa + k) : a, rename_phase(b, last, last + k));
    }
  }
  // edges out of the last phase into unphased tasks follow the new last phase
  for (const auto& [a, b] : spec.edges)
    if (phase_of[a] == last && phase_of[b] == 0) out.edges.emplace_back(rename_phase(a, last, phases), b);
  validate_dag(out);
  return out;
}

WorkflowSpec derive_config(const CalibrationMapping& mapping, const WorkflowConfig& new_config) {
  validate_config(new_config);
  const auto& base = mapping.base_config;
  const auto unmapped = [](const std::string& what) { throw Error(ErrorCode::UnmappedKnob, what); };
  if (new_config.num_nodes != base.num_nodes || new_config.num_cpus != base.num_cpus ||
      new_config.num_gpus != base.num_gpus)
    unmapped("node and device counts are not mapped knobs");

  std::set<std::string> followed;
  for (const auto& t : mapping.tuned_spec.tunables)
    for (auto& n : knob_names(t.knob)) followed.insert(std::move(n));
  auto require = [&](const std::string& knob, bool changed) {
    if (changed && !followed.contains(knob)) unmapped("no tunable follows '" + knob + "'");
  };
  require("epochs", new_config.epochs != base.epochs);
  require("data_scale", new_config.data_scale != base.data_scale);
  require("steps", new_config.steps != base.steps);
  std::set<std::string> cats;
  for (const auto& [k, v] : base.ranks) cats.insert(k);
  for (const auto& [k, v] : new_config.ranks) cats.insert(k);
  for (const auto& c : cats) {
    auto a = base.ranks.find(c), b = new_config.ranks.find(c);
    if (a == base.ranks.end() || b == new_config.ranks.end()) unmapped("ranks." + c + " only in one config");
    require("ranks." + c, a->second != b->second);
  }

  WorkflowSpec spec = mapping.tuned_spec;
  if (new_config.phases != base.phases) {
    try {
      spec = reshape_phases(spec, new_config.phases);
    } catch (const Error& e) {
      unmapped(std::string("phases: ") + e.what());
    }
  }
  for (const auto& t : spec.tunables) {
    if (t.knob.empty()) continue;
    auto f = mapping.param_factors.find(t.target + "." + t.path);
    if (f == mapping.param_factors.end()) unmapped("mapping has no factor for " + t.target + "." + t.path);
    const double v = knob_value(new_config, t.knob) * f->second;
    for (auto ti : tunable_tasks(spec, t)) write_path(spec.tasks[ti], t.path, v);
  }
  spec.config = new_config;
  return spec;
}

}  // namespace wfmini
