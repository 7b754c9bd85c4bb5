#include "wfmini/cli.hpp"

#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "wfmini/calibrator.hpp"
#include "wfmini/catalog.hpp"
#include "wfmini/exemplars.hpp"
#include "wfmini/metrics.hpp"
#include "wfmini/workflow.hpp"

namespace wfmini {

namespace fs = std::filesystem;
using json = nlohmann::json;

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ScratchUnavailable:
    case ErrorCode::ShortRead:
    case ErrorCode::ShortWrite:
    case ErrorCode::CollectiveMismatch:
    case ErrorCode::SizeMismatch:
    case ErrorCode::InsufficientSlots:
    case ErrorCode::KernelFailure:
    case ErrorCode::TaskFailed:
    case ErrorCode::NonConvergence:
    case ErrorCode::RunnerFailure:
      return kExitRuntime;
    default:
      return kExitUser;
  }
}

namespace {

[[noreturn]] void user_error(const std::string& what) { throw Error(ErrorCode::PreconditionFailed, what); }

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::SchemaError, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) user_error("cannot write " + path.string());
}

std::uint64_t seed_from(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  const char* env = std::getenv("WFMINI_SEED");
  if (!env || !*env) return 0;
  std::uint64_t v = 0;
  const auto end = env + std::strlen(env);
  auto [p, ec] = std::from_chars(env, end, v);
  if (ec != std::errc() || p != end) user_error(std::string("WFMINI_SEED is not an integer: ") + env);
  return v;
}

// Smallest single-node pool that fits every task on its own.
ResourcePool fitting_pool(const WorkflowSpec& spec) {
  int cpus = 1, gpus = 0;
  for (const auto& t : spec.tasks) {
    cpus = std::max(cpus, t.num_ranks * t.cpus_per_rank);
    gpus = std::max(gpus, t.num_ranks * t.gpus_per_rank);
  }
  return ResourcePool(1, cpus, gpus);
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

fs::path summary_path(const fs::path& p) { return fs::is_directory(p) ? p / "summary.json" : p; }

// ---------------------------------------------------------------------------

struct Common {
  std::optional<std::uint64_t> seed;
  std::string scratch;
  std::optional<double> bandwidth;
  bool keep_scratch = false;

  void add_to(CLI::App* app) {
    app->add_option("--seed", seed, "Global seed (overrides WFMINI_SEED)");
    app->add_option("--scratch", scratch, "Scratch root (overrides WFMINI_SCRATCH)");
    app->add_option("--bandwidth", bandwidth, "Default host-device copy bandwidth in bytes/s")
        ->check(CLI::PositiveNumber);
    app->add_flag("--keep-scratch", keep_scratch, "Keep the per-run scratch directory");
  }

  ExecOptions options() const {
    ExecOptions o;
    o.seed = seed_from(seed);
    if (!scratch.empty()) o.scratch_root = scratch;
    o.keep_scratch = keep_scratch;
    if (bandwidth) o.runtime.copy_bandwidth = *bandwidth;
    return o;
  }
};

struct Source {
  std::string workflow;
  std::string exemplar;
  std::string resources;
  double scale = kDefaultDeskScale;
  std::optional<int> train_ranks;

  void add_to(CLI::App* app) {
    app->add_option("--workflow", workflow, "Workflow spec (JSON)");
    app->add_option("--exemplar", exemplar, "Exemplar selector, e.g. ip:serial_cpu:V1");
    app->add_option("--resources", resources, "Resource pool (JSON)");
    app->add_option("--scale", scale, "Desk scale for exemplars")->check(CLI::PositiveNumber);
    app->add_option("--train-ranks", train_ranks, "Training ranks for exemplars");
  }

  std::pair<WorkflowSpec, ResourcePool> load(bool need_resources) const {
    if (workflow.empty() == exemplar.empty()) user_error("give exactly one of --workflow and --exemplar");
    if (!workflow.empty()) {
      auto spec = load_workflow_file(workflow);
      if (resources.empty()) {
        if (need_resources) user_error("--resources is required with --workflow");
        return {spec, fitting_pool(spec)};
      }
      return {spec, pool_from_json(read_json(resources))};
    }
    const auto id = parse_exemplar_id(exemplar, scale);
    ExemplarOptions opts;
    opts.train_ranks = train_ranks;
    auto spec = exemplar_spec(id, opts);
    auto pool = resources.empty() ? exemplar_pool(id, spec) : pool_from_json(read_json(resources));
    return {spec, pool};
  }
};

// ---------------------------------------------------------------------------

int cmd_run(const Source& src, const Common& common, const std::string& out_dir, int repeat, std::ostream& out) {
  if (repeat < 1) user_error("--repeat must be >= 1");
  const auto [spec, pool] = src.load(true);
  const auto options = common.options();
  fs::create_directories(out_dir);
  for (int i = 1; i <= repeat; ++i) {
    const auto trace = execute(spec, pool, options);
    const auto summary = summarize(trace);
    const fs::path dir = fs::path(out_dir) / ("run-" + std::to_string(i));
    fs::create_directories(dir);
    write_trace_jsonl(trace, dir / "trace.jsonl");
    write_json(dir / "summary.json", to_json(summary));
    json run{{"run_id", trace.run_id}, {"seed", options.seed}, {"index", i},   {"resources", to_json(pool)},
             {"workflow", to_json(spec)}};
    if (!src.exemplar.empty()) {
      run["exemplar"] = src.exemplar;
      run["desk_scale"] = src.scale;
    }
    write_json(dir / "run.json", run);
    out << "run-" << i << " makespan_s=" << fmt(summary.makespan) << " read_bytes=" << summary.read_bytes
        << " write_bytes=" << summary.write_bytes << " cpu_util_pct=" << fmt(summary.cpu_util_pct, 3)
        << " gpu_util_pct=" << fmt(summary.gpu_util_pct, 3) << '\n';
  }
  return kExitOk;
}

int cmd_calibrate(const Source& src, const Common& common, const std::string& profile, double ratio,
                  double tolerance, int max_iters, const std::string& out_path, std::ostream& out) {
  if (profile.empty()) user_error("--profile is required");
  if (out_path.empty()) user_error("--out is required");
  const auto target = ingest_profile(read_json(profile));
  const auto [spec, pool] = src.load(false);
  const auto options = common.options();
  int run = 0;
  Runner runner = [&, pool = pool](const WorkflowSpec& s) {
    const auto m = summarize(execute(s, pool, options));
    out << "iteration " << ++run << " makespan_s=" << fmt(m.makespan) << '\n';
    return m;
  };
  const auto result = calibrate(spec, target, ratio, tolerance, max_iters, runner);
  for (const auto& h : result.history)
    out << "iteration " << h.iteration << " residual=" << fmt(h.residual) << (h.accepted ? "" : " (rejected)")
        << '\n';
  write_json(out_path, to_json(result.mapping));
  out << "converged in " << result.mapping.iterations << " runs, mapping written to " << out_path << '\n';
  return kExitOk;
}

int cmd_derive(const std::string& mapping_path, const std::string& config_path, const std::string& out_path,
               std::ostream& out) {
  if (mapping_path.empty() || config_path.empty()) user_error("--mapping and --config are required");
  const auto mapping = mapping_from_json(read_json(mapping_path));
  const auto spec = derive_config(mapping, config_from_json(read_json(config_path)));
  if (out_path.empty()) {
    out << to_json(spec).dump(2) << '\n';
  } else {
    write_json(out_path, to_json(spec));
    out << "derived spec written to " << out_path << '\n';
  }
  return kExitOk;
}

int cmd_validate(const std::vector<std::string>& originals, const std::vector<std::string>& minis,
                 double tolerance, const std::string& out_dir, std::ostream& out) {
  if (originals.empty() || minis.empty()) user_error("--original and --mini are required");
  if (!(tolerance >= 1.0)) user_error("--tolerance is a max/min spread and must be >= 1");
  std::vector<MetricsSummary> o, m;
  for (const auto& p : originals) o.push_back(read_summary(summary_path(p)));
  for (const auto& p : minis) m.push_back(read_summary(summary_path(p)));
  const auto report = compute_ratios(o, m, tolerance);
  for (std::size_t i = 0; i < report.per_config.size(); ++i) {
    const auto& r = report.per_config[i];
    out << "config " << i + 1 << " r_time=" << fmt(r.r_time) << " r_read=" << fmt(r.r_read)
        << " r_write=" << fmt(r.r_write) << '\n';
  }
  out << "spread time=" << fmt(report.spread_time) << " read=" << fmt(report.spread_read)
      << " write=" << fmt(report.spread_write) << " tolerance=" << fmt(tolerance) << " -> "
      << (report.constant ? "constant" : "NOT constant") << '\n';
  write_json(fs::path(out_dir) / "ratio-report.json", to_json(report));
  return report.constant ? kExitOk : kExitRuntime;
}

int cmd_repro(const std::string& runs_dir, std::string out_dir, std::ostream& out) {
  if (!fs::is_directory(runs_dir)) user_error("--runs must be a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(runs_dir))
    if (e.is_directory() && fs::exists(e.path() / "summary.json")) files.push_back(e.path() / "summary.json");
  std::sort(files.begin(), files.end());
  std::vector<MetricsSummary> summaries;
  for (const auto& f : files) summaries.push_back(read_summary(f));
  const auto rep = reproducibility_stats(summaries);
  out << rep.samples << " runs\n";
  for (const auto& [k, s] : rep.per_metric) out << "  " << k << ": " << s.formatted() << " (cv " << fmt(s.cv, 3) << ")\n";
  for (const auto& [k, s] : rep.per_stage) out << "  stage " << k << ": " << s.formatted() << '\n';
  if (out_dir.empty()) out_dir = runs_dir;
  write_json(fs::path(out_dir) / "variation-report.json", to_json(rep));
  return kExitOk;
}

int cmd_report(const std::string& trace_dir, const std::string& format, std::string out_dir, std::ostream& out) {
  const auto trace = read_trace_dir(trace_dir);
  const auto summary = summarize(trace);
  const auto tl = utilization_timeline(trace);
  const auto io = io_timeline(trace);
  if (out_dir.empty()) out_dir = trace_dir;
  const fs::path dir(out_dir);
  if (format == "csv") {
    out << "utilization.csv rows=" << write_utilization_csv(tl, dir / "utilization.csv") << '\n';
    out << "io-read.csv rows=" << write_io_csv(io, true, dir / "io-read.csv") << '\n';
    out << "io-write.csv rows=" << write_io_csv(io, false, dir / "io-write.csv") << '\n';
  } else {
    out << "utilization.svg bands=" << write_utilization_svg(tl, summary.makespan, dir / "utilization.svg") << '\n';
    out << "io.svg bars=" << write_io_svg(io, summary.makespan, dir / "io.svg") << '\n';
  }
  return kExitOk;
}

int cmd_kernels_list(std::ostream& out) {
  const auto& cat = KernelCatalog::instance();
  for (const auto& name : cat.names()) {
    const auto& k = cat.at(name);
    out << name << (k.needs_comm ? " [comm]" : "");
    for (const auto& p : k.params) out << ' ' << p.name << (p.required ? "" : "?");
    if (!k.description.empty()) out << "  -- " << k.description;
    out << '\n';
  }
  return kExitOk;
}

ParamValue parse_param(const KernelSpec& spec, const std::string& key, const std::string& text) {
  auto type = ParamType::string;
  bool known = false;
  for (const auto& p : spec.params)
    if (p.name == key) {
      type = p.type;
      known = true;
    }
  if (!known) {
    if (key == "repetitions" || key == "async") type = ParamType::integer;
    else if (key == "bandwidth") type = ParamType::real;
  }
  const auto bad = [&] { throw Error(ErrorCode::InvalidParameter, key + "=" + text); };
  switch (type) {
    case ParamType::integer: {
      std::int64_t v = 0;
      auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || p != text.data() + text.size()) bad();
      return v;
    }
    case ParamType::real: {
      double v = 0;
      auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || p != text.data() + text.size()) bad();
      return v;
    }
    case ParamType::dim_list: {
      // 64x64x64,32x16x8
      std::vector<DimTriple> dims;
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) {
        DimTriple d{};
        char x1 = 0, x2 = 0;
        std::stringstream is(item);
        if (!(is >> d[0] >> x1 >> d[1] >> x2 >> d[2]) || x1 != 'x' || x2 != 'x') bad();
        dims.push_back(d);
      }
      if (dims.empty()) bad();
      return dims;
    }
    case ParamType::string:
      break;
  }
  return text;
}

int cmd_kernels_bench(const std::string& name, const std::vector<std::string>& params, int trials, int threads,
                      std::ostream& out) {
  if (trials < 1) user_error("--trials must be >= 1");
  if (threads < 1) user_error("--threads must be >= 1");
  const auto& spec = KernelCatalog::instance().at(name);
  KernelCall call(name);
  for (const auto& p : params) {
    const auto eq = p.find('=');
    if (eq == std::string::npos || eq == 0) user_error("--param expects key=value, got '" + p + "'");
    call.params[p.substr(0, eq)] = parse_param(spec, p.substr(0, eq), p.substr(eq + 1));
  }
  KernelCatalog::instance().validate(call);

  ScratchSpace scratch(ScratchSpace::default_root() / ("bench-" + std::to_string(::getpid())));
  auto comms = Communicator::create(1);
  std::vector<double> times;
  try {
    for (int i = 0; i < trials; ++i) {
      KernelContext ctx;
      ctx.scratch = &scratch;
      ctx.threads = threads;
      if (spec.needs_comm) ctx.comm = &comms[0];
      const auto t0 = std::chrono::steady_clock::now();
      execute_kernel(call, ctx);
      times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      out << "trial " << i + 1 << " wall_s=" << fmt(times.back(), 6) << '\n';
    }
  } catch (...) {
    scratch.remove_all();
    throw;
  }
  scratch.remove_all();
  std::sort(times.begin(), times.end());
  const double median = times.size() % 2 ? times[times.size() / 2]
                                          : 0.5 * (times[times.size() / 2 - 1] + times[times.size() / 2]);
  out << name << " median_s=" << fmt(median, 6) << " min_s=" << fmt(times.front(), 6)
      << " max_s=" << fmt(times.back(), 6) << '\n';
  return kExitOk;
}

int cmd_exemplar(const std::string& selector, double scale, std::optional<int> train_ranks,
                 const std::string& out_path, const std::string& pool_out, std::ostream& out) {
  const auto id = parse_exemplar_id(selector, scale);
  ExemplarOptions opts;
  opts.train_ranks = train_ranks;
  const auto spec = exemplar_spec(id, opts);
  if (out_path.empty()) {
    out << to_json(spec).dump(2) << '\n';
  } else {
    write_json(out_path, to_json(spec));
    out << to_string(id) << ": " << spec.tasks.size() << " tasks, " << spec.edges.size() << " edges -> "
        << out_path << '\n';
  }
  if (!pool_out.empty()) write_json(pool_out, to_json(exemplar_pool(id, spec)));
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Workflow mini-apps: run, calibrate and validate synthetic workflows", "wfmini"};
  app.require_subcommand(1);

  Source src;
  Common common;

  auto* run = app.add_subcommand("run", "Execute a workflow or exemplar");
  std::string run_out = "runs";
  int repeat = 1;
  src.add_to(run);
  common.add_to(run);
  run->add_option("--out", run_out, "Output directory (run-<i>/ per repetition)");
  run->add_option("--repeat", repeat, "Number of sequential runs");

  auto* cal = app.add_subcommand("calibrate", "Tune a workflow against a profile, or derive a new config");
  std::string profile, cal_out;
  double ratio = 0.25, tolerance = 0.05;
  int max_iters = 5;
  src.add_to(cal);
  common.add_to(cal);
  cal->add_option("--profile", profile, "Original workflow profile (JSON)");
  cal->add_option("--ratio", ratio, "Target ratio in (0, 1]");
  cal->add_option("--tolerance", tolerance, "Relative error to stop at");
  cal->add_option("--max-iters", max_iters, "Maximum number of runs");
  cal->add_option("--out", cal_out, "Mapping output (JSON)");
  auto* derive = cal->add_subcommand("derive", "Mini-app spec for a new original config, without running");
  std::string mapping_path, config_path, derive_out;
  derive->add_option("--mapping", mapping_path, "Mapping from calibrate")->required();
  derive->add_option("--config", config_path, "New original config (JSON)")->required();
  derive->add_option("--out", derive_out, "Spec output (JSON); stdout when absent");

  auto* val = app.add_subcommand("validate", "Ratio report of mini-app against original summaries");
  std::vector<std::string> originals, minis;
  double spread = kRatioTolerance;
  std::string val_out = ".";
  val->add_option("--original", originals, "Original summaries, one per config")->required();
  val->add_option("--mini", minis, "Mini-app summaries, same order")->required();
  val->add_option("--tolerance", spread, "Allowed max/min spread");
  val->add_option("--out", val_out, "Directory for ratio-report.json");

  auto* rep = app.add_subcommand("repro", "Run-to-run variation over run directories");
  std::string runs_dir, rep_out;
  rep->add_option("--runs", runs_dir, "Directory holding run-<i>/ subdirectories")->required();
  rep->add_option("--out", rep_out, "Directory for variation-report.json");

  auto* report = app.add_subcommand("report", "Utilization and I/O timelines of a run");
  std::string trace_dir, format = "csv", report_out;
  report->add_option("--trace", trace_dir, "Run directory")->required();
  report->add_option("--format", format, "csv or svg")->check(CLI::IsMember({"csv", "svg"}));
  report->add_option("--out", report_out, "Output directory");

  auto* kern = app.add_subcommand("kernels", "Kernel catalog");
  kern->require_subcommand(1);
  auto* klist = kern->add_subcommand("list", "List kernels and parameters");
  auto* kbench = kern->add_subcommand("bench", "Time one kernel");
  std::string kname;
  std::vector<std::string> kparams;
  int trials = 5, threads = 1;
  kbench->add_option("--name", kname, "Kernel name")->required();
  kbench->add_option("--param", kparams, "key=value (repeatable)");
  kbench->add_option("--trials", trials, "Number of timed calls");
  kbench->add_option("--threads", threads, "Threads per call");

  auto* ex = app.add_subcommand("exemplar", "Export an exemplar workflow spec");
  std::string ex_id, ex_out, ex_pool;
  double ex_scale = kDefaultDeskScale;
  std::optional<int> ex_train;
  ex->add_option("--id", ex_id, "Selector family:model:config")->required();
  ex->add_option("--scale", ex_scale, "Desk scale")->check(CLI::PositiveNumber);
  ex->add_option("--train-ranks", ex_train, "Training ranks");
  ex->add_option("--out", ex_out, "Spec output (JSON); stdout when absent");
  ex->add_option("--resources-out", ex_pool, "Write the matching pool (JSON)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUser;
  }

  try {
    if (run->parsed()) return cmd_run(src, common, run_out, repeat, out);
    if (derive->parsed()) return cmd_derive(mapping_path, config_path, derive_out, out);
    if (cal->parsed()) return cmd_calibrate(src, common, profile, ratio, tolerance, max_iters, cal_out, out);
    if (val->parsed()) return cmd_validate(originals, minis, spread, val_out, out);
    if (rep->parsed()) return cmd_repro(runs_dir, rep_out, out);
    if (report->parsed()) return cmd_report(trace_dir, format, report_out, out);
    if (klist->parsed()) return cmd_kernels_list(out);
    if (kbench->parsed()) return cmd_kernels_bench(kname, kparams, trials, threads, out);
    if (ex->parsed()) return cmd_exemplar(ex_id, ex_scale, ex_train, ex_out, ex_pool, out);
  } catch (const Error& e) {
    err << "wfmini: " << e.what() << '\n';
    if (e.code() == ErrorCode::PreconditionFailed && run->parsed()) err << run->help();
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "wfmini: " << e.what() << '\n';
    return kExitUser;
  } catch (const std::exception& e) {
    err << "wfmini: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUser;
}

}  // namespace wfmini
