#pragma once

// Benchmark harness: runs every configured method on every instance under a
// budget, scores samples against the certified reference optimum, and
// aggregates per (method, n).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "portopt/budget.hpp"
#include "portopt/errors.hpp"
#include "portopt/heuristics.hpp"
#include "portopt/instances.hpp"
#include "portopt/io.hpp"
#include "portopt/model.hpp"
#include "portopt/qaoa.hpp"
#include "portopt/qubo.hpp"
#include "portopt/refsolver.hpp"
#include "portopt/samples.hpp"

namespace portopt {

namespace fs = std::filesystem;

inline const std::vector<int>& default_size_grid() {
  static const std::vector<int> grid{3, 5, 7, 10, 15, 20, 25, 30, 40, 50, 75, 100};
  return grid;
}

// ---------------------------------------------------------------------------
// Configuration

struct MethodSpec {
  Method method = Method::Greedy;
  std::vector<std::uint64_t> seeds{0};
  nlohmann::json config = nlohmann::json::object();
};

struct BenchConfig {
  std::vector<fs::path> instances;  // files or directories of instance JSON
  std::vector<MethodSpec> methods;
  TimeBudget budget;
  FeasibilityTolerance tolerance;
  int d = 3;
  double phi = 1000.0;
  double psi = 1000.0;
  bool parallel = false;

  void validate() const {
    budget.validate();
    if (methods.empty()) throw Error(ErrorCode::ParseError, "bench config needs at least one method");
    for (const auto& m : methods) {
      if (m.seeds.empty()) throw Error(ErrorCode::ParseError, std::string("no seeds for ") + to_string(m.method));
    }
  }
};

inline nlohmann::json to_json(const FeasibilityTolerance& t) {
  return {{"norm", t.norm}, {"ret", t.ret}, {"bound", t.bound}};
}

inline FeasibilityTolerance tolerance_from_json(const nlohmann::json& j) {
  FeasibilityTolerance t;
  t.norm = j.value("norm", t.norm);
  t.ret = j.value("ret", t.ret);
  t.bound = j.value("bound", t.bound);
  return t;
}

inline nlohmann::json to_json(const BenchConfig& c) {
  nlohmann::json methods = nlohmann::json::array();
  for (const auto& m : c.methods) {
    methods.push_back({{"method", to_string(m.method)}, {"seeds", m.seeds}, {"config", m.config}});
  }
  std::vector<std::string> paths;
  for (const auto& p : c.instances) paths.push_back(p.string());
  return {{"instances", paths}, {"methods", methods}, {"budget", to_json(c.budget)},
          {"tolerance", to_json(c.tolerance)}, {"d", c.d}, {"phi", c.phi}, {"psi", c.psi},
          {"parallel", c.parallel}};
}

/// Relative instance paths resolve against base_dir.
inline BenchConfig bench_config_from_json(const nlohmann::json& j, const fs::path& base_dir = {}) {
  try {
    BenchConfig c;
    for (const auto& p : j.at("instances")) {
      fs::path path = p.get<std::string>();
      if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
      c.instances.push_back(path);
    }
    for (const auto& m : j.at("methods")) {
      MethodSpec spec;
      if (m.is_string()) {
        spec.method = parse_method(m.get<std::string>());
      } else {
        spec.method = parse_method(m.at("method").get<std::string>());
        if (m.contains("seeds")) spec.seeds = m.at("seeds").get<std::vector<std::uint64_t>>();
        if (m.contains("config")) spec.config = m.at("config");
      }
      c.methods.push_back(std::move(spec));
    }
    if (j.contains("budget")) c.budget = budget_from_json(j.at("budget"));
    if (j.contains("tolerance")) c.tolerance = tolerance_from_json(j.at("tolerance"));
    c.d = j.value("d", c.d);
    c.phi = j.value("phi", c.phi);
    c.psi = j.value("psi", c.psi);
    c.parallel = j.value("parallel", c.parallel);
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("bench config: ") + e.what());
  }
}

inline BenchConfig load_bench_config(const fs::path& path) {
  return bench_config_from_json(io::read_json(path), path.parent_path());
}

inline bool is_reference_file(const fs::path& p) {
  const std::string name = p.filename().string();
  return name.size() > 9 && name.compare(name.size() - 9, 9, ".ref.json") == 0;
}

/// Expands directories into their instance files (sorted; reference caches skipped).
inline std::vector<fs::path> resolve_instance_paths(const std::vector<fs::path>& entries) {
  std::vector<fs::path> out;
  for (const auto& e : entries) {
    if (fs::is_directory(e)) {
      std::vector<fs::path> found;
      for (const auto& f : fs::directory_iterator(e)) {
        if (f.is_regular_file() && f.path().extension() == ".json" && !is_reference_file(f.path())) {
          found.push_back(f.path());
        }
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else if (fs::exists(e)) {
      out.push_back(e);
    } else {
      throw Error(ErrorCode::IoError, "instance path not found: " + e.string());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Metrics

enum class ThetaMode { Ratio, Absolute };

inline const char* to_string(ThetaMode m) noexcept { return m == ThetaMode::Ratio ? "ratio" : "absolute"; }

struct Theta {
  double value = 0.0;
  ThetaMode mode = ThetaMode::Ratio;
};

inline Theta approximation_ratio(double f_m, double f_opt) {
  if (f_opt < 0.0) throw Error(ErrorCode::InvalidOptimum, "reference optimum must be >= 0");
  if (f_opt <= 1e-12) return {f_m - f_opt, ThetaMode::Absolute};
  return {f_m / f_opt, ThetaMode::Ratio};
}

struct SolverReport {
  Method method = Method::Greedy;
  std::string instance_id;
  int n = 0;
  std::uint64_t seed = 0;
  std::optional<double> f_m;
  double f_opt = 0.0;
  std::optional<Theta> theta;
  std::size_t feasible_samples = 0;
  std::size_t total_samples = 0;
  double wall_time_s = 0.0;
  // Best objective among samples feasible with zero slack.
  std::optional<double> f_exact;
  std::size_t exact_feasible_samples = 0;
  std::string error;  // empty when the run completed
};

struct AggregateRow {
  Method method = Method::Greedy;
  int n = 0;
  std::optional<double> theta_mean;
  std::optional<double> theta_std;
  double feasibility_pct = 0.0;
  double mean_samples = 0.0;
  std::size_t instances = 0;
};

// ---------------------------------------------------------------------------
// Running one method

struct QuboSettings {
  int d = 3;
  double phi = 1000.0;
  double psi = 1000.0;
};

namespace detail {

/// Decodes and judges samples as they stream out of a sampler.
struct Evaluator {
  const Instance* inst;
  const DecodeMeta* meta;  // null for weight-valued methods
  FeasibilityTolerance tol;
  BudgetClock* clock;
  SolverReport* rep;

  void operator()(const Sample& s) const {
    ++rep->total_samples;
    const Vector w = s.is_bitstring() ? decode(s.bits(), *meta) : s.weights();
    const double n = static_cast<double>(inst->n);
    clock->charge(n * n + n);
    if (!is_feasible(Variant::MinVola, w, *inst, tol)) return;
    const double f = portfolio_volatility(w, *inst);
    ++rep->feasible_samples;
    if (!rep->f_m || f < *rep->f_m) rep->f_m = f;
    if (is_feasible(Variant::MinVola, w, *inst, FeasibilityTolerance::exact())) {
      ++rep->exact_feasible_samples;
      if (!rep->f_exact || f < *rep->f_exact) rep->f_exact = f;
    }
  }
};

template <class T>
std::optional<T> opt_value(const nlohmann::json& j, const char* key) {
  if (j.contains(key) && !j.at(key).is_null()) return j.at(key).get<T>();
  return std::nullopt;
}

inline AnnealConfig anneal_config_from_json(const nlohmann::json& j) {
  AnnealConfig c;
  c.t0 = opt_value<double>(j, "t0");
  c.alpha = opt_value<double>(j, "alpha");
  c.final_ratio = j.value("final_ratio", c.final_ratio);
  c.sweeps = j.value("sweeps", c.sweeps);
  return c;
}

inline TabuConfig tabu_config_from_json(const nlohmann::json& j) {
  TabuConfig c;
  c.tenure = opt_value<int>(j, "tenure");
  c.stagnation_limit = opt_value<std::size_t>(j, "stagnation_limit");
  return c;
}

}  // namespace detail

/// Runs one (method, instance, seed) cell. QUBO construction is excluded
/// from the budget; sampling and decoding are charged to it. Failures are
/// recorded in the report.
inline SolverReport run_method(Method method, const Instance& inst, double f_opt, const TimeBudget& budget,
                               std::uint64_t seed, const FeasibilityTolerance& tol,
                               const QuboSettings& qs = {}, const nlohmann::json& config = nlohmann::json::object()) {
  SolverReport rep;
  rep.method = method;
  rep.instance_id = inst.id;
  rep.n = inst.n;
  rep.seed = seed;
  rep.f_opt = f_opt;
  const auto start = std::chrono::steady_clock::now();
  try {
    std::optional<QuboProblem> q;
    if (is_qubo_method(method)) q = build_qubo(inst, qs.d, qs.phi, qs.psi);
    BudgetClock clock(budget);
    detail::Evaluator eval{&inst, q ? &q->meta : nullptr, tol, &clock, &rep};
    switch (method) {
      case Method::Random: random_sample(*q, clock, seed, eval); break;
      case Method::SteepestDescent:
        steepest_descent(*q, clock, seed, config.value("restarts", std::size_t{0}), eval);
        break;
      case Method::SimulatedAnnealing:
        simulated_annealing(*q, clock, seed, detail::anneal_config_from_json(config), eval);
        break;
      case Method::Tabu: tabu_search(*q, clock, seed, detail::tabu_config_from_json(config), eval); break;
      case Method::Greedy: minvola_greedy(inst, config.value("delta", 0.01), clock, eval); break;
      case Method::QaoaGrid:
      case Method::QaoaLr:
      case Method::QaoaOpt: {
        QaoaConfig qc = qaoa_config_from_json(config);
        run_qaoa(method, *q, clock, seed, qc, eval);
        break;
      }
      case Method::Qp: {
        const QpSolution sol = solve_qp(Variant::MinVola, inst);
        Sample s;
        s.payload = sol.w;
        s.energy = sol.objective;
        s.source = Method::Qp;
        eval(s);
        break;
      }
    }
    if (rep.f_m) rep.theta = approximation_ratio(*rep.f_m, f_opt);
  } catch (const std::exception& e) {
    rep.error = e.what();
    if (rep.feasible_samples == 0) rep.theta.reset();
  }
  rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

// ---------------------------------------------------------------------------
// Reference optimum cache

inline fs::path reference_path(const fs::path& instance_path) {
  fs::path p = instance_path;
  p.replace_filename(instance_path.stem().string() + ".ref.json");
  return p;
}

/// Loads the cached MinVola reference beside the instance, or solves and
/// caches it. Uncertified references are refused.
inline QpSolution reference_solution(const fs::path& instance_path, const Instance& inst, bool use_cache = true) {
  const fs::path ref = reference_path(instance_path);
  if (use_cache && fs::exists(ref)) {
    QpSolution s = solution_from_json(io::read_json(ref));
    if (s.variant == Variant::MinVola && static_cast<int>(s.w.size()) == inst.n) {
      if (!s.converged) throw Error(ErrorCode::NotConverged, "cached reference " + ref.string() + " is uncertified");
      return s;
    }
  }
  QpSolution s = solve_qp(Variant::MinVola, inst);
  if (!s.converged) {
    throw Error(ErrorCode::NotConverged, "reference solve for " + inst.id + " did not certify");
  }
  if (use_cache) io::write_json(ref, to_json(s));
  return s;
}

// ---------------------------------------------------------------------------
// Orchestration

inline unsigned worker_limit() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PORTOPT_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) hw = std::min(hw, static_cast<unsigned>(v));
  }
  return hw;
}

struct BenchResult {
  std::vector<SolverReport> reports;
  std::vector<std::string> instance_ids;
};

/// Reports come back in (instance, method, seed) order whatever the
/// execution mode.
inline BenchResult run_bench(const BenchConfig& cfg, bool use_cache = true) {
  cfg.validate();
  const std::vector<fs::path> paths = resolve_instance_paths(cfg.instances);
  if (paths.empty()) throw Error(ErrorCode::IoError, "no instances found");
  std::vector<Instance> instances;
  std::vector<double> f_opt;
  for (const auto& p : paths) {
    instances.push_back(load_instance(p));
    f_opt.push_back(reference_solution(p, instances.back(), use_cache).objective);
  }
  struct Task {
    std::size_t instance;
    const MethodSpec* spec;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    for (const auto& spec : cfg.methods) {
      for (std::uint64_t seed : spec.seeds) tasks.push_back({i, &spec, seed});
    }
  }
  const QuboSettings qs{cfg.d, cfg.phi, cfg.psi};
  BenchResult out;
  out.reports.resize(tasks.size());
  auto run = [&](std::size_t k) {
    const Task& t = tasks[k];
    out.reports[k] = run_method(t.spec->method, instances[t.instance], f_opt[t.instance], cfg.budget, t.seed,
                                cfg.tolerance, qs, t.spec->config);
  };
  const unsigned workers = cfg.parallel ? std::min<unsigned>(worker_limit(), static_cast<unsigned>(tasks.size())) : 1;
  if (workers <= 1) {
    for (std::size_t k = 0; k < tasks.size(); ++k) run(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < tasks.size(); k = next++) run(k);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (const auto& inst : instances) out.instance_ids.push_back(inst.id);
  return out;
}

// ---------------------------------------------------------------------------
// Aggregation

inline std::vector<AggregateRow> aggregate(const std::vector<SolverReport>& reports) {
  if (reports.empty()) throw Error(ErrorCode::ParseError, "aggregate needs at least one report");
  std::map<std::pair<Method, int>, std::vector<const SolverReport*>> groups;
  for (const auto& r : reports) groups[{r.method, r.n}].push_back(&r);
  std::vector<AggregateRow> rows;
  for (const auto& [key, group] : groups) {
    AggregateRow row;
    row.method = key.first;
    row.n = key.second;
    row.instances = group.size();
    std::vector<double> thetas, samples;
    std::size_t feasible = 0;
    for (const auto* r : group) {
      if (r->theta) thetas.push_back(r->theta->value);
      if (r->feasible_samples > 0) ++feasible;
      samples.push_back(static_cast<double>(r->total_samples));
    }
    // Sorted sums keep the result independent of report order.
    std::sort(thetas.begin(), thetas.end());
    std::sort(samples.begin(), samples.end());
    if (!thetas.empty()) {
      double sum = 0.0;
      for (double t : thetas) sum += t;
      const double mean = sum / static_cast<double>(thetas.size());
      double ss = 0.0;
      for (double t : thetas) ss += (t - mean) * (t - mean);
      row.theta_mean = mean;
      row.theta_std = std::sqrt(ss / static_cast<double>(thetas.size()));
    }
    row.feasibility_pct = 100.0 * static_cast<double>(feasible) / static_cast<double>(group.size());
    double total = 0.0;
    for (double s : samples) total += s;
    row.mean_samples = total / static_cast<double>(group.size());
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

inline nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline std::string opt_csv(const std::optional<double>& v) { return v ? io::format_double(*v) : std::string(); }

}  // namespace detail

inline nlohmann::json to_json(const SolverReport& r) {
  return {{"method", to_string(r.method)},
          {"n", r.n},
          {"instance_id", r.instance_id},
          {"seed", r.seed},
          {"f_m", detail::opt_json(r.f_m)},
          {"f_opt", r.f_opt},
          {"theta", r.theta ? nlohmann::json(r.theta->value) : nlohmann::json(nullptr)},
          {"theta_mode", r.theta ? nlohmann::json(to_string(r.theta->mode)) : nlohmann::json(nullptr)},
          {"feasible_samples", r.feasible_samples},
          {"total_samples", r.total_samples},
          {"wall_time_s", r.wall_time_s},
          {"f_exact", detail::opt_json(r.f_exact)},
          {"exact_feasible_samples", r.exact_feasible_samples},
          {"error", r.error}};
}

inline SolverReport report_from_json(const nlohmann::json& j) {
  try {
    SolverReport r;
    r.method = parse_method(j.at("method").get<std::string>());
    r.n = j.at("n").get<int>();
    r.instance_id = j.at("instance_id").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.f_m = detail::opt_value<double>(j, "f_m");
    r.f_opt = j.at("f_opt").get<double>();
    if (auto t = detail::opt_value<double>(j, "theta")) {
      const std::string mode = j.value("theta_mode", std::string("ratio"));
      r.theta = Theta{*t, mode == "absolute" ? ThetaMode::Absolute : ThetaMode::Ratio};
    }
    r.feasible_samples = j.at("feasible_samples").get<std::size_t>();
    r.total_samples = j.at("total_samples").get<std::size_t>();
    r.wall_time_s = j.at("wall_time_s").get<double>();
    r.f_exact = detail::opt_value<double>(j, "f_exact");
    r.exact_feasible_samples = j.value("exact_feasible_samples", std::size_t{0});
    r.error = j.value("error", std::string());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("report JSON: ") + e.what());
  }
}

inline nlohmann::json to_json(const AggregateRow& r) {
  return {{"method", to_string(r.method)},
          {"n", r.n},
          {"theta_mean", detail::opt_json(r.theta_mean)},
          {"theta_std", detail::opt_json(r.theta_std)},
          {"feasibility_pct", r.feasibility_pct},
          {"mean_samples", r.mean_samples},
          {"instances", r.instances}};
}

inline AggregateRow aggregate_row_from_json(const nlohmann::json& j) {
  try {
    AggregateRow r;
    r.method = parse_method(j.at("method").get<std::string>());
    r.n = j.at("n").get<int>();
    r.theta_mean = detail::opt_value<double>(j, "theta_mean");
    r.theta_std = detail::opt_value<double>(j, "theta_std");
    r.feasibility_pct = j.at("feasibility_pct").get<double>();
    r.mean_samples = j.at("mean_samples").get<double>();
    r.instances = j.value("instances", std::size_t{0});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("aggregate JSON: ") + e.what());
  }
}

template <class T>
nlohmann::json to_json_array(const std::vector<T>& items) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& it : items) a.push_back(to_json(it));
  return a;
}

inline std::vector<SolverReport> reports_from_json(const nlohmann::json& j) {
  const nlohmann::json& arr = j.is_object() && j.contains("reports") ? j.at("reports") : j;
  if (!arr.is_array()) throw Error(ErrorCode::ParseError, "expected an array of reports");
  std::vector<SolverReport> out;
  for (const auto& e : arr) out.push_back(report_from_json(e));
  return out;
}

inline std::vector<AggregateRow> aggregate_rows_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorCode::ParseError, "expected an array of aggregate rows");
  std::vector<AggregateRow> out;
  for (const auto& e : j) out.push_back(aggregate_row_from_json(e));
  return out;
}

inline const char* kReportCsvHeader =
    "method,n,instance_id,seed,f_m,f_opt,theta,theta_mode,feasible_samples,total_samples,wall_time_s";
inline const char* kAggregateCsvHeader = "method,n,theta_mean,theta_std,feasibility_pct,mean_samples";

inline std::string reports_csv(const std::vector<SolverReport>& reports) {
  std::ostringstream out;
  out << kReportCsvHeader << '\n';
  for (const auto& r : reports) {
    out << to_string(r.method) << ',' << r.n << ',' << r.instance_id << ',' << r.seed << ','
        << detail::opt_csv(r.f_m) << ',' << io::format_double(r.f_opt) << ','
        << (r.theta ? io::format_double(r.theta->value) : "") << ',' << (r.theta ? to_string(r.theta->mode) : "")
        << ',' << r.feasible_samples << ',' << r.total_samples << ',' << io::format_double(r.wall_time_s) << '\n';
  }
  return out.str();
}

inline std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
  if (rows.empty()) throw Error(ErrorCode::ParseError, "no rows to emit");
  std::ostringstream out;
  out << kAggregateCsvHeader << '\n';
  for (const auto& r : rows) {
    out << to_string(r.method) << ',' << r.n << ',' << detail::opt_csv(r.theta_mean) << ','
        << detail::opt_csv(r.theta_std) << ',' << io::format_double(r.feasibility_pct) << ','
        << io::format_double(r.mean_samples) << '\n';
  }
  return out.str();
}

enum class ReportFormat { Csv, Json };

inline void emit_report(const std::vector<AggregateRow>& rows, ReportFormat format, const fs::path& path) {
  if (rows.empty()) throw Error(ErrorCode::ParseError, "no rows to emit");
  if (format == ReportFormat::Csv) {
    io::write_atomic(path, aggregate_csv(rows));
  } else {
    io::write_json(path, to_json_array(rows));
  }
}

/// Writes reports.{json,csv}, aggregate.{json,csv} and meta.json into dir.
inline void write_bench_outputs(const fs::path& dir, const BenchConfig& cfg, const BenchResult& res) {
  const auto rows = aggregate(res.reports);
  io::write_json(dir / "reports.json", to_json_array(res.reports));
  io::write_atomic(dir / "reports.csv", reports_csv(res.reports));
  io::write_json(dir / "aggregate.json", to_json_array(rows));
  io::write_atomic(dir / "aggregate.csv", aggregate_csv(rows));
  io::write_json(dir / "meta.json",
                 {{"config", to_json(cfg)},
                  {"instances", res.instance_ids},
                  {"budget_accounting", "QUBO construction excluded; sampling and decoding included"}});
}

}  // namespace portopt
