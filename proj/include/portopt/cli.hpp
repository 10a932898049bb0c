#pragma once

// Command-line front end. dispatch() returns the process exit code:
// 0 success, 1 domain error, 2 usage error.

#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "portopt/bench.hpp"
#include "portopt/heuristics.hpp"
#include "portopt/instances.hpp"
#include "portopt/io.hpp"
#include "portopt/qaoa.hpp"
#include "portopt/qubo.hpp"
#include "portopt/refsolver.hpp"
#include "portopt/samples.hpp"

namespace portopt::cli {

namespace detail {

inline const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names{"greedy", "sa", "tabu", "sd", "random",
                                              "qaoa-grid", "qaoa-lr", "qaoa-opt", "qp"};
  return names;
}

inline void print_config(std::ostream& err, const std::string& cmd, const nlohmann::json& cfg) {
  err << "config " << cmd << ": " << cfg.dump() << '\n';
}

struct GenArgs {
  std::string prices, out, variant = "minvola";
  int n = 0, count = 10;
  std::uint64_t seed = 0;
};

struct QuboArgs {
  std::string instance, out;
  int d = 3;
  double phi = 1000.0, psi = 1000.0;
};

struct SolveArgs {
  std::string instance, method, out, variant, budget_mode = "wall";
  double time_limit = 60.0;
  std::uint64_t seed = 0;
  int p = 1;
  int d = 3;
  double phi = 1000.0, psi = 1000.0;
  std::size_t max_samples = 0;
  bool trace = false;
};

struct BenchArgs {
  std::string config, out_dir;
  bool no_cache = false;
};

struct ReportArgs {
  std::string in, format = "csv";
  bool aggregate = false;
};

inline int run_gen(const GenArgs& a, std::ostream& out, std::ostream& err) {
  print_config(err, "gen", {{"prices", a.prices}, {"n", a.n}, {"count", a.count}, {"seed", a.seed},
                            {"variant", a.variant}, {"out", a.out}});
  const AssetUniverse uni = estimate_universe(load_price_csv(a.prices));
  BuildOptions opts;
  opts.variant = parse_variant(a.variant);
  for (int k = 0; k < a.count; ++k) {
    Instance inst = build_instance(uni, a.n, a.seed + static_cast<std::uint64_t>(k), opts);
    const fs::path path = fs::path(a.out) / ("n" + std::to_string(a.n) + "_" + std::to_string(k) + ".json");
    save_instance(path, inst);
    out << path.string() << '\n';
  }
  return 0;
}

inline int run_qubo(const QuboArgs& a, std::ostream& out, std::ostream& err) {
  print_config(err, "qubo", {{"instance", a.instance}, {"d", a.d}, {"phi", a.phi}, {"psi", a.psi}, {"out", a.out}});
  const Instance inst = load_instance(a.instance);
  QuboProblem q = build_qubo(inst, a.d, a.phi, a.psi);
  q.instance_ref = a.instance;
  io::write_json(a.out, to_json(q));
  out << "num_vars=" << q.num_vars() << " offset=" << io::format_double(q.offset()) << '\n';
  return 0;
}

/// Keeps the lowest-energy sample and a count.
struct BestSink {
  std::optional<Sample>* best;
  std::size_t* count;
  void operator()(const Sample& s) const {
    ++*count;
    if (!*best || s.energy < (*best)->energy) *best = s;
  }
};

inline int run_solve(const SolveArgs& a, std::ostream& out, std::ostream& err) {
  const Method method = parse_method(a.method);
  const Instance inst = load_instance(a.instance);
  TimeBudget budget = a.budget_mode == "work" ? TimeBudget::work(a.time_limit) : TimeBudget::seconds(a.time_limit);
  budget.max_samples = a.max_samples;
  const Variant variant = a.variant.empty() ? inst.variant : parse_variant(a.variant);
  print_config(err, "solve",
               {{"instance", a.instance}, {"method", a.method}, {"time_limit", a.time_limit}, {"seed", a.seed},
                {"p", a.p}, {"d", a.d}, {"phi", a.phi}, {"psi", a.psi}, {"variant", to_string(variant)},
                {"budget", to_json(budget)}, {"trace", a.trace}, {"out", a.out}});

  if (method == Method::Qp) {
    const QpSolution sol = solve_qp(variant, inst);
    out << "w=" << nlohmann::json(std::vector<double>(sol.w.data(), sol.w.data() + sol.w.size())).dump() << '\n';
    out << "objective=" << io::format_double(sol.objective) << " converged=" << (sol.converged ? "true" : "false")
        << " iterations=" << sol.iterations << '\n';
    if (!a.out.empty()) io::write_json(a.out, to_json(sol));
    return sol.converged ? 0 : 1;
  }

  SampleSet set{method, {{"budget", to_json(budget)}}, a.seed, {}};
  std::optional<Sample> best;
  std::size_t count = 0;
  BudgetClock clock(budget);
  std::optional<QuboProblem> q;
  if (is_qubo_method(method)) {
    q = build_qubo(inst, a.d, a.phi, a.psi);
    set.config["qubo"] = {{"d", a.d}, {"phi", a.phi}, {"psi", a.psi}};
  }
  auto run = [&](auto&& sink) {
    switch (method) {
      case Method::Random: random_sample(*q, clock, a.seed, sink); break;
      case Method::SteepestDescent: steepest_descent(*q, clock, a.seed, 0, sink); break;
      case Method::SimulatedAnnealing: simulated_annealing(*q, clock, a.seed, AnnealConfig{}, sink); break;
      case Method::Tabu: tabu_search(*q, clock, a.seed, TabuConfig{}, sink); break;
      case Method::Greedy: minvola_greedy(inst, 0.01, clock, sink); break;
      case Method::QaoaGrid:
      case Method::QaoaLr:
      case Method::QaoaOpt: {
        QaoaConfig qc;
        qc.p = a.p;
        set.config["qaoa"] = to_json(qc);
        set.config["schedule"] = to_json(run_qaoa(method, *q, clock, a.seed, qc, sink));
        break;
      }
      case Method::Qp: break;
    }
  };
  BestSink best_sink{&best, &count};
  if (a.trace) {
    run([&](const Sample& s) {
      best_sink(s);
      set.samples.push_back(s);
    });
  } else {
    run(best_sink);
    if (best) set.samples.push_back(*best);
  }
  out << "samples=" << count;
  if (best) {
    const Vector w = best->is_bitstring() ? decode(best->bits(), q->meta) : best->weights();
    const bool feasible = static_cast<bool>(is_feasible(Variant::MinVola, w, inst));
    out << " best_energy=" << io::format_double(best->energy)
        << " volatility=" << io::format_double(portfolio_volatility(w, inst))
        << " feasible=" << (feasible ? "true" : "false");
    if (best->is_bitstring()) out << " bits=" << to_string(best->bits());
  }
  out << '\n';
  if (!a.out.empty()) io::write_json(a.out, to_json(set));
  return 0;
}

inline int run_bench_cmd(const BenchArgs& a, std::ostream& out, std::ostream& err) {
  const BenchConfig cfg = load_bench_config(a.config);
  print_config(err, "bench", {{"config", to_json(cfg)}, {"out_dir", a.out_dir}, {"cache", !a.no_cache}});
  const BenchResult res = run_bench(cfg, !a.no_cache);
  write_bench_outputs(a.out_dir, cfg, res);
  out << aggregate_csv(aggregate(res.reports));
  return 0;
}

inline int run_report(const ReportArgs& a, std::ostream& out, std::ostream& err) {
  print_config(err, "report", {{"in", a.in}, {"format", a.format}, {"aggregate", a.aggregate}});
  const nlohmann::json j = io::read_json(a.in);
  const bool is_rows = j.is_array() && !j.empty() && j.front().contains("feasibility_pct");
  if (is_rows) {
    const auto rows = aggregate_rows_from_json(j);
    out << (a.format == "csv" ? aggregate_csv(rows) : to_json_array(rows).dump(2) + "\n");
    return 0;
  }
  const auto reports = reports_from_json(j);
  if (a.aggregate) {
    const auto rows = aggregate(reports);
    out << (a.format == "csv" ? aggregate_csv(rows) : to_json_array(rows).dump(2) + "\n");
  } else {
    out << (a.format == "csv" ? reports_csv(reports) : to_json_array(reports).dump(2) + "\n");
  }
  return 0;
}

}  // namespace detail

inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Portfolio optimization solvers and benchmark harness", "portopt"};
  app.require_subcommand(1);

  detail::GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate instances from a price CSV");
  g->add_option("--prices", gen.prices, "Price CSV (date column then one column per asset)")->required();
  g->add_option("--n", gen.n, "Assets per instance")->required()->check(CLI::PositiveNumber);
  g->add_option("--count", gen.count, "Number of instances")->capture_default_str()->check(CLI::PositiveNumber);
  g->add_option("--seed", gen.seed, "Seed of the first instance; instance k uses seed + k")->capture_default_str();
  g->add_option("--variant", gen.variant, "Problem variant")
      ->capture_default_str()
      ->check(CLI::IsMember({"minvola", "maxret", "multiobj"}));
  g->add_option("--out", gen.out, "Output directory")->required();

  detail::QuboArgs qb;
  auto* q = app.add_subcommand("qubo", "Compile a MinVola instance to a QUBO");
  q->add_option("--instance", qb.instance, "Instance JSON")->required();
  q->add_option("--d", qb.d, "Bits per asset minus one")->capture_default_str();
  q->add_option("--phi", qb.phi, "Return-floor penalty factor")->capture_default_str();
  q->add_option("--psi", qb.psi, "Normalization penalty factor")->capture_default_str();
  q->add_option("--out", qb.out, "Output QUBO JSON")->required();

  detail::SolveArgs sv;
  auto* s = app.add_subcommand("solve", "Run one method on one instance");
  s->add_option("--instance", sv.instance, "Instance JSON")->required();
  s->add_option("--method", sv.method, "Method")->required()->check(CLI::IsMember(detail::method_names()));
  s->add_option("--time-limit", sv.time_limit, "Budget in seconds")->capture_default_str()->check(CLI::PositiveNumber);
  s->add_option("--seed", sv.seed, "Sampler seed")->capture_default_str();
  s->add_option("--p", sv.p, "QAOA layers")->capture_default_str()->check(CLI::PositiveNumber);
  s->add_option("--out", sv.out, "Output JSON (samples or solution)");
  s->add_option("--d", sv.d, "Bits per asset minus one")->capture_default_str();
  s->add_option("--phi", sv.phi, "Return-floor penalty factor")->capture_default_str();
  s->add_option("--psi", sv.psi, "Normalization penalty factor")->capture_default_str();
  s->add_option("--variant", sv.variant, "Variant for qp (default: the instance's)")
      ->check(CLI::IsMember({"minvola", "maxret", "multiobj"}));
  s->add_option("--budget-mode", sv.budget_mode, "wall: elapsed seconds; work: deterministic work units")
      ->capture_default_str()
      ->check(CLI::IsMember({"wall", "work"}));
  s->add_option("--max-samples", sv.max_samples, "Stop after this many samples (0 = unlimited)")->capture_default_str();
  s->add_flag("--trace", sv.trace, "Write every sample, not just the best");

  detail::BenchArgs bn;
  auto* b = app.add_subcommand("bench", "Run a benchmark configuration");
  b->add_option("--config", bn.config, "Bench config JSON")->required();
  b->add_option("--out-dir", bn.out_dir, "Output directory")->required();
  b->add_flag("--no-cache", bn.no_cache, "Recompute reference optima instead of reading .ref.json files");

  detail::ReportArgs rp;
  auto* r = app.add_subcommand("report", "Print reports or aggregate rows");
  r->add_option("--in", rp.in, "reports.json or aggregate.json")->required();
  r->add_option("--format", rp.format, "Output format")->capture_default_str()->check(CLI::IsMember({"csv", "json"}));
  r->add_flag("--aggregate", rp.aggregate, "Aggregate per (method, n)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (*g) return detail::run_gen(gen, out, err);
    if (*q) return detail::run_qubo(qb, out, err);
    if (*s) return detail::run_solve(sv, out, err);
    if (*b) return detail::run_bench_cmd(bn, out, err);
    if (*r) return detail::run_report(rp, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace portopt::cli
