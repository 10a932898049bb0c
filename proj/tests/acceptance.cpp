// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "portopt/cli.hpp"
#include "portopt/portopt.hpp"

using namespace portopt;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

const AssetUniverse& universe() {
  static const AssetUniverse u = estimate_universe(synthetic_prices({}));
  return u;
}

Instance make_instance(int n, std::uint64_t seed) {
  Instance inst = build_instance(universe(), n, seed);
  inst.id = "n" + std::to_string(n) + "_s" + std::to_string(seed);
  return inst;
}

Bitstring bits_of(std::size_t x, std::size_t m) { return index_to_bits(x, m); }

std::map<int, std::pair<bool, std::string>> verdicts;

void verdict(int id, bool ok, const std::string& detail) {
  verdicts[id] = {ok, detail};
  std::cerr << "criterion " << id << " done" << std::endl;
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

/// Every report seen in any benchmark-style run, for the global theta check.
std::vector<SolverReport> all_reports;

// ---------------------------------------------------------------------------

void criterion_1() {
  const auto start = Clock::now();
  double worst = 0.0;
  std::size_t checked = 0;
  for (int n : {2, 3}) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      Instance inst = make_instance(n, seed);
      QuboProblem q = build_qubo(inst, 3, 1000.0, 1000.0);
      const std::size_t m = q.num_vars();
      for (std::size_t x = 0; x < (std::size_t{1} << m); ++x) {
        const Bitstring b = bits_of(x, m);
        const double f = penalty_objective(decode(b, q.meta), inst, 1000.0, 1000.0);
        const double e = energy(q, b) + q.offset();
        worst = std::max(worst, std::abs(e - f) / (1.0 + std::abs(f)));
        ++checked;
      }
    }
  }
  const double t = seconds_since(start);
  verdict(1, worst <= 1e-9 && t < 5.0,
          std::to_string(checked) + " bitstrings, max scaled error " + fmt(worst) + ", " + fmt(t) + " s");
}

void criterion_2() {
  bool ok = true;
  for (int n : {1, 2, 3, 5, 10, 25, 50, 100}) {
    ok = ok && build_qubo(make_instance(n, 1)).num_vars() == static_cast<std::size_t>(4 * n);
  }
  const std::size_t m25 = build_qubo(make_instance(25, 2)).num_vars();
  verdict(2, ok && m25 == 100, "4n variables at d=3; n=25 gives " + std::to_string(m25));
}

void criterion_3() {
  Instance inst = make_instance(4, 5);
  Vector w = Vector::Constant(4, 1.01 / 4.0);
  const double contribution = penalty_objective(w, inst, 0.0, 1000.0) - portfolio_volatility(w, inst);
  verdict(3, std::abs(contribution - 0.1) <= 1e-12, "normalization violation 0.01 costs " + fmt(contribution, 17));
}

void criterion_4() {
  int solved = 0, certified = 0, bound_checks = 0, bound_violations = 0;
  double worst_res = 0.0, slowest = 0.0;
  std::uint64_t seed = 1000;
  for (int n : default_size_grid()) {
    for (int k = 0; k < 10; ++k) {
      Instance inst = make_instance(n, seed++);
      const auto start = Clock::now();
      QpSolution sol;
      try {
        sol = solve_qp(Variant::MinVola, inst);
      } catch (const std::exception& e) {
        std::cout << "  " << inst.id << ": " << e.what() << '\n';
        continue;
      }
      const double t = seconds_since(start);
      ++solved;
      slowest = std::max(slowest, t);
      worst_res = std::max(worst_res, sol.residuals.max());
      if (sol.converged && sol.residuals.max() <= 1e-6 && t <= 10.0) ++certified;
      if (n <= 3) {
        QuboProblem q = build_qubo(inst);
        const std::size_t m = q.num_vars();
        for (std::size_t x = 0; x < (std::size_t{1} << m); ++x) {
          const Vector wd = decode(bits_of(x, m), q.meta);
          if (!is_feasible(Variant::MinVola, wd, inst, FeasibilityTolerance::exact())) continue;
          ++bound_checks;
          if (sol.objective > portfolio_volatility(wd, inst)) ++bound_violations;
        }
      }
    }
  }
  const int total = 10 * static_cast<int>(default_size_grid().size());
  verdict(4, certified == total && bound_violations == 0 && bound_checks > 0,
          std::to_string(certified) + "/" + std::to_string(total) + " certified (max residual " + fmt(worst_res) +
              ", slowest " + fmt(slowest) + " s); " + std::to_string(bound_violations) + " lower-bound violations in " +
              std::to_string(bound_checks) + " exact decodes");
}

void criterion_5() {
  std::string detail;
  bool ok = true;
  for (std::uint64_t inst_seed : {11u, 12u, 13u}) {
    QuboProblem q = build_qubo(make_instance(2, inst_seed));
    const double opt = brute_force_qubo(q).energy;
    auto hit = [&](const SampleSet& s) { return s.best_energy() <= opt + 1e-9 * (1.0 + std::abs(opt)); };
    int sa = 0, tabu = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      sa += hit(simulated_annealing(q, TimeBudget::seconds(1.0), seed));
      tabu += hit(tabu_search(q, TimeBudget::seconds(1.0), seed));
    }
    ok = ok && sa >= 9 && tabu >= 9;
    detail += "sa " + std::to_string(sa) + "/10, tabu " + std::to_string(tabu) + "/10; ";
  }
  std::size_t sd_runs = 0, sd_ok = 0;
  for (int n : {2, 3, 5, 10}) {
    QuboProblem q = build_qubo(make_instance(n, 20 + n));
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      TimeBudget b = TimeBudget::work(10.0);
      b.max_samples = 40;
      for (const auto& s : steepest_descent(q, b, seed).samples) {
        ++sd_runs;
        const double e = energy(q, s.bits());
        bool local = true;
        for (std::size_t k = 0; k < q.num_vars() && local; ++k) {
          Bitstring y = s.bits();
          y[k] ^= 1U;
          local = energy(q, y) >= e - 1e-9 * (1.0 + std::abs(e));
        }
        sd_ok += local;
      }
    }
  }
  ok = ok && sd_runs > 0 && sd_ok == sd_runs;
  verdict(5, ok, detail + "sd local minima " + std::to_string(sd_ok) + "/" + std::to_string(sd_runs));
}

void criterion_6() {
  std::size_t runs = 0, with_output = 0, strict_ok = 0, samples = 0, strict_samples = 0;
  bool all_sizes_full = true;
  std::uint64_t seed = 2000;
  for (int n : default_size_grid()) {
    if (n < 10) continue;
    int feasible_instances = 0;
    for (int k = 0; k < 10; ++k) {
      Instance inst = make_instance(n, seed++);
      SampleSet set = minvola_greedy(inst, 0.01, TimeBudget::work(10.0));
      ++runs;
      if (set.samples.empty()) continue;
      ++with_output;
      bool all = true;
      for (const auto& s : set.samples) {
        ++samples;
        const bool f = static_cast<bool>(is_feasible(Variant::MinVola, s.weights(), inst, FeasibilityTolerance::exact()));
        strict_samples += f;
        all = all && f;
      }
      strict_ok += all;
      feasible_instances += all;
    }
    all_sizes_full = all_sizes_full && feasible_instances == 10;
  }
  verdict(6, strict_ok == with_output && all_sizes_full,
          std::to_string(strict_samples) + "/" + std::to_string(samples) + " outputs strictly feasible; " +
              std::to_string(with_output) + "/" + std::to_string(runs) + " instances with output");
}

void criterion_7() {
  const TimeBudget budget = TimeBudget::seconds(10.0);
  const FeasibilityTolerance tol;
  struct Cell {
    double theta_sum = 0.0;
    int theta_count = 0;
    int feasible = 0;
    int runs = 0;
    std::optional<double> mean() const {
      return theta_count ? std::optional(theta_sum / theta_count) : std::nullopt;
    }
    double pct() const { return runs ? 100.0 * feasible / runs : 0.0; }
  };
  std::map<std::pair<int, Method>, Cell> cells;
  auto run = [&](int n, Method m, const Instance& inst, double f_opt) {
    SolverReport r = run_method(m, inst, f_opt, budget, 0, tol);
    Cell& c = cells[{n, m}];
    ++c.runs;
    if (r.feasible_samples > 0) ++c.feasible;
    if (r.theta) {
      c.theta_sum += r.theta->value;
      ++c.theta_count;
    }
    all_reports.push_back(r);
  };
  std::uint64_t seed = 3000;
  for (int n : {10, 25, 40, 50}) {
    for (int k = 0; k < 10; ++k) {
      Instance inst = make_instance(n, seed++);
      const double f_opt = solve_qp(Variant::MinVola, inst).objective;
      if (n != 40) {
        run(n, Method::Greedy, inst, f_opt);
        run(n, Method::SimulatedAnnealing, inst, f_opt);
      }
      run(n, Method::Random, inst, f_opt);
    }
  }
  bool ok = true;
  std::string detail;
  for (int n : {10, 25, 50}) {
    const Cell& g = cells[{n, Method::Greedy}];
    const Cell& s = cells[{n, Method::SimulatedAnnealing}];
    const Cell& r = cells[{n, Method::Random}];
    // A method without any feasible output ranks below one with output.
    const bool theta_ok = g.mean() && (!s.mean() || *g.mean() < *s.mean());
    ok = ok && theta_ok && g.pct() >= r.pct();
    detail += "n=" + std::to_string(n) + " theta greedy " + (g.mean() ? fmt(*g.mean()) : "none") + " sa " +
              (s.mean() ? fmt(*s.mean()) : "none") + ", feasible% greedy " + fmt(g.pct()) + " random " +
              fmt(r.pct()) + "; ";
  }
  const double random40 = cells[{40, Method::Random}].pct();
  const double random50 = cells[{50, Method::Random}].pct();
  ok = ok && random40 == 0.0 && random50 == 0.0;
  detail += "random feasible% n=40 " + fmt(random40) + " n=50 " + fmt(random50);
  verdict(7, ok, detail);
}

using cd = std::complex<double>;

std::vector<cd> dense_evolve(const QaoaSchedule& s, const CostDiagonal& d) {
  const std::size_t dim = d.dim();
  std::vector<cd> psi(dim, cd(1.0 / std::sqrt(static_cast<double>(dim)), 0.0));
  for (std::size_t layer = 0; layer < s.p(); ++layer) {
    for (std::size_t x = 0; x < dim; ++x) psi[x] *= std::exp(cd(0.0, -s.gamma[layer] * d.values[x]));
    const cd one[2][2] = {{std::cos(s.beta[layer]), cd(0.0, -std::sin(s.beta[layer]))},
                          {cd(0.0, -std::sin(s.beta[layer])), std::cos(s.beta[layer])}};
    std::vector<cd> next(dim, cd(0.0, 0.0));
    for (std::size_t x = 0; x < dim; ++x) {
      for (std::size_t y = 0; y < dim; ++y) {
        cd v(1.0, 0.0);
        for (std::size_t k = 0; k < d.num_vars; ++k) v *= one[(x >> k) & 1U][(y >> k) & 1U];
        next[x] += v * psi[y];
      }
    }
    psi = next;
  }
  return psi;
}

void criterion_8() {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> angle(-3.0, 3.0);
  auto random_qubo = [&](std::size_t m) {
    Matrix s(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    for (Eigen::Index k = 0; k < s.rows(); ++k) {
      for (Eigen::Index l = 0; l <= k; ++l) s(k, l) = s(l, k) = nd(rng);
    }
    return QuboProblem(s, nd(rng));
  };
  auto random_schedule = [&](std::size_t p) {
    QaoaSchedule s;
    for (std::size_t i = 0; i < p; ++i) {
      s.beta.push_back(angle(rng));
      s.gamma.push_back(angle(rng));
    }
    return s;
  };
  double norm_err = 0.0, uniform_err = 0.0, dense_err = 0.0;
  for (std::size_t m = 1; m <= 16; ++m) {
    CostDiagonal d = build_cost_diagonal(random_qubo(m));
    for (int t = 0; t < (m > 12 ? 2 : 5); ++t) {
      StateVector psi = evolve(random_schedule(1 + static_cast<std::size_t>(t % 4)), d);
      double total = 0.0;
      for (const auto& a : psi) total += std::norm(a);
      norm_err = std::max(norm_err, std::abs(total - 1.0));
    }
    if (m <= 12) {
      for (int zero = 0; zero < 2; ++zero) {
        QaoaSchedule s = random_schedule(3);
        auto& v = zero ? s.beta : s.gamma;
        std::fill(v.begin(), v.end(), 0.0);
        StateVector psi = evolve(s, d);
        for (const auto& a : psi) uniform_err = std::max(uniform_err, std::abs(std::norm(a) - 1.0 / psi.size()));
      }
    }
    if (m <= 3) {
      for (int t = 0; t < 10; ++t) {
        QaoaSchedule s = random_schedule(1 + static_cast<std::size_t>(t % 3));
        StateVector psi = evolve(s, d);
        std::vector<cd> want = dense_evolve(s, d);
        for (std::size_t x = 0; x < psi.size(); ++x) dense_err = std::max(dense_err, std::abs(psi[x] - want[x]));
      }
    }
  }
  int grid_checked = 0, grid_bad = 0;
  std::vector<QuboProblem> problems;
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) problems.push_back(build_qubo(make_instance(2, seed)));
  problems.push_back(build_qubo(make_instance(3, 5)));
  for (std::size_t m : {1u, 3u, 6u, 10u}) problems.push_back(random_qubo(m));
  for (const auto& q : problems) {
    CostDiagonal d = build_cost_diagonal(q);
    const double baseline = expectation(uniform_state(q.num_vars()), d);
    GridSearchResult g = grid_search_p1(q, 20, TimeBudget::work(1e6));
    ++grid_checked;
    if (g.expectation > baseline + 1e-12 * (1.0 + std::abs(baseline))) ++grid_bad;
  }
  verdict(8, norm_err <= 1e-10 && uniform_err <= 1e-12 && dense_err <= 1e-9 && grid_bad == 0,
          "norm error " + fmt(norm_err) + ", uniformity error " + fmt(uniform_err) + ", dense-oracle error " +
              fmt(dense_err) + ", grid above baseline " + std::to_string(grid_bad) + "/" +
              std::to_string(grid_checked));
}

void criterion_10() {
  const fs::path dir = fs::temp_directory_path() / "portopt_acceptance_bench";
  fs::remove_all(dir);
  fs::create_directories(dir / "instances");
  std::uint64_t seed = 4000;
  for (int n : {3, 5, 10}) {
    for (int k = 0; k < 2; ++k) {
      save_instance(dir / "instances" / ("n" + std::to_string(n) + "_" + std::to_string(k) + ".json"),
                    make_instance(n, seed++));
    }
  }
  io::write_json(dir / "config.json",
                 {{"instances", {"instances"}},
                  {"methods",
                   {"greedy", "random", "sd", {{"method", "sa"}, {"seeds", {0, 1}}}, {{"method", "tabu"}, {"seeds", {0, 1}}},
                    {{"method", "qaoa-lr"}, {"config", {{"p", 2}}}}}},
                  {"budget", {{"limit_seconds", 0.2}, {"mode", "work"}}}});
  auto bench = [&](const std::string& out) {
    const std::string cfg = (dir / "config.json").string(), out_dir = (dir / out).string();
    const char* argv[] = {"portopt", "bench", "--config", cfg.c_str(), "--out-dir", out_dir.c_str()};
    std::ostringstream sink_out, sink_err;
    const int code = cli::dispatch(6, argv, sink_out, sink_err);
    if (code != 0) std::cout << "  bench failed: " << sink_err.str() << '\n';
    return code;
  };
  const int c1 = bench("run1"), c2 = bench("run2");
  bool same = c1 == 0 && c2 == 0;
  std::size_t compared = 0;
  if (same) {
    auto a = reports_from_json(io::read_json(dir / "run1" / "reports.json"));
    auto b = reports_from_json(io::read_json(dir / "run2" / "reports.json"));
    same = a.size() == b.size() && !a.empty();
    for (std::size_t k = 0; same && k < a.size(); ++k) {
      same = a[k].f_m == b[k].f_m && a[k].feasible_samples == b[k].feasible_samples &&
             a[k].total_samples == b[k].total_samples && a[k].f_opt == b[k].f_opt &&
             (a[k].theta.has_value() == b[k].theta.has_value()) && (!a[k].theta || a[k].theta->value == b[k].theta->value);
      ++compared;
    }
    all_reports.insert(all_reports.end(), a.begin(), a.end());
    same = same && io::read_text(dir / "run1" / "aggregate.csv") == io::read_text(dir / "run2" / "aggregate.csv");
  }
  verdict(10, same, std::to_string(compared) + " reports identical across two bench runs of one config");
}

void criterion_9() {
  std::size_t checked = 0, violations = 0;
  for (const auto& r : all_reports) {
    if (!r.f_exact) continue;
    ++checked;
    if (*r.f_exact < r.f_opt * (1.0 - 1e-12)) ++violations;
  }
  verdict(9, checked > 0 && violations == 0,
          std::to_string(violations) + " violations over " + std::to_string(checked) +
              " reports with exactly feasible samples");
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<void()>>> steps = {
      {1, criterion_1}, {2, criterion_2}, {3, criterion_3}, {4, criterion_4}, {5, criterion_5},
      {6, criterion_6}, {7, criterion_7}, {8, criterion_8}, {10, criterion_10}, {9, criterion_9}};
  for (const auto& [id, fn] : steps) {
    try {
      fn();
    } catch (const std::exception& e) {
      verdict(id, false, std::string("exception: ") + e.what());
    }
  }
  int failures = 0;
  for (const auto& [id, v] : verdicts) {
    std::cout << (v.first ? "PASS" : "FAIL") << " criterion " << id << ": " << v.second << '\n';
    failures += !v.first;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
