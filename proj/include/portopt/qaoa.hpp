#pragma once

// Exact statevector QAOA over a QUBO cost diagonal.
//
// Basis index convention: bit k of the index is QUBO variable k. The circuit
// starts in |+>^m and applies, per layer, the phase exp(-i gamma C(x)) and
// then exp(-i beta X) on every qubit.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <vector>

#include <json.hpp>

#include "portopt/budget.hpp"
#include "portopt/errors.hpp"
#include "portopt/qubo.hpp"
#include "portopt/rng.hpp"
#include "portopt/samples.hpp"

namespace portopt {

inline constexpr std::size_t kMaxSimulatedVars = 24;

struct QaoaSchedule {
  std::vector<double> beta;
  std::vector<double> gamma;

  std::size_t p() const { return beta.size(); }
  void validate() const {
    if (beta.empty()) throw Error(ErrorCode::InvalidLayers, "schedule needs p >= 1 layers");
    if (beta.size() != gamma.size()) {
      throw Error(ErrorCode::DimensionError, "beta and gamma must have equal length");
    }
  }
};

inline nlohmann::json to_json(const QaoaSchedule& s) {
  return {{"p", s.p()}, {"beta", s.beta}, {"gamma", s.gamma}};
}

inline QaoaSchedule schedule_from_json(const nlohmann::json& j) {
  try {
    QaoaSchedule s{j.at("beta").get<std::vector<double>>(), j.at("gamma").get<std::vector<double>>()};
    s.validate();
    if (j.contains("p") && j["p"].get<std::size_t>() != s.p()) {
      throw Error(ErrorCode::DimensionError, "schedule p does not match angle count");
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("schedule JSON: ") + e.what());
  }
}

/// Linear ramp, layer k = 1..p: beta_k = (1 - (k-1)/p) db, gamma_k = (k/p) dg.
inline QaoaSchedule lr_schedule(int p, double delta_beta = 0.3, double delta_gamma = 0.6) {
  if (p < 1) throw Error(ErrorCode::InvalidLayers, "p must be >= 1");
  if (delta_beta < 0.0 || delta_gamma < 0.0) {
    throw Error(ErrorCode::InvalidSchedule, "ramp widths must be non-negative");
  }
  QaoaSchedule s;
  const double pd = static_cast<double>(p);
  for (int k = 1; k <= p; ++k) {
    s.beta.push_back((1.0 - static_cast<double>(k - 1) / pd) * delta_beta);
    s.gamma.push_back((static_cast<double>(k) / pd) * delta_gamma);
  }
  return s;
}

/// values[x] = energy(q, x) + offset.
struct CostDiagonal {
  std::size_t num_vars = 0;
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
};

inline CostDiagonal build_cost_diagonal(const QuboProblem& q, std::size_t max_vars = kMaxSimulatedVars) {
  const std::size_t m = q.num_vars();
  if (m > max_vars) {
    throw Error(ErrorCode::SizeLimit, std::to_string(m) + " variables exceed the simulation limit of " +
                                          std::to_string(max_vars));
  }
  const Matrix& S = q.symmetric();
  CostDiagonal diag;
  diag.num_vars = m;
  diag.values.assign(std::size_t{1} << m, 0.0);
  // Extend by the highest set bit: E(x + 2^k) = E(x) + Q_kk + sum_{l<k, x_l} Q_lk.
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t half = std::size_t{1} << k;
    const auto K = static_cast<Eigen::Index>(k);
    for (std::size_t x = 0; x < half; ++x) {
      double e = S(K, K);
      for (std::size_t l = 0; l < k; ++l) {
        if ((x >> l) & 1U) e += S(static_cast<Eigen::Index>(l), K);
      }
      diag.values[x + half] = diag.values[x] + e;
    }
  }
  for (double& v : diag.values) v += q.offset();
  return diag;
}

using Amplitude = std::complex<double>;
using StateVector = std::vector<Amplitude>;

inline StateVector uniform_state(std::size_t num_vars) {
  const std::size_t dim = std::size_t{1} << num_vars;
  return StateVector(dim, Amplitude(1.0 / std::sqrt(static_cast<double>(dim)), 0.0));
}

inline void apply_phase(StateVector& psi, const CostDiagonal& diag, double gamma) {
  for (std::size_t x = 0; x < psi.size(); ++x) {
    const double a = -gamma * diag.values[x];
    psi[x] *= Amplitude(std::cos(a), std::sin(a));
  }
}

/// exp(-i beta X) on every qubit.
inline void apply_mixer(StateVector& psi, std::size_t num_vars, double beta) {
  const double c = std::cos(beta), s = std::sin(beta);
  const Amplitude mis(0.0, -s);
  for (std::size_t k = 0; k < num_vars; ++k) {
    const std::size_t stride = std::size_t{1} << k;
    for (std::size_t base = 0; base < psi.size(); base += 2 * stride) {
      for (std::size_t i = base; i < base + stride; ++i) {
        const Amplitude a = psi[i], b = psi[i + stride];
        psi[i] = c * a + mis * b;
        psi[i + stride] = mis * a + c * b;
      }
    }
  }
}

inline StateVector evolve(const QaoaSchedule& schedule, const CostDiagonal& diag) {
  schedule.validate();
  StateVector psi = uniform_state(diag.num_vars);
  for (std::size_t layer = 0; layer < schedule.p(); ++layer) {
    apply_phase(psi, diag, schedule.gamma[layer]);
    apply_mixer(psi, diag.num_vars, schedule.beta[layer]);
  }
  return psi;
}

inline double expectation(const StateVector& psi, const CostDiagonal& diag) {
  detail::require_size(psi.size(), diag.dim(), "state vector");
  double e = 0.0;
  for (std::size_t x = 0; x < psi.size(); ++x) e += std::norm(psi[x]) * diag.values[x];
  return e;
}

inline double evolve_work(const QaoaSchedule& s, const CostDiagonal& d) {
  return static_cast<double>(s.p()) * static_cast<double>(d.dim()) * (4.0 + 2.0 * static_cast<double>(d.num_vars));
}

/// Inverse-CDF sampler over |amplitude|^2.
class ShotSampler {
 public:
  explicit ShotSampler(const StateVector& psi) : cdf_(psi.size()) {
    double acc = 0.0;
    for (std::size_t x = 0; x < psi.size(); ++x) {
      acc += std::norm(psi[x]);
      cdf_[x] = acc;
    }
  }

  std::size_t draw(Rng& rng) const {
    const double u = uniform01(rng) * cdf_.back();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    // Zero-probability tail entries share the final cdf value; step back onto
    // the last state that actually carries mass.
    std::size_t idx = std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
    while (idx > 0 && cdf_[idx] == cdf_[idx - 1]) --idx;
    return idx;
  }

 private:
  std::vector<double> cdf_;
};

inline Bitstring index_to_bits(std::size_t x, std::size_t num_vars) {
  Bitstring b(num_vars);
  for (std::size_t k = 0; k < num_vars; ++k) b[k] = static_cast<std::uint8_t>((x >> k) & 1U);
  return b;
}

inline SampleSet sample_shots(const StateVector& psi, const QuboProblem& q, std::size_t shots,
                              std::uint64_t seed) {
  if (shots < 1) throw Error(ErrorCode::DimensionError, "shots must be >= 1");
  detail::require_size(psi.size(), std::size_t{1} << q.num_vars(), "state vector");
  SampleSet set{Method::QaoaLr, {{"shots", shots}}, seed, {}};
  ShotSampler sampler(psi);
  Rng rng(seed);
  set.samples.reserve(shots);
  for (std::size_t i = 0; i < shots; ++i) {
    Sample s;
    s.payload = index_to_bits(sampler.draw(rng), q.num_vars());
    s.energy = energy(q, s.bits());
    s.iteration = i;
    s.source = Method::QaoaLr;
    set.samples.push_back(std::move(s));
  }
  return set;
}

/// 2 pi over the median absolute nonzero QUBO coefficient.
inline double default_gamma_max(const QuboProblem& q) {
  std::vector<double> mags;
  for (std::size_t k = 0; k < q.num_vars(); ++k) {
    for (std::size_t l = k; l < q.num_vars(); ++l) {
      const double v = std::abs(q.Q(k, l));
      if (v > 0.0) mags.push_back(v);
    }
  }
  if (mags.empty()) return 2.0 * std::numbers::pi;
  auto mid = mags.begin() + static_cast<std::ptrdiff_t>(mags.size() / 2);
  std::nth_element(mags.begin(), mid, mags.end());
  return 2.0 * std::numbers::pi / *mid;
}

struct GridPoint {
  double beta;
  double gamma;
  double expectation;
};

struct GridSearchResult {
  double beta = 0.0;
  double gamma = 0.0;
  double expectation = 0.0;
  std::vector<GridPoint> trace;
  bool complete = false;
};

/// p = 1 scan of beta in [0, pi/2] x gamma in [0, gamma_max], beta-major,
/// starting at (0, 0). A later point must beat the incumbent by more than
/// 1e-12 (relative) to replace it.
inline GridSearchResult grid_search_p1(const CostDiagonal& diag, int grid_size, double gamma_max,
                                       BudgetClock& clock) {
  if (grid_size < 1) throw Error(ErrorCode::DimensionError, "grid_size must be >= 1");
  GridSearchResult res;
  const double G = grid_size > 1 ? static_cast<double>(grid_size - 1) : 1.0;
  bool have = false;
  for (int i = 0; i < grid_size; ++i) {
    for (int j = 0; j < grid_size; ++j) {
      if (have && clock.expired()) return res;
      const double beta = 0.5 * std::numbers::pi * static_cast<double>(i) / G;
      const double gamma = gamma_max * static_cast<double>(j) / G;
      QaoaSchedule s{{beta}, {gamma}};
      const double e = expectation(evolve(s, diag), diag);
      clock.charge(evolve_work(s, diag));
      res.trace.push_back({beta, gamma, e});
      if (!have || e < res.expectation - 1e-12 * (1.0 + std::abs(res.expectation))) {
        res.beta = beta;
        res.gamma = gamma;
        res.expectation = e;
        have = true;
      }
    }
  }
  res.complete = true;
  return res;
}

inline GridSearchResult grid_search_p1(const QuboProblem& q, int grid_size, const TimeBudget& budget) {
  BudgetClock clock(budget);
  return grid_search_p1(build_cost_diagonal(q), grid_size, default_gamma_max(q), clock);
}

struct RefineOptions {
  double initial_step = 0.1;
  double ftol = 1e-12;
  std::size_t max_evaluations = 4000;
  int max_restarts = 4;
  /// Called with every evaluated state (e.g. to draw training shots).
  std::function<void(const StateVector&)> on_state;
};

struct RefineResult {
  QaoaSchedule schedule;
  double expectation = 0.0;
  double initial_expectation = 0.0;
  std::size_t evaluations = 0;
};

/// Nelder-Mead on the 2p angles, restarted from the incumbent with a halved
/// simplex while it keeps improving. Never returns worse than the init.
inline RefineResult refine_params(const CostDiagonal& diag, const QaoaSchedule& init,
                                  BudgetClock& clock, const RefineOptions& opt = {}) {
  init.validate();
  const std::size_t p = init.p();
  const std::size_t dim = 2 * p;
  RefineResult res;
  auto unpack = [&](const std::vector<double>& v) {
    QaoaSchedule s;
    s.beta.assign(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(p));
    s.gamma.assign(v.begin() + static_cast<std::ptrdiff_t>(p), v.end());
    return s;
  };
  auto f = [&](const std::vector<double>& v) {
    QaoaSchedule s = unpack(v);
    StateVector psi = evolve(s, diag);
    clock.charge(evolve_work(s, diag));
    ++res.evaluations;
    if (opt.on_state) opt.on_state(psi);
    return expectation(psi, diag);
  };
  std::vector<double> best(init.beta);
  best.insert(best.end(), init.gamma.begin(), init.gamma.end());
  double best_f = f(best);
  res.initial_expectation = best_f;
  auto out_of_budget = [&] { return clock.expired() || res.evaluations >= opt.max_evaluations; };

  double step = opt.initial_step;
  for (int restart = 0; restart <= opt.max_restarts && !out_of_budget(); ++restart) {
    const double start_f = best_f;
    std::vector<std::vector<double>> simplex(dim + 1, best);
    std::vector<double> fv(dim + 1, best_f);
    for (std::size_t i = 0; i < dim && !out_of_budget(); ++i) {
      simplex[i + 1][i] += step;
      fv[i + 1] = f(simplex[i + 1]);
    }
    while (!out_of_budget()) {
      std::vector<std::size_t> order(dim + 1);
      for (std::size_t i = 0; i <= dim; ++i) order[i] = i;
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
      const std::size_t lo = order.front(), hi = order.back(), second = order[dim - 1];
      if (std::abs(fv[hi] - fv[lo]) <= opt.ftol * (1.0 + std::abs(fv[lo]))) break;
      std::vector<double> centroid(dim, 0.0);
      for (std::size_t i = 0; i <= dim; ++i) {
        if (i == hi) continue;
        for (std::size_t d = 0; d < dim; ++d) centroid[d] += simplex[i][d] / static_cast<double>(dim);
      }
      auto along = [&](double t) {
        std::vector<double> v(dim);
        for (std::size_t d = 0; d < dim; ++d) v[d] = centroid[d] + t * (simplex[hi][d] - centroid[d]);
        return v;
      };
      std::vector<double> xr = along(-1.0);
      const double fr = f(xr);
      if (fr < fv[lo]) {
        std::vector<double> xe = along(-2.0);
        const double fe = f(xe);
        if (fe < fr) {
          simplex[hi] = xe;
          fv[hi] = fe;
        } else {
          simplex[hi] = xr;
          fv[hi] = fr;
        }
      } else if (fr < fv[second]) {
        simplex[hi] = xr;
        fv[hi] = fr;
      } else {
        const bool outside = fr < fv[hi];
        std::vector<double> xc = along(outside ? -0.5 : 0.5);
        const double fc = f(xc);
        if (fc < (outside ? fr : fv[hi])) {
          simplex[hi] = xc;
          fv[hi] = fc;
        } else {
          for (std::size_t i = 0; i <= dim && !out_of_budget(); ++i) {
            if (i == lo) continue;
            for (std::size_t d = 0; d < dim; ++d) {
              simplex[i][d] = simplex[lo][d] + 0.5 * (simplex[i][d] - simplex[lo][d]);
            }
            fv[i] = f(simplex[i]);
          }
        }
      }
    }
    for (std::size_t i = 0; i <= dim; ++i) {
      if (fv[i] < best_f) {
        best_f = fv[i];
        best = simplex[i];
      }
    }
    if (!(best_f < start_f - 1e-12 * (1.0 + std::abs(start_f)))) break;
    step *= 0.5;
  }
  res.schedule = unpack(best);
  res.expectation = best_f;
  return res;
}

inline RefineResult refine_params(const QuboProblem& q, const QaoaSchedule& init, const TimeBudget& budget,
                                  const RefineOptions& opt = {}) {
  BudgetClock clock(budget);
  return refine_params(build_cost_diagonal(q), init, clock, opt);
}

// ---------------------------------------------------------------------------
// Method runners: parameter search then shot sampling under one budget.

struct QaoaConfig {
  int p = 1;
  double delta_beta = 0.3;
  double delta_gamma = 0.6;
  int grid_size = 50;
  std::size_t shots_per_eval = 32;  // training shots per evaluated state (qaoa-opt)
  std::size_t batch = 256;          // shots between budget checks
  double grid_fraction = 0.5;       // share of the budget for the grid scan
  double train_fraction = 52.0 / 60.0;
};

inline nlohmann::json to_json(const QaoaConfig& c) {
  return {{"p", c.p}, {"delta_beta", c.delta_beta}, {"delta_gamma", c.delta_gamma},
          {"grid_size", c.grid_size}, {"shots_per_eval", c.shots_per_eval}, {"batch", c.batch},
          {"grid_fraction", c.grid_fraction}, {"train_fraction", c.train_fraction}};
}

inline QaoaConfig qaoa_config_from_json(const nlohmann::json& j) {
  QaoaConfig c;
  c.p = j.value("p", c.p);
  c.delta_beta = j.value("delta_beta", c.delta_beta);
  c.delta_gamma = j.value("delta_gamma", c.delta_gamma);
  c.grid_size = j.value("grid_size", c.grid_size);
  c.shots_per_eval = j.value("shots_per_eval", c.shots_per_eval);
  c.batch = j.value("batch", c.batch);
  c.grid_fraction = j.value("grid_fraction", c.grid_fraction);
  c.train_fraction = j.value("train_fraction", c.train_fraction);
  return c;
}

namespace detail {

template <class Sink>
void draw_shots(const QuboProblem& q, const ShotSampler& sampler, Rng& rng, std::size_t count,
                BudgetClock& clock, Method method, std::uint64_t& counter, Sink& sink) {
  const double m = static_cast<double>(q.num_vars());
  const std::size_t cap = clock.budget().max_samples;
  for (std::size_t i = 0; i < count && (cap == 0 || clock.samples() < cap); ++i) {
    Sample s;
    s.payload = index_to_bits(sampler.draw(rng), q.num_vars());
    s.energy = energy(q, s.bits());
    s.t = std::min(clock.now(), clock.limit_seconds());
    s.iteration = counter++;
    s.source = method;
    clock.charge(0.5 * m * m + m);
    clock.count_sample();
    sink(s);
  }
}

}  // namespace detail

/// Runs qaoa-lr, qaoa-grid or qaoa-opt. Returns the schedule used for sampling.
template <class Sink>
QaoaSchedule run_qaoa(Method method, const QuboProblem& q, BudgetClock& clock, std::uint64_t seed,
                      const QaoaConfig& cfg, Sink&& sink) {
  if (method != Method::QaoaLr && method != Method::QaoaGrid && method != Method::QaoaOpt) {
    throw Error(ErrorCode::ParseError, "not a QAOA method");
  }
  const CostDiagonal diag = build_cost_diagonal(q);
  clock.charge(static_cast<double>(diag.dim()) * static_cast<double>(diag.num_vars));
  Rng rng(seed);
  std::uint64_t counter = 0;
  QaoaSchedule schedule = lr_schedule(cfg.p, cfg.delta_beta, cfg.delta_gamma);
  const double limit = clock.limit_seconds();
  if (method == Method::QaoaGrid) {
    clock.set_deadline(cfg.grid_fraction * limit);
    GridSearchResult g = grid_search_p1(diag, cfg.grid_size, default_gamma_max(q), clock);
    schedule = QaoaSchedule{{g.beta}, {g.gamma}};
    clock.reset_deadline();
  } else if (method == Method::QaoaOpt) {
    clock.set_deadline(cfg.train_fraction * limit);
    RefineOptions opt;
    opt.on_state = [&](const StateVector& psi) {
      if (cfg.shots_per_eval == 0) return;
      ShotSampler sampler(psi);
      detail::draw_shots(q, sampler, rng, cfg.shots_per_eval, clock, method, counter, sink);
    };
    schedule = refine_params(diag, schedule, clock, opt).schedule;
    clock.reset_deadline();
  }
  const StateVector psi = evolve(schedule, diag);
  clock.charge(evolve_work(schedule, diag));
  const ShotSampler sampler(psi);
  while (!clock.expired()) {
    detail::draw_shots(q, sampler, rng, std::max<std::size_t>(1, cfg.batch), clock, method, counter, sink);
  }
  return schedule;
}

inline SampleSet run_qaoa(Method method, const QuboProblem& q, const TimeBudget& budget,
                          std::uint64_t seed, const QaoaConfig& cfg = {}) {
  SampleSet set{method, {{"budget", to_json(budget)}, {"qaoa", to_json(cfg)}}, seed, {}};
  BudgetClock clock(budget);
  QaoaSchedule used = run_qaoa(method, q, clock, seed, cfg, CollectSink{&set});
  set.config["schedule"] = to_json(used);
  return set;
}

}  // namespace portopt
