#pragma once

// Time-budgeted samplers over a QuboProblem plus the MinVola greedy heuristic.
//
// Every sampler has two entry points: a templated one that streams each
// Sample into a sink callable (used by the benchmark so that long runs do not
// hold millions of samples), and a convenience one returning a SampleSet.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <vector>

#include <json.hpp>

#include "portopt/budget.hpp"
#include "portopt/errors.hpp"
#include "portopt/instances.hpp"
#include "portopt/model.hpp"
#include "portopt/qubo.hpp"
#include "portopt/rng.hpp"
#include "portopt/samples.hpp"

namespace portopt {

/// Bitstring with incrementally maintained local fields, so single-flip
/// deltas are O(1) and a flip costs O(num_vars).
class FlipState {
 public:
  explicit FlipState(const QuboProblem& q)
      : S_(q.symmetric()), x_(q.num_vars(), 0), field_(Vector::Zero(S_.rows())) {}

  void assign(const Bitstring& x) {
    detail::require_size(x.size(), size(), "bitstring");
    x_ = x;
    field_.setZero();
    energy_ = 0.0;
    const auto m = S_.rows();
    for (Eigen::Index k = 0; k < m; ++k) {
      if (!x_[static_cast<std::size_t>(k)]) continue;
      field_ += S_.col(k);
      field_(k) -= S_(k, k);
    }
    for (Eigen::Index k = 0; k < m; ++k) {
      if (x_[static_cast<std::size_t>(k)]) energy_ += S_(k, k) + 0.5 * field_(k);
    }
  }

  void randomize(Rng& rng) {
    Bitstring x(size());
    std::uint64_t word = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (k % 64 == 0) word = rng();
      x[k] = static_cast<std::uint8_t>(word & 1U);
      word >>= 1;
    }
    assign(x);
  }

  double delta(std::size_t k) const {
    const auto K = static_cast<Eigen::Index>(k);
    const double f = S_(K, K) + field_(K);
    return x_[k] ? -f : f;
  }

  void flip(std::size_t k) {
    const auto K = static_cast<Eigen::Index>(k);
    energy_ += delta(k);
    x_[k] ^= 1U;
    const double s = x_[k] ? 1.0 : -1.0;
    field_.noalias() += s * S_.col(K);
    field_(K) -= s * S_(K, K);
  }

  std::size_t size() const { return x_.size(); }
  const Bitstring& bits() const { return x_; }
  /// Incrementally tracked; drifts by rounding. Use energy(q, bits()) to report.
  double energy() const { return energy_; }

 private:
  const Matrix& S_;
  Bitstring x_;
  Vector field_;
  double energy_ = 0.0;
};

namespace detail {

template <class Sink>
void emit_bits(Sink& sink, BudgetClock& clock, const QuboProblem& q, const Bitstring& x,
               Method method, std::uint64_t iteration) {
  Sample s;
  s.energy = energy(q, x);
  s.payload = x;
  s.t = std::min(clock.now(), clock.limit_seconds());
  s.iteration = iteration;
  s.source = method;
  clock.count_sample();
  sink(s);
}

inline double quad_work(const QuboProblem& q) {
  const double m = static_cast<double>(q.num_vars());
  return 0.5 * m * m + m;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Random sampling

template <class Sink>
void random_sample(const QuboProblem& q, BudgetClock& clock, std::uint64_t seed, Sink&& sink) {
  Rng rng(seed);
  const std::size_t m = q.num_vars();
  Bitstring x(m);
  std::uint64_t it = 0;
  while (!clock.expired()) {
    std::uint64_t word = 0;
    for (std::size_t k = 0; k < m; ++k) {
      if (k % 64 == 0) word = rng();
      x[k] = static_cast<std::uint8_t>(word & 1U);
      word >>= 1;
    }
    clock.charge(detail::quad_work(q));
    detail::emit_bits(sink, clock, q, x, Method::Random, it++);
  }
}

inline SampleSet random_sample(const QuboProblem& q, const TimeBudget& budget, std::uint64_t seed) {
  SampleSet set{Method::Random, {{"budget", to_json(budget)}}, seed, {}};
  BudgetClock clock(budget);
  random_sample(q, clock, seed, CollectSink{&set});
  return set;
}

// ---------------------------------------------------------------------------
// Steepest descent

/// Best-improvement descent over Hamming-1 neighbours until no flip strictly
/// lowers the energy. Ties go to the lowest index. Returns the number of moves.
inline std::size_t descend(FlipState& state) {
  std::size_t moves = 0;
  for (;;) {
    std::size_t best_k = 0;
    double best_d = 0.0;
    for (std::size_t k = 0; k < state.size(); ++k) {
      const double d = state.delta(k);
      if (d < best_d) {
        best_d = d;
        best_k = k;
      }
    }
    if (!(best_d < 0.0)) return moves;
    state.flip(best_k);
    ++moves;
  }
}

inline Bitstring descend(const QuboProblem& q, const Bitstring& start) {
  FlipState st(q);
  st.assign(start);
  descend(st);
  return st.bits();
}

/// restarts == 0 means unlimited (budget-bound).
template <class Sink>
void steepest_descent(const QuboProblem& q, BudgetClock& clock, std::uint64_t seed,
                      std::size_t restarts, Sink&& sink) {
  Rng rng(seed);
  FlipState st(q);
  const double m = static_cast<double>(q.num_vars());
  for (std::uint64_t it = 0; !clock.expired() && (restarts == 0 || it < restarts); ++it) {
    st.randomize(rng);
    const std::size_t moves = descend(st);
    clock.charge(detail::quad_work(q) + static_cast<double>(moves + 1) * 2.0 * m);
    detail::emit_bits(sink, clock, q, st.bits(), Method::SteepestDescent, it);
  }
}

inline SampleSet steepest_descent(const QuboProblem& q, const TimeBudget& budget,
                                  std::uint64_t seed, std::size_t restarts = 0) {
  SampleSet set{Method::SteepestDescent, {{"budget", to_json(budget)}, {"restarts", restarts}}, seed, {}};
  BudgetClock clock(budget);
  steepest_descent(q, clock, seed, restarts, CollectSink{&set});
  return set;
}

// ---------------------------------------------------------------------------
// Simulated annealing

struct AnnealConfig {
  std::optional<double> t0;     // default: worst single-flip |delta|
  std::optional<double> alpha;  // default: reaches final_ratio * t0 on the last sweep
  double final_ratio = 1e-3;
  int sweeps = 1000;  // per read; one sweep = num_vars proposals
};

struct AnnealSchedule {
  double t0;
  double alpha;
  int sweeps;
};

/// max_k |Q_kk| + sum_{l != k} |Q_kl|: bounds every single-flip delta.
inline double max_flip_delta_bound(const QuboProblem& q) {
  const Matrix& S = q.symmetric();
  double best = 0.0;
  for (Eigen::Index k = 0; k < S.cols(); ++k) best = std::max(best, S.col(k).cwiseAbs().sum());
  return best;
}

inline AnnealSchedule resolve_schedule(const QuboProblem& q, const AnnealConfig& cfg) {
  if (cfg.sweeps < 1) throw Error(ErrorCode::InvalidSchedule, "sweeps must be >= 1");
  AnnealSchedule s{};
  s.sweeps = cfg.sweeps;
  s.t0 = cfg.t0 ? *cfg.t0 : std::max(max_flip_delta_bound(q), 1e-12);
  if (cfg.alpha) {
    s.alpha = *cfg.alpha;
  } else {
    if (!(cfg.final_ratio > 0.0 && cfg.final_ratio < 1.0)) {
      throw Error(ErrorCode::InvalidSchedule, "final_ratio must lie in (0, 1)");
    }
    s.alpha = cfg.sweeps > 1 ? std::pow(cfg.final_ratio, 1.0 / (cfg.sweeps - 1)) : cfg.final_ratio;
  }
  if (!(s.t0 > 0.0)) throw Error(ErrorCode::InvalidSchedule, "T0 must be > 0");
  if (!(s.alpha > 0.0 && s.alpha < 1.0)) throw Error(ErrorCode::InvalidSchedule, "alpha must lie in (0, 1)");
  return s;
}

/// Metropolis rule: downhill and flat moves always pass.
inline bool metropolis_accept(double delta, double temperature, double u01) {
  if (delta <= 0.0) return true;
  return u01 < std::exp(-delta / temperature);
}

inline nlohmann::json to_json(const AnnealSchedule& s) {
  return {{"t0", s.t0}, {"alpha", s.alpha}, {"sweeps", s.sweeps}};
}

/// One sample per read (a full cooling run): the best state seen in it.
template <class Sink>
void simulated_annealing(const QuboProblem& q, BudgetClock& clock, std::uint64_t seed,
                         const AnnealConfig& cfg, Sink&& sink) {
  const AnnealSchedule sch = resolve_schedule(q, cfg);
  Rng rng(seed);
  FlipState st(q);
  const std::size_t m = q.num_vars();
  const double md = static_cast<double>(m);
  Bitstring best;
  for (std::uint64_t read = 0; !clock.expired(); ++read) {
    st.randomize(rng);
    clock.charge(detail::quad_work(q));
    best = st.bits();
    double best_e = st.energy();
    double T = sch.t0;
    bool cut = false;
    for (int sweep = 0; sweep < sch.sweeps; ++sweep, T *= sch.alpha) {
      std::size_t accepted = 0;
      for (std::size_t p = 0; p < m; ++p) {
        const auto k = static_cast<std::size_t>(uniform_index(rng, m));
        const double d = st.delta(k);
        if (metropolis_accept(d, T, d <= 0.0 ? 0.0 : uniform01(rng))) {
          st.flip(k);
          ++accepted;
          if (st.energy() < best_e) {
            best_e = st.energy();
            best = st.bits();
          }
        }
      }
      clock.charge(md + static_cast<double>(accepted) * 2.0 * md);
      if (clock.expired()) {
        cut = true;
        break;
      }
    }
    detail::emit_bits(sink, clock, q, best, Method::SimulatedAnnealing, read);
    if (cut) break;
  }
}

inline SampleSet simulated_annealing(const QuboProblem& q, const TimeBudget& budget,
                                     std::uint64_t seed, const AnnealConfig& cfg = {}) {
  SampleSet set{Method::SimulatedAnnealing,
                {{"budget", to_json(budget)}, {"schedule", to_json(resolve_schedule(q, cfg))}},
                seed, {}};
  BudgetClock clock(budget);
  simulated_annealing(q, clock, seed, cfg, CollectSink{&set});
  return set;
}

// ---------------------------------------------------------------------------
// Tabu search

struct TabuConfig {
  std::optional<int> tenure;                   // default min(20, ceil(num_vars / 4))
  std::optional<std::size_t> stagnation_limit;  // default 10 * num_vars
};

inline int default_tenure(std::size_t num_vars) {
  return static_cast<int>(std::min<std::size_t>(20, (num_vars + 3) / 4));
}

/// Single-flip tabu walk with a FIFO tabu list and best-seen aspiration.
class TabuSearch {
 public:
  TabuSearch(const QuboProblem& q, int tenure) : state_(q), tabu_(q.num_vars(), 0) {
    if (tenure < 1) throw Error(ErrorCode::InvalidTenure, "tabu tenure must be >= 1");
    tenure_ = static_cast<std::size_t>(tenure);
  }

  /// Start a fresh walk from x with an empty tabu list.
  void reset(const Bitstring& x) {
    state_.assign(x);
    fifo_.clear();
    std::fill(tabu_.begin(), tabu_.end(), 0);
    best_ = x;
    best_e_ = state_.energy();
    since_improvement_ = 0;
  }

  /// Test hook: seed the tabu list (oldest first) and the best-seen energy.
  void set_tabu(const std::vector<std::size_t>& indices, double best_energy) {
    for (std::size_t k : indices) push_tabu(k);
    best_e_ = best_energy;
  }

  /// One move; returns the flipped index.
  std::size_t step() {
    const std::size_t m = state_.size();
    const double e = state_.energy();
    std::size_t pick = m;
    double pick_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < m; ++k) {
      const double d = state_.delta(k);
      const bool allowed = !tabu_[k] || improves(e + d);
      if (allowed && d < pick_d) {
        pick_d = d;
        pick = k;
      }
    }
    if (pick == m) {
      // Every move tabu and none aspirates: release the oldest entry.
      pick = fifo_.front();
    }
    state_.flip(pick);
    push_tabu(pick);
    if (improves(state_.energy())) {
      best_e_ = state_.energy();
      best_ = state_.bits();
      since_improvement_ = 0;
    } else {
      ++since_improvement_;
    }
    return pick;
  }

  bool is_tabu(std::size_t k) const { return tabu_[k] != 0; }
  const Bitstring& state() const { return state_.bits(); }
  const Bitstring& best() const { return best_; }
  double best_energy() const { return best_e_; }
  std::size_t since_improvement() const { return since_improvement_; }
  std::size_t tenure() const { return tenure_; }

 private:
  // The tracked energy drifts by rounding; a revisit of the best state must
  // not read as an improvement.
  bool improves(double e) const { return e < best_e_ - 1e-12 * (1.0 + std::abs(best_e_)); }

  void push_tabu(std::size_t k) {
    if (tabu_[k]) {
      fifo_.erase(std::find(fifo_.begin(), fifo_.end(), k));
    }
    fifo_.push_back(k);
    tabu_[k] = 1;
    while (fifo_.size() > tenure_) {
      tabu_[fifo_.front()] = 0;
      fifo_.pop_front();
    }
  }

  FlipState state_;
  std::vector<std::uint8_t> tabu_;
  std::deque<std::size_t> fifo_;
  std::size_t tenure_ = 1;
  Bitstring best_;
  double best_e_ = 0.0;
  std::size_t since_improvement_ = 0;
};

/// One sample per walk: its best-seen state. A walk restarts after
/// stagnation_limit iterations without improving its best.
template <class Sink>
void tabu_search(const QuboProblem& q, BudgetClock& clock, std::uint64_t seed,
                 const TabuConfig& cfg, Sink&& sink) {
  const std::size_t m = q.num_vars();
  const int tenure = cfg.tenure ? *cfg.tenure : default_tenure(m);
  if (tenure < 1) throw Error(ErrorCode::InvalidTenure, "tabu tenure must be >= 1");
  const std::size_t stall = cfg.stagnation_limit ? *cfg.stagnation_limit : 10 * m;
  // A tenure >= num_vars would freeze every bit; cap it so one move stays open.
  TabuSearch walker(q, std::max(1, std::min(tenure, static_cast<int>(m) - 1)));
  Rng rng(seed);
  FlipState init(q);
  const double md = static_cast<double>(m);
  for (std::uint64_t run = 0; !clock.expired(); ++run) {
    init.randomize(rng);
    walker.reset(init.bits());
    clock.charge(detail::quad_work(q));
    while (walker.since_improvement() < stall) {
      walker.step();
      clock.charge(3.0 * md);
      if (clock.expired()) break;
    }
    detail::emit_bits(sink, clock, q, walker.best(), Method::Tabu, run);
  }
}

inline SampleSet tabu_search(const QuboProblem& q, const TimeBudget& budget, std::uint64_t seed,
                             const TabuConfig& cfg = {}) {
  const std::size_t m = q.num_vars();
  SampleSet set{Method::Tabu,
                {{"budget", to_json(budget)},
                 {"tenure", cfg.tenure ? *cfg.tenure : default_tenure(m)},
                 {"stagnation_limit", cfg.stagnation_limit ? *cfg.stagnation_limit : 10 * m}},
                seed, {}};
  BudgetClock clock(budget);
  tabu_search(q, clock, seed, cfg, CollectSink{&set});
  return set;
}

// ---------------------------------------------------------------------------
// MinVola greedy heuristic

/// Weights are kept as integer multiples of delta, so bounds and the
/// full-investment stop are exact.
template <class Sink>
void minvola_greedy(const Instance& inst, double delta, BudgetClock& clock, Sink&& sink) {
  if (!(delta > 0.0 && delta <= 1.0)) throw Error(ErrorCode::InvalidStep, "delta must lie in (0, 1]");
  const double inv = 1.0 / delta;
  const auto steps = static_cast<long long>(std::llround(inv));
  if (std::abs(inv - static_cast<double>(steps)) > 1e-9 * inv) {
    throw Error(ErrorCode::InvalidStep, "1/delta must be an integer");
  }
  if (inst.u.sum() < 1.0 - 1e-12) throw Error(ErrorCode::InfeasibleBounds, "sum of bounds < 1");

  const int n = inst.n;
  const double step = 1.0 / static_cast<double>(steps);
  std::vector<long long> cap(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    cap[static_cast<std::size_t>(j)] =
        static_cast<long long>(std::floor(inst.u(j) * static_cast<double>(steps) + 1e-9));
  }
  const double nd = static_cast<double>(n);
  const FeasibilityTolerance strict = FeasibilityTolerance::exact();

  for (int seed_asset = 0; seed_asset < n && !clock.expired(); ++seed_asset) {
    std::vector<long long> k(static_cast<std::size_t>(n), 0);
    Vector x = Vector::Zero(n);
    Vector sigma_x = Vector::Zero(n);  // Sigma * x
    double vol = 0.0, ret_sum = 0.0, mass = 0.0;
    long long total = 0;
    bool stuck = false;
    auto add = [&](int j) {
      vol += 2.0 * step * sigma_x(j) + step * step * inst.sigma(j, j);
      sigma_x += step * inst.sigma.col(j);
      ret_sum += step * inst.r(j);
      ++k[static_cast<std::size_t>(j)];
      ++total;
      mass = static_cast<double>(total) * step;
      x(j) = static_cast<double>(k[static_cast<std::size_t>(j)]) * step;
    };
    if (cap[static_cast<std::size_t>(seed_asset)] >= 1) {
      add(seed_asset);
    } else {
      stuck = true;
    }
    while (!stuck && total < steps) {
      int best_vol_j = -1, best_ret_j = -1;
      double best_vol = 0.0, best_ret = 0.0;
      for (int j = 0; j < n; ++j) {
        if (k[static_cast<std::size_t>(j)] + 1 > cap[static_cast<std::size_t>(j)]) continue;
        const double ret = (ret_sum + step * inst.r(j)) / (mass + step);
        if (best_ret_j < 0 || ret > best_ret) {
          best_ret = ret;
          best_ret_j = j;
        }
        if (ret >= inst.epsilon) {
          const double v = vol + 2.0 * step * sigma_x(j) + step * step * inst.sigma(j, j);
          if (best_vol_j < 0 || v < best_vol) {
            best_vol = v;
            best_vol_j = j;
          }
        }
      }
      if (best_vol_j >= 0) {
        add(best_vol_j);
      } else if (best_ret_j >= 0) {
        add(best_ret_j);
      } else {
        stuck = true;
      }
      clock.charge(4.0 * nd);
    }
    clock.charge(nd * nd);
    if (stuck) continue;
    if (!is_feasible(Variant::MinVola, x, inst, strict)) continue;
    Sample s;
    s.energy = portfolio_volatility(x, inst);
    s.payload = x;
    s.t = std::min(clock.now(), clock.limit_seconds());
    s.iteration = static_cast<std::uint64_t>(seed_asset);
    s.source = Method::Greedy;
    clock.count_sample();
    sink(s);
  }
}

inline SampleSet minvola_greedy(const Instance& inst, double delta, const TimeBudget& budget) {
  SampleSet set{Method::Greedy, {{"budget", to_json(budget)}, {"delta", delta}}, 0, {}};
  BudgetClock clock(budget);
  minvola_greedy(inst, delta, clock, CollectSink{&set});
  return set;
}

}  // namespace portopt
