#pragma once

// Exact references: an ADMM solver for the convex portfolio QPs with
// active-set polishing and KKT certification, MaxRet by efficient-frontier
// bisection, and an exhaustive QUBO oracle.
//
// Lagrangian sign convention (minimization form):
//   grad f(w) - eta * 1 - kappa * grad g(w) - lower + upper = 0
// where g(w) >= 0 is the variant's extra constraint (mu(w) - eps for MinVola,
// nu - sigma^2(w) for MaxRet), lower/upper >= 0 are the bound multipliers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include <json.hpp>

#include "portopt/errors.hpp"
#include "portopt/instances.hpp"
#include "portopt/io.hpp"
#include "portopt/model.hpp"
#include "portopt/qubo.hpp"
#include "portopt/types.hpp"

namespace portopt {

struct SolverSettings {
  double tol = 1e-8;
  int max_iter = 20000;
  double rho = 0.0;         // ADMM penalty; 0 picks mean(diag(2 Sigma))
  double relaxation = 1.6;  // over-relaxation in (0, 2)
  int check_every = 10;
  int polish_rounds = 50;   // active-set corrections per polish attempt
};

struct Duals {
  double eta = 0.0;
  double kappa = 0.0;
  Vector lower;
  Vector upper;
};

struct KktResiduals {
  double stationarity = 0.0;
  double primal = 0.0;
  double complementarity = 0.0;

  double max() const { return std::max({stationarity, primal, complementarity}); }
};

struct QpSolution {
  Variant variant = Variant::MinVola;
  Vector w;
  double objective = 0.0;
  Duals duals;
  KktResiduals residuals;
  int iterations = 0;
  bool converged = false;
  double relative_gap = 0.0;  // |primal - Lagrangian dual bound| / |primal|
  double lambda = 0.0;        // frontier parameter (MaxRet only)
};

// ---------------------------------------------------------------------------
// Projections

/// Euclidean projection onto {0 <= w <= u, sum w = 1} by a breakpoint sweep
/// over the shift a in clip(t + a, 0, u).
inline Vector project_capped_simplex(const Vector& t, const Vector& u) {
  const Eigen::Index n = t.size();
  std::vector<std::pair<double, int>> events;
  events.reserve(static_cast<std::size_t>(2 * n));
  for (Eigen::Index i = 0; i < n; ++i) {
    events.emplace_back(-t(i), +1);
    events.emplace_back(u(i) - t(i), -1);
  }
  std::sort(events.begin(), events.end());
  double s = 0.0, a_prev = events.front().first, shift = events.back().first;
  int slope = 0;
  for (const auto& [a, ds] : events) {
    const double s_next = s + slope * (a - a_prev);
    if (slope > 0 && s_next >= 1.0) {
      shift = a_prev + (1.0 - s) / slope;
      break;
    }
    s = s_next;
    a_prev = a;
    slope += ds;
  }
  Vector w(n);
  for (Eigen::Index i = 0; i < n; ++i) w(i) = std::clamp(t(i) + shift, 0.0, u(i));
  return w;
}

/// Largest mu(w) over {0 <= w <= u, sum w = 1}: fill by descending return.
inline Vector max_return_portfolio(const Instance& inst) {
  std::vector<int> order(inst.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return inst.r(a) > inst.r(b); });
  Vector w = Vector::Zero(inst.n);
  double left = 1.0;
  for (int i : order) {
    if (left <= 0.0) break;
    w(i) = std::min(inst.u(i), left);
    left -= w(i);
  }
  return w;
}

/// Exact projection onto the variant's feasible set. The return halfspace is
/// handled through its multiplier b >= 0: mu(P(v + b r)) is nondecreasing in
/// b, so b is bracketed and then pinned by Illinois regula falsi.
inline Vector project_feasible(const Vector& v, const Instance& inst, bool with_return) {
  Vector w = project_capped_simplex(v, inst.u);
  if (!with_return) return w;
  const double eps = inst.epsilon;
  auto phi = [&](double b) {
    w = project_capped_simplex(v + b * inst.r, inst.u);
    return w.dot(inst.r) - eps;
  };
  double f_lo = phi(0.0);
  if (f_lo >= 0.0) return w;
  const double r_spread = inst.r.maxCoeff() - inst.r.minCoeff();
  if (!(r_spread > 0.0)) return w;
  double lo = 0.0;
  double hi = (v.maxCoeff() - v.minCoeff() + 1.0) / r_spread;
  double f_hi = phi(hi);
  for (int k = 0; f_hi < 0.0; ++k) {
    if (k > 200) throw Error(ErrorCode::Infeasible, "return floor unreachable within the bounds");
    lo = hi;
    f_lo = f_hi;
    hi *= 2.0;
    f_hi = phi(hi);
  }
  const double ftol = 1e-15 * (1.0 + std::abs(eps));
  int side = 0;
  for (int it = 0; it < 200 && f_hi > ftol && hi - lo > 1e-16 * hi; ++it) {
    double b = hi - f_hi * (hi - lo) / (f_hi - f_lo);
    if (!(b > lo && b < hi)) b = 0.5 * (lo + hi);
    const double f = phi(b);
    if (f >= 0.0) {
      hi = b;
      f_hi = f;
      if (side == +1) f_lo *= 0.5;
      side = +1;
    } else {
      lo = b;
      f_lo = f;
      if (side == -1) f_hi *= 0.5;
      side = -1;
    }
  }
  phi(hi);
  return w;
}

/// Dykstra's alternating projections over the box, the normalization
/// hyperplane and (optionally) the return halfspace.
inline Vector dykstra_project(const Vector& v, const Instance& inst, bool with_return,
                              int max_iter = 200000, double tol = 1e-13) {
  const Eigen::Index n = v.size();
  const double nd = static_cast<double>(n);
  const double rr = inst.r.squaredNorm();
  Vector x = v;
  Vector p_box = Vector::Zero(n), p_hyp = Vector::Zero(n), p_ret = Vector::Zero(n);
  for (int it = 0; it < max_iter; ++it) {
    const Vector x_start = x;
    const Vector q_box = p_box, q_hyp = p_hyp, q_ret = p_ret;
    Vector y = x + p_box;
    x = y.cwiseMax(0.0).cwiseMin(inst.u);
    p_box = y - x;

    y = x + p_hyp;
    x = y.array() - (y.sum() - 1.0) / nd;
    p_hyp = y - x;

    if (with_return) {
      y = x + p_ret;
      const double gap = inst.epsilon - y.dot(inst.r);
      x = gap > 0.0 ? Vector(y + (gap / rr) * inst.r) : y;
      p_ret = y - x;
    }
    // The cycle end point can sit still while the corrections drift.
    const double change = std::max({(x - x_start).lpNorm<Eigen::Infinity>(),
                                    (p_box - q_box).lpNorm<Eigen::Infinity>(),
                                    (p_hyp - q_hyp).lpNorm<Eigen::Infinity>(),
                                    (p_ret - q_ret).lpNorm<Eigen::Infinity>()});
    if (change <= tol) break;
  }
  return x;
}

// ---------------------------------------------------------------------------
// KKT certification

namespace detail {

struct ProblemData {
  Vector c;                 // objective gradient at w
  std::optional<Vector> a;  // gradient of the extra constraint g(w) >= 0
  double slack = 0.0;       // g(w)
};

inline ProblemData problem_data(Variant variant, const Vector& w, const Instance& inst) {
  ProblemData d;
  switch (variant) {
    case Variant::MinVola:
      d.c = 2.0 * (inst.sigma * w);
      d.a = inst.r;
      d.slack = w.dot(inst.r) - inst.epsilon;
      break;
    case Variant::MultiObj:
      d.c = 2.0 * (inst.sigma * w) - inst.lambda * inst.r;
      break;
    case Variant::MaxRet:
      d.c = -inst.r;
      d.a = -2.0 * (inst.sigma * w);
      d.slack = inst.nu - w.dot(inst.sigma * w);
      break;
  }
  return d;
}

}  // namespace detail

inline KktResiduals kkt_residuals(Variant variant, const Vector& w, const Duals& duals,
                                  const Instance& inst) {
  detail::require_size(static_cast<std::size_t>(w.size()), inst.size(), "weights");
  const Eigen::Index n = w.size();
  const Vector lower = duals.lower.size() == n ? duals.lower : Vector::Zero(n);
  const Vector upper = duals.upper.size() == n ? duals.upper : Vector::Zero(n);
  const auto d = detail::problem_data(variant, w, inst);
  Vector g = d.c - duals.eta * Vector::Ones(n) - lower + upper;
  if (d.a) g -= duals.kappa * *d.a;
  KktResiduals res;
  res.stationarity = g.lpNorm<Eigen::Infinity>();
  double primal = std::abs(w.sum() - 1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    primal = std::max({primal, -w(i), w(i) - inst.u(i)});
  }
  if (d.a) primal = std::max(primal, -d.slack);
  res.primal = std::max(primal, 0.0);
  double comp = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    comp = std::max({comp, std::abs(lower(i) * w(i)), std::abs(upper(i) * (inst.u(i) - w(i))),
                     -lower(i), -upper(i)});
  }
  if (d.a) {
    comp = std::max({comp, std::abs(duals.kappa * d.slack), -duals.kappa});
  } else {
    comp = std::max(comp, std::abs(duals.kappa));
  }
  res.complementarity = comp;
  return res;
}

/// Coordinate status in an active-set guess.
enum class Bound : std::int8_t { Free = 0, Lower = -1, Upper = 1 };

struct ActiveSet {
  std::vector<Bound> bound;
  bool constraint = false;  // extra constraint treated as active
};

inline ActiveSet guess_active_set(Variant variant, const Vector& w, const Instance& inst, double thr) {
  ActiveSet as;
  as.bound.resize(inst.size(), Bound::Free);
  for (int i = 0; i < inst.n; ++i) {
    if (w(i) <= thr) {
      as.bound[static_cast<std::size_t>(i)] = Bound::Lower;
    } else if (w(i) >= inst.u(i) - thr) {
      as.bound[static_cast<std::size_t>(i)] = Bound::Upper;
    }
  }
  if (variant != Variant::MultiObj) {
    as.constraint = detail::problem_data(variant, w, inst).slack <= thr * (1.0 + std::abs(inst.epsilon));
  }
  return as;
}

/// Multipliers that best satisfy stationarity and sign conditions at w for a
/// given active set. Free coordinates need c_i - eta - kappa a_i = 0, lower
/// ones >= 0, upper ones <= 0. For fixed kappa the optimal eta is a midpoint
/// in closed form; kappa comes from least squares on the free set when that
/// determines it, otherwise from a golden-section search.
inline Duals fit_duals(Variant variant, const Vector& w, const Instance& inst, const ActiveSet& as) {
  const Eigen::Index n = w.size();
  const auto d = detail::problem_data(variant, w, inst);
  const bool use_kappa = d.a.has_value() && as.constraint;
  const Vector a = use_kappa ? *d.a : Vector::Zero(n);

  auto eta_for = [&](double kappa, double* violation) {
    double hi = -std::numeric_limits<double>::infinity();  // eta >= these
    double lo = std::numeric_limits<double>::infinity();   // eta <= these
    for (Eigen::Index i = 0; i < n; ++i) {
      const double ct = d.c(i) - kappa * a(i);
      const Bound b = as.bound[static_cast<std::size_t>(i)];
      if (b != Bound::Lower) hi = std::max(hi, ct);
      if (b != Bound::Upper) lo = std::min(lo, ct);
    }
    double eta;
    if (std::isfinite(hi) && std::isfinite(lo)) {
      eta = 0.5 * (hi + lo);
    } else if (std::isfinite(hi)) {
      eta = hi;
    } else if (std::isfinite(lo)) {
      eta = lo;
    } else {
      eta = 0.0;
    }
    if (violation) {
      *violation = (std::isfinite(hi) && std::isfinite(lo)) ? std::max(0.0, 0.5 * (hi - lo)) : 0.0;
    }
    return eta;
  };

  double kappa = 0.0;
  if (use_kappa) {
    // Least squares on the free coordinates: c_i = eta + kappa a_i.
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (as.bound[static_cast<std::size_t>(i)] == Bound::Free) free.push_back(i);
    }
    bool solved = false;
    if (free.size() >= 2) {
      Matrix A(static_cast<Eigen::Index>(free.size()), 2);
      Vector rhs(static_cast<Eigen::Index>(free.size()));
      for (std::size_t k = 0; k < free.size(); ++k) {
        A(static_cast<Eigen::Index>(k), 0) = 1.0;
        A(static_cast<Eigen::Index>(k), 1) = a(free[k]);
        rhs(static_cast<Eigen::Index>(k)) = d.c(free[k]);
      }
      Eigen::ColPivHouseholderQR<Matrix> qr(A);
      if (qr.rank() == 2) {
        kappa = qr.solve(rhs)(1);
        solved = kappa >= 0.0;
      }
    }
    if (!solved) {
      auto V = [&](double k) {
        double v;
        eta_for(k, &v);
        return v;
      };
      double K = 1.0;
      const double v0 = V(0.0);
      for (int it = 0; it < 60 && V(2.0 * K) < V(K); ++it) K *= 2.0;
      double lo = 0.0, hi = 2.0 * K;
      const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
      double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
      double f1 = V(x1), f2 = V(x2);
      for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + hi); ++it) {
        if (f1 <= f2) {
          hi = x2;
          x2 = x1;
          f2 = f1;
          x1 = hi - gr * (hi - lo);
          f1 = V(x1);
        } else {
          lo = x1;
          x1 = x2;
          f1 = f2;
          x2 = lo + gr * (hi - lo);
          f2 = V(x2);
        }
      }
      kappa = 0.5 * (lo + hi);
      if (v0 <= V(kappa)) kappa = 0.0;
    }
  }
  Duals duals;
  duals.kappa = kappa;
  duals.eta = eta_for(kappa, nullptr);
  duals.lower = Vector::Zero(n);
  duals.upper = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double g = d.c(i) - duals.eta - kappa * a(i);
    const Bound b = as.bound[static_cast<std::size_t>(i)];
    if (b == Bound::Lower) duals.lower(i) = g;
    if (b == Bound::Upper) duals.upper(i) = -g;
  }
  return duals;
}

/// Lagrangian lower bound; equals the objective at an exact KKT point.
inline double lagrangian_bound(Variant variant, const Vector& w, const Duals& duals, const Instance& inst) {
  const auto d = detail::problem_data(variant, w, inst);
  double f = evaluate(variant, w, inst);
  if (variant == Variant::MaxRet) f = -f;
  double L = f - duals.eta * (w.sum() - 1.0);
  if (d.a) L -= duals.kappa * d.slack;
  if (duals.lower.size() == w.size()) L -= duals.lower.dot(w);
  if (duals.upper.size() == w.size()) L += duals.upper.dot(w - inst.u);
  return L;
}

namespace detail {

/// Solve the equality-constrained KKT system for an active set and repair
/// the set until primal and dual signs agree. Returns the certified solution
/// or nullopt.
inline std::optional<QpSolution> polish(Variant variant, const Instance& inst, const Vector& guess,
                                        double thr, const SolverSettings& st) {
  const int n = inst.n;
  const Matrix P = 2.0 * inst.sigma;
  const Vector qv = variant == Variant::MultiObj ? Vector(-inst.lambda * inst.r) : Vector::Zero(n);
  ActiveSet as = guess_active_set(variant, guess, inst, thr);
  const double bound_slack = 1e-12;
  for (int round = 0; round < st.polish_rounds; ++round) {
    std::vector<int> F;
    Vector w = Vector::Zero(n);
    double fixed_sum = 0.0, fixed_ret = 0.0;
    for (int i = 0; i < n; ++i) {
      switch (as.bound[static_cast<std::size_t>(i)]) {
        case Bound::Free: F.push_back(i); break;
        case Bound::Upper:
          w(i) = inst.u(i);
          fixed_sum += inst.u(i);
          fixed_ret += inst.u(i) * inst.r(i);
          break;
        case Bound::Lower: break;
      }
    }
    const bool con = variant == Variant::MinVola && as.constraint;
    const auto nf = static_cast<Eigen::Index>(F.size());
    if (nf > 0) {
      const Eigen::Index dim = nf + 1 + (con ? 1 : 0);
      Matrix K = Matrix::Zero(dim, dim);
      Vector rhs = Vector::Zero(dim);
      for (Eigen::Index a = 0; a < nf; ++a) {
        const int i = F[static_cast<std::size_t>(a)];
        for (Eigen::Index b = 0; b < nf; ++b) K(a, b) = P(i, F[static_cast<std::size_t>(b)]);
        K(a, nf) = -1.0;
        K(nf, a) = 1.0;
        if (con) {
          K(a, nf + 1) = -inst.r(i);
          K(nf + 1, a) = inst.r(i);
        }
        double r = -qv(i);
        for (int j = 0; j < n; ++j) {
          if (as.bound[static_cast<std::size_t>(j)] == Bound::Upper) r -= P(i, j) * inst.u(j);
        }
        rhs(a) = r;
      }
      rhs(nf) = 1.0 - fixed_sum;
      if (con) rhs(nf + 1) = inst.epsilon - fixed_ret;
      Eigen::CompleteOrthogonalDecomposition<Matrix> cod(K);
      const Vector sol = cod.solve(rhs);
      if (!sol.allFinite() || (K * sol - rhs).lpNorm<Eigen::Infinity>() > 1e-9 * (1.0 + rhs.lpNorm<Eigen::Infinity>())) {
        return std::nullopt;
      }
      for (Eigen::Index a = 0; a < nf; ++a) w(F[static_cast<std::size_t>(a)]) = sol(a);
    }
    bool changed = false;
    for (int i : F) {
      if (w(i) < -bound_slack) {
        as.bound[static_cast<std::size_t>(i)] = Bound::Lower;
        changed = true;
      } else if (w(i) > inst.u(i) + bound_slack) {
        as.bound[static_cast<std::size_t>(i)] = Bound::Upper;
        changed = true;
      } else {
        w(i) = std::clamp(w(i), 0.0, inst.u(i));
      }
    }
    if (changed) continue;
    if (variant == Variant::MinVola && !as.constraint && w.dot(inst.r) < inst.epsilon) {
      as.constraint = true;
      continue;
    }
    Duals duals = fit_duals(variant, w, inst, as);
    const double dual_tol = st.tol;
    for (int i = 0; i < n; ++i) {
      const auto b = as.bound[static_cast<std::size_t>(i)];
      if ((b == Bound::Lower && duals.lower(i) < -dual_tol) || (b == Bound::Upper && duals.upper(i) < -dual_tol)) {
        as.bound[static_cast<std::size_t>(i)] = Bound::Free;
        changed = true;
      }
    }
    if (as.constraint && variant == Variant::MinVola && duals.kappa < -dual_tol) {
      as.constraint = false;
      changed = true;
    }
    if (changed) continue;
    QpSolution sol;
    sol.variant = variant;
    sol.w = w;
    sol.objective = evaluate(variant, w, inst);
    sol.duals = std::move(duals);
    sol.residuals = kkt_residuals(variant, w, sol.duals, inst);
    if (sol.residuals.max() > st.tol) return std::nullopt;
    sol.converged = true;
    sol.relative_gap = 0.0;
    return sol;
  }
  return std::nullopt;
}

inline void check_bounds_feasible(const Instance& inst) {
  if (inst.u.sum() < 1.0 - 1e-12) {
    throw Error(ErrorCode::Infeasible, "sum of upper bounds is below 1");
  }
  if ((inst.u.array() <= 0.0).any()) throw Error(ErrorCode::Infeasible, "upper bounds must be > 0");
}

}  // namespace detail

/// MinVola or MultiObj (MaxRet dispatches to solve_maxret).
inline QpSolution solve_maxret(const Instance& inst, const SolverSettings& settings = {});

inline QpSolution solve_qp(Variant variant, const Instance& inst, const SolverSettings& settings = {}) {
  if (variant == Variant::MaxRet) return solve_maxret(inst, settings);
  if (!(settings.tol > 0.0)) throw Error(ErrorCode::NotConverged, "tolerance must be > 0");
  detail::check_bounds_feasible(inst);
  const bool with_return = variant == Variant::MinVola;
  if (with_return) {
    const double best = max_return_portfolio(inst).dot(inst.r);
    if (best < inst.epsilon - 1e-12 * (1.0 + std::abs(inst.epsilon))) {
      throw Error(ErrorCode::Infeasible, "return floor " + io::format_double(inst.epsilon) +
                                             " exceeds the best attainable return " + io::format_double(best));
    }
  }
  const int n = inst.n;
  const Matrix P = 2.0 * inst.sigma;
  const Vector qv = variant == Variant::MultiObj ? Vector(-inst.lambda * inst.r) : Vector::Zero(n);
  double rho = settings.rho > 0.0 ? settings.rho : std::max(1e-6, P.diagonal().mean());
  const double alpha = settings.relaxation;

  auto factor = [&](double r) { return Eigen::LLT<Matrix>(P + r * Matrix::Identity(n, n)); };
  Eigen::LLT<Matrix> llt = factor(rho);
  Vector z = project_feasible(Vector::Constant(n, 1.0 / n), inst, with_return);
  Vector y = Vector::Zero(n);
  Vector x = z;
  double target = 1e-6;
  const double thresholds[] = {1e-7, 1e-5, 1e-9, 1e-3};
  auto try_polish = [&](const Vector& guess, int iters) -> std::optional<QpSolution> {
    for (double thr : thresholds) {
      if (auto sol = detail::polish(variant, inst, guess, thr, settings)) {
        sol->iterations = iters;
        return sol;
      }
    }
    return std::nullopt;
  };
  if (auto sol = try_polish(z, 0)) return *sol;

  int checks = 0;
  for (int k = 1; k <= settings.max_iter; ++k) {
    x = llt.solve(rho * (z - y) - qv);
    const Vector xh = alpha * x + (1.0 - alpha) * z;
    const Vector z_old = z;
    z = project_feasible(xh + y, inst, with_return);
    y += xh - z;
    if (k % settings.check_every != 0) continue;
    const double rp = (x - z).lpNorm<Eigen::Infinity>();
    const double rd = rho * (z - z_old).lpNorm<Eigen::Infinity>();
    if (std::max(rp, rd) <= target) {
      if (auto sol = try_polish(z, k)) return *sol;
      target = std::max(target * 0.1, 1e-15);
    }
    if (++checks % 20 == 0 && rp > 0.0 && rd > 0.0) {
      const double ratio = std::sqrt(rp / rd);
      if (ratio > 5.0 || ratio < 0.2) {
        const double new_rho = std::clamp(rho * ratio, 1e-8, 1e8);
        y *= rho / new_rho;
        rho = new_rho;
        llt = factor(rho);
      }
    }
  }
  if (auto sol = try_polish(z, settings.max_iter)) return *sol;
  QpSolution sol;
  sol.variant = variant;
  sol.w = z;
  sol.objective = evaluate(variant, z, inst);
  sol.duals = fit_duals(variant, z, inst, guess_active_set(variant, z, inst, 1e-7));
  sol.residuals = kkt_residuals(variant, z, sol.duals, inst);
  sol.iterations = settings.max_iter;
  sol.converged = false;
  const double bound = lagrangian_bound(variant, z, sol.duals, inst);
  sol.relative_gap = std::abs(sol.objective - bound) / std::max(std::abs(sol.objective), 1e-300);
  return sol;
}

/// MaxRet: bisection over the MultiObj risk-aversion parameter until the
/// volatility cap binds, then an exact step along the last bracket.
inline QpSolution solve_maxret(const Instance& inst, const SolverSettings& settings) {
  detail::check_bounds_feasible(inst);
  auto finish = [&](Vector w, int iters, double lam) {
    QpSolution sol;
    sol.variant = Variant::MaxRet;
    sol.w = std::move(w);
    sol.objective = portfolio_return(sol.w, inst);
    sol.lambda = lam;
    sol.iterations = iters;
    sol.duals = fit_duals(Variant::MaxRet, sol.w, inst, guess_active_set(Variant::MaxRet, sol.w, inst, 1e-9));
    sol.residuals = kkt_residuals(Variant::MaxRet, sol.w, sol.duals, inst);
    sol.converged = sol.residuals.max() <= std::max(settings.tol, 1e2 * settings.tol);
    const double bound = lagrangian_bound(Variant::MaxRet, sol.w, sol.duals, inst);
    sol.relative_gap = std::abs(-sol.objective - bound) / std::max(std::abs(sol.objective), 1e-300);
    return sol;
  };
  const double vtol = settings.tol * std::max(1.0, std::abs(inst.nu));
  Vector top = max_return_portfolio(inst);
  if (portfolio_volatility(top, inst) <= inst.nu) return finish(top, 0, std::numeric_limits<double>::infinity());

  Instance sub = inst;
  int iters = 0;
  auto frontier = [&](double lam) {
    sub.lambda = lam;
    QpSolution s = solve_qp(Variant::MultiObj, sub, settings);
    iters += s.iterations;
    if (!s.converged) throw Error(ErrorCode::NotConverged, "frontier sub-problem did not converge");
    return s.w;
  };
  Vector w_lo = frontier(0.0);
  const double v_min = portfolio_volatility(w_lo, inst);
  if (v_min > inst.nu + vtol) {
    throw Error(ErrorCode::Infeasible, "minimum-variance portfolio exceeds the volatility cap");
  }
  if (v_min >= inst.nu - vtol) return finish(w_lo, iters, 0.0);

  double lo = 0.0, hi = 1.0;
  Vector w_hi = frontier(hi);
  for (int k = 0; portfolio_volatility(w_hi, inst) <= inst.nu; ++k) {
    if (k > 80) return finish(w_hi, iters, hi);
    lo = hi;
    w_lo = w_hi;
    hi *= 2.0;
    w_hi = frontier(hi);
  }
  for (int k = 0; k < 200; ++k) {
    const double gap = inst.nu - portfolio_volatility(w_lo, inst);
    if (gap <= vtol || hi - lo <= 1e-14 * hi) break;
    const double mid = 0.5 * (lo + hi);
    Vector w = frontier(mid);
    if (portfolio_volatility(w, inst) <= inst.nu) {
      lo = mid;
      w_lo = std::move(w);
    } else {
      hi = mid;
      w_hi = std::move(w);
    }
  }
  // sigma^2 along w_lo + t (w_hi - w_lo) is a convex quadratic; take the
  // largest t in [0, 1] that keeps it at or below nu.
  const Vector dw = w_hi - w_lo;
  const double qa = dw.dot(inst.sigma * dw);
  const double qb = 2.0 * w_lo.dot(inst.sigma * dw);
  const double qc = portfolio_volatility(w_lo, inst) - inst.nu;
  double t = 0.0;
  if (qa > 0.0) {
    const double disc = std::max(0.0, qb * qb - 4.0 * qa * qc);
    t = (-qb + std::sqrt(disc)) / (2.0 * qa);
  } else if (qb > 0.0) {
    t = -qc / qb;
  }
  t = std::clamp(t, 0.0, 1.0);
  Vector w = w_lo + t * dw;
  if (portfolio_volatility(w, inst) > inst.nu) w = w_lo;
  return finish(std::move(w), iters, 0.5 * (lo + hi));
}

inline nlohmann::json to_json(const QpSolution& s) {
  return {{"variant", to_string(s.variant)},
          {"w", std::vector<double>(s.w.data(), s.w.data() + s.w.size())},
          {"objective", s.objective},
          {"residuals",
           {{"stationarity", s.residuals.stationarity},
            {"primal", s.residuals.primal},
            {"complementarity", s.residuals.complementarity}}},
          {"iterations", s.iterations},
          {"converged", s.converged}};
}

inline QpSolution solution_from_json(const nlohmann::json& j) {
  try {
    QpSolution s;
    s.variant = parse_variant(j.at("variant").get<std::string>());
    auto w = j.at("w").get<std::vector<double>>();
    s.w = Eigen::Map<Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
    s.objective = j.at("objective").get<double>();
    const auto& r = j.at("residuals");
    s.residuals = {r.at("stationarity").get<double>(), r.at("primal").get<double>(),
                   r.at("complementarity").get<double>()};
    s.iterations = j.at("iterations").get<int>();
    s.converged = j.at("converged").get<bool>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("solution JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Exhaustive QUBO oracle

struct BruteForceResult {
  Bitstring bits;
  double energy = 0.0;
};

/// Depth-first over x_0, x_1, ... (0 before 1), so the first strict minimum
/// is the lexicographically smallest optimal bitstring.
inline BruteForceResult brute_force_qubo(const QuboProblem& q, std::size_t max_vars = 24) {
  const std::size_t m = q.num_vars();
  if (m > max_vars) {
    throw Error(ErrorCode::SizeLimit, std::to_string(m) + " variables exceed the brute-force limit of " +
                                          std::to_string(max_vars));
  }
  const Matrix& S = q.symmetric();
  Bitstring x(m, 0), best(m, 0);
  double best_e = std::numeric_limits<double>::infinity();
  // partial[k] is the energy contributed by x_0 .. x_{k-1}.
  std::vector<double> partial(m + 1, 0.0);
  std::size_t k = 0;
  for (;;) {
    if (k == m) {
      if (partial[m] < best_e) {
        best_e = partial[m];
        best = x;
      }
      // Backtrack to the deepest variable still at 0 and set it to 1.
      while (k > 0 && x[k - 1]) {
        x[k - 1] = 0;
        --k;
      }
      if (k == 0) break;
      const std::size_t j = k - 1;
      x[j] = 1;
      double inc = S(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j));
      for (std::size_t l = 0; l < j; ++l) {
        if (x[l]) inc += S(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(j));
      }
      partial[k] = partial[j] + inc;
      continue;
    }
    x[k] = 0;
    partial[k + 1] = partial[k];
    ++k;
  }
  return {best, energy(q, best)};
}

}  // namespace portopt
