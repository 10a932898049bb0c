#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "portopt/errors.hpp"
#include "portopt/instances.hpp"
#include "portopt/types.hpp"

namespace portopt {

inline double portfolio_return(const Vector& w, const Instance& inst) {
  detail::require_size(static_cast<std::size_t>(w.size()), inst.size(), "weights");
  return w.dot(inst.r);
}

inline double portfolio_volatility(const Vector& w, const Instance& inst) {
  detail::require_size(static_cast<std::size_t>(w.size()), inst.size(), "weights");
  return w.dot(inst.sigma * w);
}

inline double evaluate(Variant variant, const Vector& w, const Instance& inst) {
  switch (variant) {
    case Variant::MinVola: return portfolio_volatility(w, inst);
    case Variant::MaxRet: return portfolio_return(w, inst);
    case Variant::MultiObj:
      return portfolio_volatility(w, inst) - inst.lambda * portfolio_return(w, inst);
  }
  return 0.0;
}

/// Slack allowed on each constraint family when judging a candidate.
struct FeasibilityTolerance {
  double norm = 0.01;
  double ret = 0.0;
  double bound = 1e-9;

  /// Zero slack apart from floating-point rounding of the weight sum.
  static FeasibilityTolerance exact() { return {1e-12, 0.0, 0.0}; }
  static FeasibilityTolerance uniform(double t) { return {t, t, t}; }
};

enum class Constraint { Normalization, LowerBound, UpperBound, ReturnFloor, VolatilityCap };

inline const char* to_string(Constraint c) noexcept {
  switch (c) {
    case Constraint::Normalization: return "normalization";
    case Constraint::LowerBound: return "lower_bound";
    case Constraint::UpperBound: return "upper_bound";
    case Constraint::ReturnFloor: return "return_floor";
    case Constraint::VolatilityCap: return "volatility_cap";
  }
  return "?";
}

struct Violation {
  Constraint constraint;
  int asset = -1;  // only for bound violations
  double magnitude = 0.0;
};

struct FeasibilityReport {
  bool feasible = true;
  std::vector<Violation> violations;

  explicit operator bool() const { return feasible; }

  double magnitude(Constraint c) const {
    double m = 0.0;
    for (const auto& v : violations) {
      if (v.constraint == c) m = std::max(m, v.magnitude);
    }
    return m;
  }
};

inline FeasibilityReport is_feasible(Variant variant, const Vector& w, const Instance& inst,
                                     const FeasibilityTolerance& tol = {}) {
  detail::require_size(static_cast<std::size_t>(w.size()), inst.size(), "weights");
  FeasibilityReport rep;
  auto flag = [&](Constraint c, int asset, double mag) {
    rep.feasible = false;
    rep.violations.push_back({c, asset, mag});
  };
  const double gap = std::abs(w.sum() - 1.0);
  if (!(gap <= tol.norm)) flag(Constraint::Normalization, -1, gap);
  for (int i = 0; i < inst.n; ++i) {
    if (!(w(i) >= -tol.bound)) flag(Constraint::LowerBound, i, -w(i));
    if (!(w(i) <= inst.u(i) + tol.bound)) flag(Constraint::UpperBound, i, w(i) - inst.u(i));
  }
  if (variant == Variant::MinVola) {
    const double mu = w.dot(inst.r);
    if (!(mu >= inst.epsilon - tol.ret)) flag(Constraint::ReturnFloor, -1, inst.epsilon - mu);
  } else if (variant == Variant::MaxRet) {
    const double vol = w.dot(inst.sigma * w);
    if (!(vol <= inst.nu + tol.ret)) flag(Constraint::VolatilityCap, -1, vol - inst.nu);
  }
  return rep;
}

}  // namespace portopt
