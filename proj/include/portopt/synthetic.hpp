#pragma once

// Seeded factor-model price paths, for demos and tests where no market data
// is at hand.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>

#include "portopt/instances.hpp"
#include "portopt/rng.hpp"

namespace portopt {

struct SyntheticMarket {
  int num_assets = 200;
  int num_days = 1000;
  int num_factors = 3;
  std::uint64_t seed = 7;
};

namespace detail {

inline double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  double u2 = uniform01(rng);
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

inline bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

/// Weekdays from 2020-01-02 on.
inline std::vector<std::string> business_days(int count) {
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  std::vector<std::string> out;
  int y = 2020, m = 1, d = 2, weekday = 3;  // 2020-01-02 was a Thursday
  char buf[32];
  while (static_cast<int>(out.size()) < count) {
    if (weekday < 5) {
      std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", y, m, d);
      out.emplace_back(buf);
    }
    weekday = (weekday + 1) % 7;
    const int month_len = kDays[m - 1] + ((m == 2 && is_leap(y)) ? 1 : 0);
    if (++d > month_len) {
      d = 1;
      if (++m > 12) {
        m = 1;
        ++y;
      }
    }
  }
  return out;
}

}  // namespace detail

inline PriceTable synthetic_prices(const SyntheticMarket& cfg) {
  Rng rng(cfg.seed);
  const int n = cfg.num_assets, T = cfg.num_days, K = cfg.num_factors;
  Matrix beta(n, K);
  Vector drift(n), idio(n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < K; ++k) beta(i, k) = (k == 0 ? 0.8 : 0.0) + 0.4 * detail::standard_normal(rng);
    drift(i) = 0.0003 + 0.0006 * detail::standard_normal(rng);
    idio(i) = 0.008 + 0.012 * uniform01(rng);
  }
  PriceTable table;
  table.dates = detail::business_days(T);
  for (int i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "SYN%03d", i);
    table.assets.emplace_back(buf);
  }
  table.prices.resize(n, T);
  for (int i = 0; i < n; ++i) table.prices(i, 0) = 20.0 + 180.0 * uniform01(rng);
  Vector f(K);
  for (int t = 1; t < T; ++t) {
    for (int k = 0; k < K; ++k) f(k) = 0.01 * detail::standard_normal(rng);
    for (int i = 0; i < n; ++i) {
      double ret = drift(i) + beta.row(i).dot(f) + idio(i) * detail::standard_normal(rng);
      ret = std::max(ret, -0.5);
      table.prices(i, t) = table.prices(i, t - 1) * (1.0 + ret);
    }
  }
  return table;
}

}  // namespace portopt
