#pragma once

// Price ingestion, return/covariance estimation and instance generation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "portopt/errors.hpp"
#include "portopt/io.hpp"
#include "portopt/rng.hpp"
#include "portopt/types.hpp"

namespace portopt {

inline constexpr double kTradingDaysPerYear = 252.0;

/// Complete closing-price series; prices(i, t) is asset i on dates[t].
struct PriceTable {
  std::vector<std::string> dates;
  std::vector<std::string> assets;
  Matrix prices;

  std::size_t num_assets() const { return assets.size(); }
  std::size_t num_dates() const { return dates.size(); }
};

struct AssetUniverse {
  std::vector<std::string> assets;
  Vector r;
  Matrix sigma;
  std::string start;
  std::string end;

  std::size_t size() const { return assets.size(); }
};

struct Instance {
  std::string id;  // file stem; not serialized
  int n = 0;
  std::vector<std::string> asset_ids;
  Vector r;
  Matrix sigma;
  Vector u;
  double epsilon = 0.0;
  double nu = 0.0;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  std::string window_start;
  std::string window_end;
  Variant variant = Variant::MinVola;

  std::size_t size() const { return static_cast<std::size_t>(n); }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline bool is_iso_date(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9}) {
    if (s[i] < '0' || s[i] > '9') return false;
  }
  return true;
}

}  // namespace detail

/// Parses `date,<id_1>,...,<id_k>` CSV. Assets with any empty cell are dropped.
inline PriceTable read_price_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "price CSV is empty");
  auto header = detail::split_csv_line(line);
  if (header.empty() || header[0] != "date") {
    throw Error(ErrorCode::ParseError, "price CSV header must start with 'date'");
  }
  const std::size_t k = header.size() - 1;
  std::vector<std::string> dates;
  std::vector<std::vector<double>> columns(k);
  std::vector<bool> complete(k, true);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected " +
                                             std::to_string(header.size()) + " cells");
    }
    if (!detail::is_iso_date(cells[0])) {
      throw Error(ErrorCode::ParseError,
                  "line " + std::to_string(line_no) + ": bad date '" + cells[0] + "'");
    }
    if (!dates.empty() && cells[0] <= dates.back()) {
      throw Error(ErrorCode::ParseError,
                  "line " + std::to_string(line_no) + ": dates must be strictly increasing");
    }
    dates.push_back(cells[0]);
    for (std::size_t a = 0; a < k; ++a) {
      const std::string& c = cells[a + 1];
      if (c.empty()) {
        complete[a] = false;
        columns[a].push_back(0.0);
        continue;
      }
      try {
        std::size_t used = 0;
        double v = std::stod(c, &used);
        if (used != c.size()) throw std::invalid_argument(c);
        columns[a].push_back(v);
      } catch (const std::exception&) {
        throw Error(ErrorCode::ParseError,
                    "line " + std::to_string(line_no) + ": bad price '" + c + "'");
      }
    }
  }
  PriceTable table;
  table.dates = std::move(dates);
  std::vector<std::size_t> keep;
  for (std::size_t a = 0; a < k; ++a) {
    if (complete[a]) keep.push_back(a);
  }
  table.prices.resize(static_cast<Eigen::Index>(keep.size()),
                      static_cast<Eigen::Index>(table.dates.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    table.assets.push_back(header[keep[i] + 1]);
    for (std::size_t t = 0; t < table.dates.size(); ++t) {
      table.prices(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = columns[keep[i]][t];
    }
  }
  return table;
}

inline PriceTable load_price_csv(const std::filesystem::path& path) {
  std::istringstream in(io::read_text(path));
  return read_price_csv(in);
}

inline void write_price_csv(std::ostream& out, const PriceTable& table) {
  out << "date";
  for (const auto& a : table.assets) out << ',' << a;
  out << '\n';
  for (std::size_t t = 0; t < table.dates.size(); ++t) {
    out << table.dates[t];
    for (Eigen::Index i = 0; i < table.prices.rows(); ++i) {
      out << ',' << io::format_double(table.prices(i, static_cast<Eigen::Index>(t)));
    }
    out << '\n';
  }
}

/// rd(i, t-1) = p(i, t) / p(i, t-1) - 1.
inline Matrix compute_daily_returns(const Matrix& prices) {
  if (prices.cols() < 2) {
    throw Error(ErrorCode::InsufficientData, "need at least 2 dates, got " +
                                                 std::to_string(prices.cols()));
  }
  for (Eigen::Index i = 0; i < prices.rows(); ++i) {
    for (Eigen::Index t = 0; t < prices.cols(); ++t) {
      if (!(prices(i, t) > 0.0) || !std::isfinite(prices(i, t))) {
        throw Error(ErrorCode::InvalidPrice, "asset " + std::to_string(i) + ", date " +
                                                 std::to_string(t) + ": price must be > 0");
      }
    }
  }
  const Eigen::Index T = prices.cols() - 1;
  Matrix rd(prices.rows(), T);
  for (Eigen::Index t = 0; t < T; ++t) {
    rd.col(t) = (prices.col(t + 1).array() / prices.col(t).array() - 1.0).matrix();
  }
  return rd;
}

inline Matrix compute_daily_returns(const PriceTable& table) {
  if (table.dates.size() < 2) {
    throw Error(ErrorCode::InsufficientData, "need at least 2 dates");
  }
  return compute_daily_returns(table.prices);
}

/// Geometric annualization: (prod_t (1 + rd))^(252 / |T|).
inline Vector annualize_returns(const Matrix& rd) {
  if (rd.cols() < 1) throw Error(ErrorCode::InsufficientData, "no daily returns");
  const double T = static_cast<double>(rd.cols());
  Vector r(rd.rows());
  for (Eigen::Index i = 0; i < rd.rows(); ++i) {
    double log_growth = 0.0;
    for (Eigen::Index t = 0; t < rd.cols(); ++t) {
      const double g = 1.0 + rd(i, t);
      if (!(g > 0.0)) {
        throw Error(ErrorCode::NonPositiveGrowth,
                    "asset " + std::to_string(i) + " has a day with 1 + rd <= 0");
      }
      log_growth += std::log(g);
    }
    r(i) = std::exp(log_growth * (kTradingDaysPerYear / T));
  }
  return r;
}

/// (252 / |T|) * sum_t (rd_i - mean_i)(rd_j - mean_j); exactly symmetric.
inline Matrix annualize_covariance(const Matrix& rd) {
  if (rd.cols() < 2) {
    throw Error(ErrorCode::InsufficientData, "covariance needs at least 2 daily returns");
  }
  const double T = static_cast<double>(rd.cols());
  Matrix centered = rd.colwise() - rd.rowwise().mean();
  Matrix sigma = Matrix::Zero(rd.rows(), rd.rows());
  sigma.selfadjointView<Eigen::Lower>().rankUpdate(centered, kTradingDaysPerYear / T);
  sigma.triangularView<Eigen::StrictlyUpper>() = sigma.transpose();
  return sigma;
}

inline AssetUniverse estimate_universe(const PriceTable& table) {
  Matrix rd = compute_daily_returns(table);
  AssetUniverse u;
  u.assets = table.assets;
  u.r = annualize_returns(rd);
  u.sigma = annualize_covariance(rd);
  u.start = table.dates.front();
  u.end = table.dates.back();
  return u;
}

/// min(1, max(1/10, 3/n)); the cap at 1 keeps u inside (0, 1] for n <= 3.
inline double asset_limit(int n) {
  return std::min(1.0, std::max(0.1, 3.0 / static_cast<double>(n)));
}

/// Uniform draws normalized to the simplex, then clipped to u with the excess
/// redistributed proportionally over unclipped assets until feasible.
inline Vector sample_random_portfolio(const Vector& u, Rng& rng) {
  const Eigen::Index n = u.size();
  if (n == 0) throw Error(ErrorCode::InfeasibleBounds, "empty bound vector");
  if (u.sum() < 1.0 - 1e-12) {
    throw Error(ErrorCode::InfeasibleBounds,
                "sum of upper bounds " + io::format_double(u.sum()) + " < 1");
  }
  Vector w(n);
  for (Eigen::Index i = 0; i < n; ++i) w(i) = uniform01(rng);
  double s = w.sum();
  if (s <= 0.0) {
    w.setConstant(1.0 / static_cast<double>(n));
  } else {
    w /= s;
  }
  std::vector<bool> clipped(static_cast<std::size_t>(n), false);
  for (int round = 0; round < 100; ++round) {
    double excess = 0.0;
    bool any = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!clipped[static_cast<std::size_t>(i)] && w(i) > u(i)) {
        excess += w(i) - u(i);
        w(i) = u(i);
        clipped[static_cast<std::size_t>(i)] = true;
        any = true;
      }
    }
    if (!any) return w;
    double free_mass = 0.0;
    Eigen::Index free_count = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!clipped[static_cast<std::size_t>(i)]) {
        free_mass += w(i);
        ++free_count;
      }
    }
    if (free_count == 0) break;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (clipped[static_cast<std::size_t>(i)]) continue;
      w(i) += free_mass > 0.0 ? excess * w(i) / free_mass
                              : excess / static_cast<double>(free_count);
    }
  }
  bool ok = true;
  for (Eigen::Index i = 0; i < n; ++i) ok = ok && w(i) <= u(i);
  if (!ok || std::abs(w.sum() - 1.0) > 1e-12) {
    throw Error(ErrorCode::InfeasibleBounds, "bound redistribution did not settle in 100 rounds");
  }
  return w;
}

/// Nearest-rank empirical quantile: the ceil(q * N)-th smallest value.
inline double nearest_rank_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorCode::InsufficientData, "quantile of empty sample");
  std::sort(values.begin(), values.end());
  const auto N = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(q * N - 1e-12));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

struct BuildOptions {
  int num_random_portfolios = 1000;
  double quantile = 0.7;
  bool net_returns = false;  // subtract 1 from the gross growth factors
  Variant variant = Variant::MinVola;
};

/// Draws n assets and derives epsilon, nu, lambda and u from the selection.
inline Instance build_instance(const AssetUniverse& universe, int n, std::uint64_t seed,
                               const BuildOptions& opts = {}) {
  if (n < 1 || static_cast<std::size_t>(n) > universe.size()) {
    throw Error(ErrorCode::InsufficientUniverse, "universe has " +
                                                     std::to_string(universe.size()) +
                                                     " assets, requested " + std::to_string(n));
  }
  if (opts.num_random_portfolios < 1) {
    throw Error(ErrorCode::InsufficientData, "num_random_portfolios must be >= 1");
  }
  Rng rng(seed);
  std::vector<std::size_t> idx(universe.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
    std::size_t j = i + static_cast<std::size_t>(uniform_index(rng, idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(static_cast<std::size_t>(n));
  std::sort(idx.begin(), idx.end());

  Instance inst;
  inst.n = n;
  inst.seed = seed;
  inst.variant = opts.variant;
  inst.window_start = universe.start;
  inst.window_end = universe.end;
  inst.r.resize(n);
  inst.sigma.resize(n, n);
  for (int a = 0; a < n; ++a) {
    const auto ia = static_cast<Eigen::Index>(idx[static_cast<std::size_t>(a)]);
    inst.asset_ids.push_back(universe.assets[static_cast<std::size_t>(ia)]);
    inst.r(a) = universe.r(ia) - (opts.net_returns ? 1.0 : 0.0);
    for (int b = 0; b < n; ++b) {
      inst.sigma(a, b) = universe.sigma(ia, static_cast<Eigen::Index>(idx[static_cast<std::size_t>(b)]));
    }
  }
  inst.u = Vector::Constant(n, asset_limit(n));

  std::vector<double> vols;
  vols.reserve(static_cast<std::size_t>(opts.num_random_portfolios));
  double ratio_sum = 0.0;
  for (int k = 0; k < opts.num_random_portfolios; ++k) {
    Vector w = sample_random_portfolio(inst.u, rng);
    const double vol = w.dot(inst.sigma * w);
    const double ret = w.dot(inst.r);
    vols.push_back(vol);
    ratio_sum += vol / ret;
  }
  inst.nu = nearest_rank_quantile(vols, opts.quantile);
  inst.epsilon = nearest_rank_quantile(std::vector<double>(inst.r.data(), inst.r.data() + n),
                                       opts.quantile);
  inst.lambda = ratio_sum / static_cast<double>(opts.num_random_portfolios);
  return inst;
}

inline nlohmann::json to_json(const Instance& inst) {
  nlohmann::json j;
  j["n"] = inst.n;
  j["asset_ids"] = inst.asset_ids;
  j["r"] = std::vector<double>(inst.r.data(), inst.r.data() + inst.r.size());
  std::vector<double> sigma;
  sigma.reserve(static_cast<std::size_t>(inst.n) * static_cast<std::size_t>(inst.n));
  for (int i = 0; i < inst.n; ++i) {
    for (int k = 0; k < inst.n; ++k) sigma.push_back(inst.sigma(i, k));
  }
  j["sigma"] = sigma;
  j["u"] = std::vector<double>(inst.u.data(), inst.u.data() + inst.u.size());
  j["epsilon"] = inst.epsilon;
  j["nu"] = inst.nu;
  j["lambda"] = inst.lambda;
  j["seed"] = inst.seed;
  j["source_window"] = {{"start", inst.window_start}, {"end", inst.window_end}};
  j["variant"] = to_string(inst.variant);
  return j;
}

inline Instance instance_from_json(const nlohmann::json& j) {
  try {
    Instance inst;
    inst.n = j.at("n").get<int>();
    const auto n = static_cast<std::size_t>(inst.n);
    inst.asset_ids = j.at("asset_ids").get<std::vector<std::string>>();
    auto r = j.at("r").get<std::vector<double>>();
    auto sigma = j.at("sigma").get<std::vector<double>>();
    auto u = j.at("u").get<std::vector<double>>();
    detail::require_size(inst.asset_ids.size(), n, "asset_ids");
    detail::require_size(r.size(), n, "r");
    detail::require_size(u.size(), n, "u");
    detail::require_size(sigma.size(), n * n, "sigma");
    inst.r = Eigen::Map<Vector>(r.data(), inst.n);
    inst.u = Eigen::Map<Vector>(u.data(), inst.n);
    inst.sigma.resize(inst.n, inst.n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < n; ++k) {
        inst.sigma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = sigma[i * n + k];
      }
    }
    inst.epsilon = j.at("epsilon").get<double>();
    inst.nu = j.at("nu").get<double>();
    inst.lambda = j.at("lambda").get<double>();
    inst.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("source_window")) {
      inst.window_start = j["source_window"].value("start", "");
      inst.window_end = j["source_window"].value("end", "");
    }
    if (j.contains("variant")) inst.variant = parse_variant(j["variant"].get<std::string>());
    return inst;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("instance JSON: ") + e.what());
  }
}

inline Instance load_instance(const std::filesystem::path& path) {
  Instance inst = instance_from_json(io::read_json(path));
  inst.id = path.stem().string();
  return inst;
}

inline void save_instance(const std::filesystem::path& path, const Instance& inst) {
  io::write_json(path, to_json(inst));
}

}  // namespace portopt
