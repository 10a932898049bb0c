#pragma once

// Penalty QUBO for MinVola:
//   f(w) = w' Sigma w + phi (mu(w) - eps)^2 + psi (sum w - 1)^2
// with w_i = u_i (2^-d x_{i,d+1} + sum_{j<=d} 2^-j x_{i,j}).

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "portopt/errors.hpp"
#include "portopt/instances.hpp"
#include "portopt/model.hpp"
#include "portopt/types.hpp"

namespace portopt {

using Bitstring = std::vector<std::uint8_t>;

inline std::string to_string(const Bitstring& x) {
  std::string s(x.size(), '0');
  for (std::size_t k = 0; k < x.size(); ++k) s[k] = x[k] ? '1' : '0';
  return s;
}

inline Bitstring parse_bitstring(const std::string& s) {
  Bitstring x(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (s[k] != '0' && s[k] != '1') throw Error(ErrorCode::ParseError, "bitstring must be 0/1");
    x[k] = s[k] == '1';
  }
  return x;
}

/// Bit layout: variable i*(d+1)+j holds bit j of asset i (j = 0..d).
struct DecodeMeta {
  int d = 3;
  Vector u;

  std::size_t num_assets() const { return static_cast<std::size_t>(u.size()); }
  std::size_t bits_per_asset() const { return static_cast<std::size_t>(d) + 1; }
  std::size_t num_vars() const { return num_assets() * bits_per_asset(); }

  /// The fraction of u_i carried by bit j: 2^-(j+1) for j < d, 2^-d for j = d.
  double bit_fraction(std::size_t j) const {
    return std::ldexp(1.0, -static_cast<int>(j < static_cast<std::size_t>(d) ? j + 1 : j));
  }
};

inline Vector decode(const Bitstring& x, const DecodeMeta& meta) {
  detail::require_size(x.size(), meta.num_vars(), "bitstring");
  const std::size_t b = meta.bits_per_asset();
  Vector w(meta.u.size());
  for (std::size_t i = 0; i < meta.num_assets(); ++i) {
    double frac = 0.0;
    for (std::size_t j = 0; j < b; ++j) {
      if (x[i * b + j]) frac += meta.bit_fraction(j);
    }
    w(static_cast<Eigen::Index>(i)) = meta.u(static_cast<Eigen::Index>(i)) * frac;
  }
  return w;
}

inline double penalty_objective(const Vector& w, const Instance& inst, double phi, double psi) {
  if (phi < 0.0 || psi < 0.0) {
    throw Error(ErrorCode::InvalidPenalty, "penalty factors must be >= 0");
  }
  const double ret_gap = portfolio_return(w, inst) - inst.epsilon;
  const double norm_gap = w.sum() - 1.0;
  return portfolio_volatility(w, inst) + phi * ret_gap * ret_gap + psi * norm_gap * norm_gap;
}

/// Dense upper-triangular QUBO, energy(x) = sum_{k<=l} Q_kl x_k x_l.
///
/// Stored as a symmetric matrix S with S_kl = S_lk = Q_kl (k < l) and
/// S_kk = Q_kk, which gives samplers contiguous row access.
class QuboProblem {
 public:
  QuboProblem() = default;
  QuboProblem(Matrix sym, double offset) : sym_(std::move(sym)), offset_(offset) {
    if (sym_.rows() != sym_.cols()) throw Error(ErrorCode::DimensionError, "QUBO must be square");
  }

  std::size_t num_vars() const { return static_cast<std::size_t>(sym_.rows()); }
  double offset() const { return offset_; }

  /// Q_kl of the upper-triangular form; zero below the diagonal.
  double Q(std::size_t k, std::size_t l) const {
    if (k > l) return 0.0;
    return sym_(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l));
  }
  const Matrix& symmetric() const { return sym_; }

  int d = 3;
  double phi = 1000.0;
  double psi = 1000.0;
  DecodeMeta meta;
  std::string instance_ref;

 private:
  Matrix sym_;
  double offset_ = 0.0;
};

inline constexpr std::size_t kDefaultMaxQuboVars = 8192;

inline QuboProblem build_qubo(const Instance& inst, int d = 3, double phi = 1000.0,
                              double psi = 1000.0, std::size_t max_vars = kDefaultMaxQuboVars) {
  if (d < 1) throw Error(ErrorCode::DimensionError, "discretization depth d must be >= 1");
  if (phi < 0.0 || psi < 0.0) throw Error(ErrorCode::InvalidPenalty, "penalty factors must be >= 0");
  const std::size_t n = inst.size();
  const std::size_t b = static_cast<std::size_t>(d) + 1;
  const std::size_t m = n * b;
  if (m > max_vars) {
    throw Error(ErrorCode::SizeLimit, std::to_string(m) + " QUBO variables exceed the limit of " +
                                          std::to_string(max_vars));
  }
  DecodeMeta meta{d, inst.u};
  // c_k: weight contributed by variable k; asset(k) = k / b.
  Vector c(static_cast<Eigen::Index>(m));
  for (std::size_t k = 0; k < m; ++k) {
    c(static_cast<Eigen::Index>(k)) = inst.u(static_cast<Eigen::Index>(k / b)) * meta.bit_fraction(k % b);
  }
  const double eps = inst.epsilon;
  Matrix sym(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t l = 0; l < m; ++l) {
    const auto L = static_cast<Eigen::Index>(l);
    const auto al = static_cast<Eigen::Index>(l / b);
    for (std::size_t k = 0; k <= l; ++k) {
      const auto K = static_cast<Eigen::Index>(k);
      const auto ak = static_cast<Eigen::Index>(k / b);
      const double quad = c(K) * c(L) * (inst.sigma(ak, al) + phi * inst.r(ak) * inst.r(al) + psi);
      double v;
      if (k == l) {
        v = quad - 2.0 * phi * eps * c(K) * inst.r(ak) - 2.0 * psi * c(K);
      } else {
        v = 2.0 * quad;
      }
      sym(K, L) = v;
      sym(L, K) = v;
    }
  }
  QuboProblem q(std::move(sym), phi * eps * eps + psi);
  q.d = d;
  q.phi = phi;
  q.psi = psi;
  q.meta = std::move(meta);
  q.instance_ref = inst.id;
  return q;
}

inline double energy(const QuboProblem& q, const Bitstring& x) {
  detail::require_size(x.size(), q.num_vars(), "bitstring");
  const Matrix& S = q.symmetric();
  const auto m = static_cast<Eigen::Index>(q.num_vars());
  double e = 0.0;
  for (Eigen::Index k = 0; k < m; ++k) {
    if (!x[static_cast<std::size_t>(k)]) continue;
    e += S(k, k);
    for (Eigen::Index l = k + 1; l < m; ++l) {
      if (x[static_cast<std::size_t>(l)]) e += S(l, k);
    }
  }
  return e;
}

/// energy(x with bit k flipped) - energy(x), in O(num_vars).
inline double flip_delta(const QuboProblem& q, const Bitstring& x, std::size_t k) {
  detail::require_size(x.size(), q.num_vars(), "bitstring");
  if (k >= q.num_vars()) {
    throw Error(ErrorCode::IndexError, "bit index " + std::to_string(k) + " out of range");
  }
  const Matrix& S = q.symmetric();
  const auto K = static_cast<Eigen::Index>(k);
  double field = S(K, K);
  for (std::size_t l = 0; l < x.size(); ++l) {
    if (l != k && x[l]) field += S(static_cast<Eigen::Index>(l), K);
  }
  return x[k] ? -field : field;
}

inline nlohmann::json to_json(const QuboProblem& q) {
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t k = 0; k < q.num_vars(); ++k) {
    for (std::size_t l = k; l < q.num_vars(); ++l) {
      const double v = q.Q(k, l);
      if (v != 0.0) entries.push_back({k, l, v});
    }
  }
  nlohmann::json j;
  j["num_vars"] = q.num_vars();
  j["offset"] = q.offset();
  j["entries"] = std::move(entries);
  j["d"] = q.d;
  j["phi"] = q.phi;
  j["psi"] = q.psi;
  j["u"] = std::vector<double>(q.meta.u.data(), q.meta.u.data() + q.meta.u.size());
  j["instance_ref"] = q.instance_ref;
  return j;
}

inline QuboProblem qubo_from_json(const nlohmann::json& j) {
  try {
    const auto m = j.at("num_vars").get<std::size_t>();
    Matrix sym = Matrix::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    for (const auto& e : j.at("entries")) {
      const auto k = e.at(0).get<std::size_t>();
      const auto l = e.at(1).get<std::size_t>();
      if (k > l || l >= m) throw Error(ErrorCode::ParseError, "QUBO entry index out of order/range");
      sym(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) = e.at(2).get<double>();
      sym(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k)) = e.at(2).get<double>();
    }
    QuboProblem q(std::move(sym), j.at("offset").get<double>());
    q.d = j.at("d").get<int>();
    q.phi = j.at("phi").get<double>();
    q.psi = j.at("psi").get<double>();
    auto u = j.at("u").get<std::vector<double>>();
    q.meta.d = q.d;
    q.meta.u = Eigen::Map<Vector>(u.data(), static_cast<Eigen::Index>(u.size()));
    q.instance_ref = j.value("instance_ref", "");
    detail::require_size(q.meta.num_vars(), m, "QUBO layout");
    return q;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("QUBO JSON: ") + e.what());
  }
}

}  // namespace portopt
