#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "portopt/portopt.hpp"

namespace testing_support {

using portopt::Instance;
using portopt::Matrix;
using portopt::Vector;

/// Shared synthetic market (built once per test binary).
inline const portopt::AssetUniverse& universe() {
  static const portopt::AssetUniverse u = portopt::estimate_universe(portopt::synthetic_prices({}));
  return u;
}

inline Instance generated(int n, std::uint64_t seed, portopt::Variant v = portopt::Variant::MinVola) {
  portopt::BuildOptions opts;
  opts.variant = v;
  Instance inst = portopt::build_instance(universe(), n, seed, opts);
  inst.id = "n" + std::to_string(n) + "_s" + std::to_string(seed);
  return inst;
}

inline Instance hand_built(const Vector& r, const Matrix& sigma, const Vector& u, double eps = 0.0,
                           double nu = 1.0, double lambda = 0.0) {
  Instance inst;
  inst.id = "hand";
  inst.n = static_cast<int>(r.size());
  for (int i = 0; i < inst.n; ++i) inst.asset_ids.push_back("A" + std::to_string(i));
  inst.r = r;
  inst.sigma = sigma;
  inst.u = u;
  inst.epsilon = eps;
  inst.nu = nu;
  inst.lambda = lambda;
  return inst;
}

/// Random PSD matrix G G^T / k with k columns (rank-deficient when k < n).
inline Matrix random_psd(int n, int k, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 0.3);
  Matrix G(n, k);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) G(i, j) = nd(rng);
  }
  Matrix S = G * G.transpose() / static_cast<double>(k);
  return 0.5 * (S + S.transpose());
}

inline Vector random_vector(int n, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ud(lo, hi);
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = ud(rng);
  return v;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("portopt_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing_support
