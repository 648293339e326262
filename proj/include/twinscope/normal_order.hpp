#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "twinscope/fock.hpp"

namespace twinscope {

/// Largest correlation order the exact coefficient solve supports.
inline constexpr int kMaxNormalOrder = 8;

namespace detail {

using int128 = __int128;

inline int128 falling_factorial_exact(int n, int k) {
  if (n < k) return 0;
  int128 acc = 1;
  for (int j = 0; j < k; ++j) acc *= n - j;
  return acc;
}

}  // namespace detail

/// Coefficients C_{k,m}, m = 0..k, of the exact operator identity
///
///   FF(n, k)^2 = sum_{m=0}^{k} C_{k,m} FF(n, k+m)   for every integer n,
///
/// i.e. the reduction of the squared k-th order correlation operator to a
/// combination of normally ordered operators. Solved as the triangular
/// integer linear system obtained by evaluating the identity at
/// n = k, k+1, ..., 2k (FF(n, k+m) vanishes for m > n-k), then re-verified
/// at every n up to 2k+2. All arithmetic is exact.
inline std::vector<long long> normal_order_coefficients(int k) {
  if (k < 1 || k > kMaxNormalOrder)
    throw std::invalid_argument("normal_order_coefficients: k out of range");
  using detail::falling_factorial_exact;
  using detail::int128;

  std::vector<int128> c(static_cast<std::size_t>(k) + 1, 0);
  for (int j = 0; j <= k; ++j) {
    const int n = k + j;
    int128 lhs = falling_factorial_exact(n, k);
    lhs *= lhs;
    for (int m = 0; m < j; ++m)
      lhs -= c[static_cast<std::size_t>(m)] * falling_factorial_exact(n, k + m);
    const int128 pivot = falling_factorial_exact(n, k + j);
    if (pivot == 0 || lhs % pivot != 0)
      throw std::logic_error("normal-order solve: non-integer coefficient");
    c[static_cast<std::size_t>(j)] = lhs / pivot;
  }

  for (int n = 0; n <= 2 * k + 2; ++n) {
    int128 lhs = falling_factorial_exact(n, k);
    lhs *= lhs;
    int128 rhs = 0;
    for (int m = 0; m <= k; ++m)
      rhs += c[static_cast<std::size_t>(m)] * falling_factorial_exact(n, k + m);
    if (lhs != rhs)
      throw std::logic_error("normal-order solve: identity check failed");
  }

  std::vector<long long> out;
  out.reserve(c.size());
  for (int128 v : c) out.push_back(static_cast<long long>(v));
  return out;
}

/// <O^2> via the normal-ordering route: expand each squared per-mode factor
/// with the C_{k,m} table and take the joint falling-factorial means. Equals
/// correlation_second_moment on any diagonal state; kept as the second
/// algebraic route of the dual check.
inline double correlation_second_moment_normal_ordered(
    const PhotonNumberDistribution& dist, const CorrelationObservable& obs) {
  obs.validate(dist);
  const int modes = dist.mode_count();
  std::vector<std::vector<long long>> tables;
  tables.reserve(static_cast<std::size_t>(modes));
  for (int k : obs.orders)
    tables.push_back(k == 0 ? std::vector<long long>{1}
                            : normal_order_coefficients(k));

  std::vector<int> shifted(static_cast<std::size_t>(modes), 0);
  double acc = 0.0;
  auto descend = [&](auto&& self, int mode, double coeff) -> void {
    if (mode == modes) {
      acc += coeff * detail::correlation_mean_unchecked(dist, shifted);
      return;
    }
    const int k = obs.orders[static_cast<std::size_t>(mode)];
    const auto& table = tables[static_cast<std::size_t>(mode)];
    for (int m = 0; m < static_cast<int>(table.size()); ++m) {
      shifted[static_cast<std::size_t>(mode)] = k + m;
      self(self, mode + 1,
           coeff * static_cast<double>(table[static_cast<std::size_t>(m)]));
    }
  };
  descend(descend, 0, 1.0);
  return acc;
}

}  // namespace twinscope
