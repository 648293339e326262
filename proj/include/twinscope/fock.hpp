#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace twinscope {

/// Occupation tuple (n_1 ... n_M), one photon number per mode.
using Occupation = std::vector<int>;

/// Falling factorial n(n-1)...(n-k+1); eigenvalue of the normally ordered
/// k-th order correlation operator on the |n> Fock state. FF(n, 0) = 1.
inline double falling_factorial(int n, int k) {
  if (k < 0) throw std::invalid_argument("falling_factorial: k < 0");
  double acc = 1.0;
  for (int j = 0; j < k; ++j) acc *= static_cast<double>(n - j);
  return n >= k ? acc : 0.0;
}

/// Joint photon-number distribution of M modes truncated at n_max photons
/// per mode. Diagonal states only: probabilities, not amplitudes. The mass
/// lost to truncation is carried explicitly and never renormalized away.
class PhotonNumberDistribution {
 public:
  /// Probabilities below this are dropped from the table.
  static constexpr double kPruneThreshold = 1e-30;

  PhotonNumberDistribution(int mode_count, int n_max,
                           std::map<Occupation, double> probs,
                           double truncation_deficit = 0.0)
      : mode_count_(mode_count), n_max_(n_max), deficit_(truncation_deficit) {
    if (mode_count < 1) throw std::invalid_argument("mode_count must be >= 1");
    if (n_max < 1) throw std::invalid_argument("n_max must be >= 1");
    if (!(deficit_ >= 0.0) || deficit_ > 1.0 + 1e-12)
      throw std::invalid_argument("truncation deficit outside [0, 1]");
    double total = 0.0;
    entries_.reserve(probs.size());
    for (auto& [occ, p] : probs) {
      if (static_cast<int>(occ.size()) != mode_count)
        throw std::invalid_argument("occupation arity != mode_count");
      for (int n : occ)
        if (n < 0 || n > n_max)
          throw std::invalid_argument("occupation outside [0, n_max]");
      if (!std::isfinite(p) || p < 0.0)
        throw std::invalid_argument("probability must be finite and >= 0");
      if (p < kPruneThreshold) continue;
      total += p;
      entries_.emplace_back(occ, p);
    }
    if (total > 1.0 + 1e-9)
      throw std::invalid_argument("total probability exceeds 1");
    if (total < 1.0 - deficit_ - 1e-9)
      throw std::invalid_argument("total probability below 1 - deficit");
    total_ = total;
  }

  int mode_count() const { return mode_count_; }
  int n_max() const { return n_max_; }
  double truncation_deficit() const { return deficit_; }
  double total_probability() const { return total_; }

  double probability(const Occupation& occ) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), occ,
                               [](const auto& e, const Occupation& o) {
                                 return e.first < o;
                               });
    return (it != entries_.end() && it->first == occ) ? it->second : 0.0;
  }

  /// Entries sorted by occupation tuple.
  const std::vector<std::pair<Occupation, double>>& entries() const {
    return entries_;
  }

 private:
  int mode_count_;
  int n_max_;
  double deficit_;
  double total_ = 0.0;
  std::vector<std::pair<Occupation, double>> entries_;
};

/// Per-mode power transmittances of a passive loss network. Loss acts on a
/// diagonal state as independent binomial thinning of each mode.
struct LossNetwork {
  std::vector<double> per_mode_t;

  static LossNetwork uniform(int modes, double t) {
    return LossNetwork{std::vector<double>(static_cast<std::size_t>(modes), t)};
  }

  void validate(int mode_count) const {
    if (static_cast<int>(per_mode_t.size()) != mode_count)
      throw std::invalid_argument("loss network arity != mode_count");
    for (double t : per_mode_t)
      if (!std::isfinite(t) || t < 0.0 || t > 1.0)
        throw std::invalid_argument("transmittance outside [0, 1]");
  }
};

/// Correlation orders k_i, one per mode; the measured observable is the
/// product of normally ordered k_i-th order counts over the modes.
struct CorrelationObservable {
  std::vector<int> orders;

  int order_sum() const {
    return std::accumulate(orders.begin(), orders.end(), 0);
  }

  void validate(const PhotonNumberDistribution& dist) const {
    if (static_cast<int>(orders.size()) != dist.mode_count())
      throw std::invalid_argument("observable arity != mode_count");
    bool any = false;
    for (int k : orders) {
      if (k < 0) throw std::invalid_argument("correlation order < 0");
      any = any || k >= 1;
    }
    if (!any) throw std::invalid_argument("at least one order must be >= 1");
    if (order_sum() > dist.n_max())
      throw std::invalid_argument(
          "sum of correlation orders exceeds n_max; observable vanishes at "
          "truncation");
  }
};

namespace detail {

inline double binomial_coefficient(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double acc = 1.0;
  for (int j = 1; j <= k; ++j)
    acc = acc * static_cast<double>(n - k + j) / static_cast<double>(j);
  return acc;
}

/// P(m | n) for one mode under transmittance t.
inline double thinning_kernel(int n, int m, double t) {
  if (m < 0 || m > n) return 0.0;
  if (t == 1.0) return m == n ? 1.0 : 0.0;
  if (t == 0.0) return m == 0 ? 1.0 : 0.0;
  return binomial_coefficient(n, m) * std::pow(t, m) *
         std::pow(1.0 - t, n - m);
}

}  // namespace detail

/// Binomial thinning of every mode: each of n_i photons survives mode i
/// independently with probability t_i. Total probability is preserved.
inline PhotonNumberDistribution apply_loss(const PhotonNumberDistribution& dist,
                                           const LossNetwork& loss) {
  loss.validate(dist.mode_count());
  const int modes = dist.mode_count();
  std::map<Occupation, double> out;
  Occupation m(static_cast<std::size_t>(modes), 0);
  for (const auto& [occ, p] : dist.entries()) {
    // Recursive walk over all m <= occ, accumulating the kernel product.
    auto descend = [&](auto&& self, int mode, double weight) -> void {
      if (weight == 0.0) return;
      if (mode == modes) {
        out[m] += weight;
        return;
      }
      for (int mm = 0; mm <= occ[static_cast<std::size_t>(mode)]; ++mm) {
        m[static_cast<std::size_t>(mode)] = mm;
        self(self, mode + 1,
             weight * detail::thinning_kernel(occ[static_cast<std::size_t>(mode)],
                                              mm,
                                              loss.per_mode_t[static_cast<std::size_t>(mode)]));
      }
      m[static_cast<std::size_t>(mode)] = 0;
    };
    descend(descend, 0, p);
  }
  return PhotonNumberDistribution(modes, dist.n_max(), std::move(out),
                                  dist.truncation_deficit());
}

namespace detail {

/// E[prod_i FF(n_i, k_i)] without observable validation; orders above n_max
/// contribute zero terms, which the normal-ordering expansion relies on.
inline double correlation_mean_unchecked(const PhotonNumberDistribution& dist,
                                         std::span<const int> orders) {
  double acc = 0.0;
  for (const auto& [occ, p] : dist.entries()) {
    double ff = 1.0;
    for (std::size_t i = 0; i < occ.size(); ++i)
      ff *= falling_factorial(occ[i], orders[i]);
    acc += p * ff;
  }
  return acc;
}

}  // namespace detail

/// <O> for O = prod_i (b_i^dag)^{k_i} b_i^{k_i}: the mean joint
/// falling-factorial moment of the distribution.
inline double correlation_mean(const PhotonNumberDistribution& dist,
                               const CorrelationObservable& obs) {
  obs.validate(dist);
  return detail::correlation_mean_unchecked(dist, obs.orders);
}

/// <O^2> computed directly on the diagonal: E[(prod_i FF(n_i, k_i))^2].
inline double correlation_second_moment(const PhotonNumberDistribution& dist,
                                        const CorrelationObservable& obs) {
  obs.validate(dist);
  double acc = 0.0;
  for (const auto& [occ, p] : dist.entries()) {
    double ff = 1.0;
    for (std::size_t i = 0; i < occ.size(); ++i)
      ff *= falling_factorial(occ[i], obs.orders[i]);
    acc += p * ff * ff;
  }
  return acc;
}

/// Mean photon number summed over the chosen modes (0-based indices).
inline double mean_photon_number(const PhotonNumberDistribution& dist,
                                 std::span<const int> modes) {
  if (modes.empty()) throw std::invalid_argument("mode subset is empty");
  for (int mode : modes)
    if (mode < 0 || mode >= dist.mode_count())
      throw std::invalid_argument("mode index out of range");
  double acc = 0.0;
  for (const auto& [occ, p] : dist.entries()) {
    double n = 0.0;
    for (int mode : modes) n += occ[static_cast<std::size_t>(mode)];
    acc += p * n;
  }
  return acc;
}

inline double mean_photon_number(const PhotonNumberDistribution& dist,
                                 std::initializer_list<int> modes) {
  return mean_photon_number(dist, std::span<const int>(modes.begin(), modes.size()));
}

}  // namespace twinscope
