#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "twinscope/counting.hpp"
#include "twinscope/rng.hpp"

namespace twinscope {

struct SampleMoments {
  double mean = 0.0;
  double variance = 0.0;  // unbiased, divisor n-1
  std::size_t n = 0;
};

template <typename T>
SampleMoments sample_moments(std::span<const T> values) {
  SampleMoments m;
  m.n = values.size();
  if (m.n < 2) throw std::invalid_argument("need >= 2 samples");
  double sum = 0.0;
  for (T v : values) sum += static_cast<double>(v);
  m.mean = sum / static_cast<double>(m.n);
  double acc = 0.0;
  for (T v : values) {
    const double d = static_cast<double>(v) - m.mean;
    acc += d * d;
  }
  m.variance = acc / static_cast<double>(m.n - 1);
  return m;
}

/// SNR = (mean_in - mean_out) / sqrt(var_in + var_out) with sample moments,
/// plus a nonparametric bootstrap standard error (default 1000 resamples).
/// Zero combined variance is flagged undefined rather than divided by.
struct SnrEstimate {
  double snr = 0.0;
  double std_error = 0.0;
  bool undefined = false;
  SampleMoments in;
  SampleMoments out;
};

inline SnrEstimate snr_estimate(std::span<const std::uint32_t> in_counts,
                                std::span<const std::uint32_t> out_counts,
                                std::uint64_t bootstrap_seed,
                                int resamples = 1000) {
  SnrEstimate est;
  est.in = sample_moments(in_counts);
  est.out = sample_moments(out_counts);
  const double combined = est.in.variance + est.out.variance;
  if (combined <= 0.0) {
    est.undefined = true;
    return est;
  }
  est.snr = (est.in.mean - est.out.mean) / std::sqrt(combined);

  RandomStream rng(bootstrap_seed, 0);
  double sum = 0.0, sumsq = 0.0;
  int used = 0;
  std::vector<double> in_vals(in_counts.begin(), in_counts.end());
  std::vector<double> out_vals(out_counts.begin(), out_counts.end());
  auto resample_moments = [&rng](const std::vector<double>& vals) {
    const std::size_t n = vals.size();
    double s = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = vals[rng.next_below(n)];
      s += v;
      s2 += v * v;
    }
    const double mean = s / static_cast<double>(n);
    const double var =
        std::max(0.0, (s2 - static_cast<double>(n) * mean * mean) /
                          static_cast<double>(n - 1));
    return SampleMoments{mean, var, n};
  };
  for (int b = 0; b < resamples; ++b) {
    const SampleMoments bi = resample_moments(in_vals);
    const SampleMoments bo = resample_moments(out_vals);
    const double v = bi.variance + bo.variance;
    if (v <= 0.0) continue;
    const double snr_b = (bi.mean - bo.mean) / std::sqrt(v);
    sum += snr_b;
    sumsq += snr_b * snr_b;
    ++used;
  }
  if (used >= 2) {
    const double mean_b = sum / used;
    est.std_error =
        std::sqrt(std::max(0.0, (sumsq - used * mean_b * mean_b) / (used - 1)));
  }
  return est;
}

inline SnrEstimate snr_estimate(const CountRecord& in, const CountRecord& out,
                                std::uint64_t bootstrap_seed,
                                int resamples = 1000) {
  return snr_estimate(std::span<const std::uint32_t>(in.coincidences),
                      std::span<const std::uint32_t>(out.coincidences),
                      bootstrap_seed, resamples);
}

}  // namespace twinscope
