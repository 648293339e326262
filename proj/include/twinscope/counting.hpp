#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "twinscope/fock.hpp"
#include "twinscope/parallel.hpp"
#include "twinscope/precision.hpp"
#include "twinscope/rng.hpp"
#include "twinscope/sources.hpp"

namespace twinscope {

/// One simulated counting run: repeated dwell windows, Poissonian pair
/// generation, click detection. detector_efficiency is folded into the
/// per-mode apparatus transmittance; background_mean_per_dwell adds an
/// independent Poisson count to the coincidences (off by default, the
/// detection model itself is background-free).
struct ExperimentConfig {
  SourceModel source = SourceModel::ideal_pair();
  SchemeConfig scheme;
  double pairs_mean_per_dwell = 1.0;
  std::uint64_t dwells = 2;
  std::uint64_t rng_seed = 0;
  std::vector<double> detector_efficiency;  // empty = all 1
  double background_mean_per_dwell = 0.0;

  void validate() const {
    scheme.validate();
    source.validate();
    if (source.mode_count() != scheme.mode_count())
      throw std::invalid_argument("source arity != scheme arity");
    if (!(pairs_mean_per_dwell > 0.0))
      throw std::invalid_argument("pairs_mean_per_dwell must be > 0");
    if (dwells < 2)
      throw std::invalid_argument("need >= 2 dwells for variance estimates");
    if (!detector_efficiency.empty()) {
      LossNetwork{detector_efficiency}.validate(scheme.mode_count());
      for (double e : detector_efficiency)
        if (e <= 0.0)
          throw std::invalid_argument("detector efficiency must be > 0");
    }
    if (background_mean_per_dwell < 0.0)
      throw std::invalid_argument("background rate must be >= 0");
  }

  /// Survival probability per photon and mode: sample x apparatus x detector.
  std::vector<double> per_mode_survival() const {
    LossNetwork net = scheme.total_network();
    if (!detector_efficiency.empty())
      for (std::size_t i = 0; i < net.per_mode_t.size(); ++i)
        net.per_mode_t[i] *= detector_efficiency[i];
    return net.per_mode_t;
  }

  /// Mean photons launched onto the sample per dwell (resource accounting).
  double sample_photons_per_dwell() const {
    int sampled = 0;
    for (int i = 0; i < scheme.mode_count(); ++i)
      if (scheme.mode_passes_sample(i)) ++sampled;
    return pairs_mean_per_dwell * static_cast<double>(sampled);
  }
};

/// Per-dwell coincidences and per-mode singles of one run.
struct CountRecord {
  std::vector<std::uint32_t> coincidences;
  std::vector<std::vector<std::uint32_t>> singles;  // [mode][dwell]

  std::size_t dwell_count() const { return coincidences.size(); }
};

namespace detail {

/// Joint per-pair outcome table: index = bitmask of surviving modes,
/// cumulative probability for a single-uniform lookup per generated pair.
struct OutcomeTable {
  std::vector<double> cumulative;
  std::uint32_t coincidence_mask = 0;
  int modes = 0;

  OutcomeTable(std::span<const double> survival, std::span<const int> orders) {
    modes = static_cast<int>(survival.size());
    const std::uint32_t n_outcomes = 1u << modes;
    cumulative.resize(n_outcomes);
    double acc = 0.0;
    for (std::uint32_t mask = 0; mask < n_outcomes; ++mask) {
      double p = 1.0;
      for (int m = 0; m < modes; ++m)
        p *= (mask >> m) & 1u ? survival[static_cast<std::size_t>(m)]
                              : 1.0 - survival[static_cast<std::size_t>(m)];
      acc += p;
      cumulative[mask] = acc;
    }
    cumulative.back() = 1.0;
    for (int m = 0; m < modes; ++m)
      if (orders[static_cast<std::size_t>(m)] >= 1) coincidence_mask |= 1u << m;
  }

  std::uint32_t sample(RandomStream& rng) const {
    const double u = rng.next_unit();
    std::uint32_t mask = 0;
    while (cumulative[mask] <= u) ++mask;
    return mask;
  }
};

}  // namespace detail

/// Simulate dwells of coincidence counting. Per dwell the pair-generation
/// number is Poissonian; each generated photon survives its mode's total
/// transmittance independently; a pair contributes one coincidence when
/// every mode with order >= 1 clicks. Dwell d consumes only the stream
/// (rng_seed, d), so the record is bit-identical for any thread count.
inline CountRecord run_counting(const ExperimentConfig& cfg, int threads = 1) {
  cfg.validate();
  const int modes = cfg.scheme.mode_count();
  const std::vector<double> survival = cfg.per_mode_survival();
  const detail::OutcomeTable table(survival, cfg.scheme.orders.orders);

  CountRecord record;
  record.coincidences.assign(cfg.dwells, 0);
  record.singles.assign(static_cast<std::size_t>(modes),
                        std::vector<std::uint32_t>(cfg.dwells, 0));

  parallel_chunks(cfg.dwells, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t d = begin; d < end; ++d) {
      RandomStream rng(cfg.rng_seed, d);
      const long long pairs = rng.poisson(cfg.pairs_mean_per_dwell);
      std::uint32_t coinc = 0;
      std::vector<std::uint32_t> single(static_cast<std::size_t>(modes), 0);
      for (long long e = 0; e < pairs; ++e) {
        const std::uint32_t mask = table.sample(rng);
        for (int m = 0; m < modes; ++m)
          single[static_cast<std::size_t>(m)] += (mask >> m) & 1u;
        coinc += (mask & table.coincidence_mask) == table.coincidence_mask;
      }
      if (cfg.background_mean_per_dwell > 0.0)
        coinc += static_cast<std::uint32_t>(
            rng.poisson(cfg.background_mean_per_dwell));
      record.coincidences[d] = coinc;
      for (int m = 0; m < modes; ++m)
        record.singles[static_cast<std::size_t>(m)][d] =
            single[static_cast<std::size_t>(m)];
    }
  });
  return record;
}

/// Expected coincidences per dwell from the exact photon-number engine: the
/// per-pair coincidence probability is the joint correlation mean of a
/// single thinned pair, scaled by the pair rate. For the Poissonian pair
/// model the per-dwell variance equals this mean.
inline double analytic_coincidence_mean(const ExperimentConfig& cfg) {
  cfg.validate();
  const int modes = cfg.scheme.mode_count();
  const PhotonNumberDistribution one_pair =
      expand_source(SourceModel::ideal_tuple(modes),
                    std::max(modes, cfg.scheme.orders.order_sum()));
  std::vector<int> clicks(static_cast<std::size_t>(modes), 0);
  for (int m = 0; m < modes; ++m)
    clicks[static_cast<std::size_t>(m)] =
        cfg.scheme.orders.orders[static_cast<std::size_t>(m)] >= 1 ? 1 : 0;
  const double p_coincidence = correlation_mean(
      apply_loss(one_pair, LossNetwork{cfg.per_mode_survival()}),
      CorrelationObservable{clicks});
  return cfg.pairs_mean_per_dwell * p_coincidence +
         cfg.background_mean_per_dwell;
}

/// Rescale the second config's pair rate so both runs launch the same mean
/// photon number onto the sample (to 0.1%); mirrors matching measurement
/// time between schemes.
inline std::pair<ExperimentConfig, ExperimentConfig> resource_matched_pair(
    const ExperimentConfig& reference, ExperimentConfig adjusted) {
  reference.validate();
  adjusted.validate();
  if (reference.scheme.sample_t != adjusted.scheme.sample_t)
    throw std::invalid_argument("matched pair must share the sample");
  const double target = reference.sample_photons_per_dwell() *
                        static_cast<double>(reference.dwells);
  int sampled = 0;
  for (int i = 0; i < adjusted.scheme.mode_count(); ++i)
    if (adjusted.scheme.mode_passes_sample(i)) ++sampled;
  if (sampled == 0 || target <= 0.0)
    throw std::invalid_argument("cannot match a zero photon budget");
  adjusted.pairs_mean_per_dwell =
      target / (static_cast<double>(sampled) * static_cast<double>(adjusted.dwells));
  adjusted.validate();
  const double achieved = adjusted.sample_photons_per_dwell() *
                          static_cast<double>(adjusted.dwells);
  if (std::fabs(achieved - target) > 1e-3 * target)
    throw std::logic_error("resource matching misses 0.1% tolerance");
  return {reference, adjusted};
}

/// One replicate of the empirical-vs-analytic comparison.
struct ConvergenceRow {
  int replicate = 0;
  double t = 0.0;
  Scheme scheme = Scheme::SinglePass;
  std::uint64_t dwells = 0;
  double empirical_mean = 0.0;
  double analytic_mean = 0.0;
  double z_mean = 0.0;
  double empirical_variance = 0.0;
  double analytic_variance = 0.0;
  double z_variance = 0.0;
};

/// Run `reps` independent replicates of cfg (sub-seeded from cfg.rng_seed)
/// and z-score the empirical coincidence mean and variance against the
/// engine predictions. z_mean uses the standard error of the mean; z_variance
/// uses the CLT standard error of the sample variance from the empirical
/// fourth central moment.
inline std::vector<ConvergenceRow> mc_vs_analytic_report(
    const ExperimentConfig& cfg, int reps, int threads = 1) {
  if (reps < 10) throw std::invalid_argument("need >= 10 replicates");
  cfg.validate();
  const double mean_pred = analytic_coincidence_mean(cfg);
  const double var_pred = mean_pred;  // thinned Poisson

  std::vector<ConvergenceRow> rows;
  rows.reserve(static_cast<std::size_t>(reps));
  for (int r = 0; r < reps; ++r) {
    ExperimentConfig run = cfg;
    run.rng_seed = mix64(cfg.rng_seed ^ mix64(static_cast<std::uint64_t>(r) + 1));
    const CountRecord rec = run_counting(run, threads);
    const double n = static_cast<double>(rec.dwell_count());
    double sum = 0.0;
    for (auto c : rec.coincidences) sum += c;
    const double mean = sum / n;
    double m2 = 0.0, m4 = 0.0;
    for (auto c : rec.coincidences) {
      const double d = static_cast<double>(c) - mean;
      m2 += d * d;
      m4 += d * d * d * d;
    }
    const double var = m2 / (n - 1.0);
    m2 /= n;
    m4 /= n;
    ConvergenceRow row;
    row.replicate = r;
    row.t = cfg.scheme.sample_t;
    row.scheme = cfg.scheme.scheme;
    row.dwells = run.dwells;
    row.empirical_mean = mean;
    row.analytic_mean = mean_pred;
    row.z_mean = (mean - mean_pred) / std::sqrt(var_pred / n);
    row.empirical_variance = var;
    row.analytic_variance = var_pred;
    const double se_var = std::sqrt(std::max(m4 - m2 * m2, 0.0) / n);
    row.z_variance = se_var > 0.0 ? (var - var_pred) / se_var : 0.0;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace twinscope
