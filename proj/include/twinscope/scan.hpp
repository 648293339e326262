#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "twinscope/counting.hpp"
#include "twinscope/parallel.hpp"
#include "twinscope/rng.hpp"
#include "twinscope/sample_map.hpp"
#include "twinscope/snr.hpp"

namespace twinscope {

/// One raster scan of a sample map: scheme, photon budget, and the row count
/// of the per-region ensembles used for SNR statistics (the counts of every
/// pixel still land in the image).
struct ScanConfig {
  Scheme scheme = Scheme::SinglePass;
  double budget = 5000.0;  // target mean coincidences per reference pixel
  std::uint64_t seed = 0;
  int snr_rows = 25;
  double pairs_mean_override = 0.0;  // > 0 bypasses budget calibration
  std::vector<double> apparatus_t;   // per mode, empty = lossless

  void validate() const {
    if (scheme == Scheme::MultiPass)
      throw std::invalid_argument("scan supports single- and double-pass");
    if (!(budget > 0.0) && !(pairs_mean_override > 0.0))
      throw std::invalid_argument("budget must be > 0");
    if (snr_rows < 2) throw std::invalid_argument("snr_rows must be >= 2");
  }

  SchemeConfig scheme_config(double sample_t) const {
    return SchemeConfig{scheme, sample_t, {{1, 1}}, apparatus_t, -1};
  }
};

/// Pair rate per dwell that makes the expected reference-region coincidence
/// count equal the budget.
inline double calibrated_pairs_mean(const SampleMap& map, const ScanConfig& cfg) {
  cfg.validate();
  if (cfg.pairs_mean_override > 0.0) return cfg.pairs_mean_override;
  ExperimentConfig probe;
  probe.scheme = cfg.scheme_config(map.transmittance_of(map.reference_label()));
  probe.pairs_mean_per_dwell = 1.0;
  const double p_ref = analytic_coincidence_mean(probe);
  if (!(p_ref > 0.0))
    throw std::invalid_argument("reference region is opaque; cannot calibrate");
  return cfg.budget / p_ref;
}

struct RegionStats {
  char label = '?';
  std::size_t pixels = 0;
  double mean = 0.0;
  double variance = 0.0;
  double t_hat = 0.0;
  double t_err = 0.0;
  bool clamped = false;
};

struct RegionSnr {
  char label = '?';
  double snr = 0.0;
  double snr_err = 0.0;
  bool undefined = false;
  double analytic_snr = 0.0;
};

struct ScanResult {
  SampleMap map;
  Scheme scheme = Scheme::SinglePass;
  double pairs_mean = 0.0;
  std::uint64_t seed = 0;
  int snr_rows = 25;
  std::vector<std::uint32_t> counts;  // row-major
  char reference = '?';
  std::vector<RegionStats> regions;          // legend order
  std::vector<RegionSnr> snr_vs_reference;   // non-reference regions

  std::uint32_t count_at(int x, int y) const {
    return counts[static_cast<std::size_t>(y) * static_cast<std::size_t>(map.width) +
                  static_cast<std::size_t>(x)];
  }

  const RegionStats& region(char label) const {
    for (const auto& r : regions)
      if (r.label == label) return r;
    throw std::invalid_argument(std::string("no region '") + label + "' in result");
  }

  /// Mean photons launched onto the sample per pixel dwell.
  double sample_photons_per_pixel() const {
    return pairs_mean * (scheme == Scheme::SinglePass ? 1.0 : 2.0);
  }
};

namespace detail {

/// Per-row count ensembles of one region, for row-cluster bootstrap.
struct RowEnsemble {
  std::vector<double> sum;
  std::vector<double> sumsq;
  std::vector<std::size_t> n;
  std::size_t total_n = 0;

  void add_row(double s, double s2, std::size_t count) {
    sum.push_back(s);
    sumsq.push_back(s2);
    n.push_back(count);
    total_n += count;
  }

  SampleMoments moments() const {
    double s = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < sum.size(); ++i) {
      s += sum[i];
      s2 += sumsq[i];
    }
    const double nn = static_cast<double>(total_n);
    const double mean = s / nn;
    return {mean, std::max(0.0, (s2 - nn * mean * mean) / (nn - 1.0)), total_n};
  }

  SampleMoments resampled_moments(RandomStream& rng) const {
    const std::size_t rows = sum.size();
    double s = 0.0, s2 = 0.0;
    std::size_t nn = 0;
    for (std::size_t i = 0; i < rows; ++i) {
      const std::size_t j = rng.next_below(rows);
      s += sum[j];
      s2 += sumsq[j];
      nn += n[j];
    }
    const double mean = s / static_cast<double>(nn);
    return {mean,
            std::max(0.0, (s2 - static_cast<double>(nn) * mean * mean) /
                              static_cast<double>(nn - 1)),
            nn};
  }
};

inline double snr_from_moments(const SampleMoments& in, const SampleMoments& out) {
  const double v = in.variance + out.variance;
  return v > 0.0 ? (in.mean - out.mean) / std::sqrt(v) : 0.0;
}

/// First `snr_rows` grid lines containing the region, as per-row ensembles.
inline RowEnsemble region_rows(const ScanResult& result, char label, int snr_rows) {
  RowEnsemble ens;
  for (int y = 0; y < result.map.height &&
                  static_cast<int>(ens.sum.size()) < snr_rows;
       ++y) {
    double s = 0.0, s2 = 0.0;
    std::size_t count = 0;
    for (int x = 0; x < result.map.width; ++x) {
      if (result.map.label_at(x, y) != label) continue;
      const double v = result.count_at(x, y);
      s += v;
      s2 += v * v;
      ++count;
    }
    if (count > 0) ens.add_row(s, s2, count);
  }
  if (ens.sum.size() < 2)
    throw std::invalid_argument(std::string("region '") + label +
                                "' has fewer than 2 populated rows");
  return ens;
}

inline double analytic_region_mean(const ScanResult& result, char label) {
  ExperimentConfig probe;
  probe.scheme = ScanConfig{result.scheme, 1.0, 0, result.snr_rows, 0.0, {}}
                     .scheme_config(result.map.transmittance_of(label));
  probe.pairs_mean_per_dwell = result.pairs_mean;
  return analytic_coincidence_mean(probe);
}

}  // namespace detail

struct TransmittanceEstimate {
  double t_hat = 0.0;
  double t_err = 0.0;
  bool clamped = false;
};

/// Recover a region transmittance from region/reference mean counts. The
/// count ratio scales as t^s with s the number of sample passes (1 or 2), so
/// t_hat = ratio^(1/s); the uncertainty propagates the standard errors of
/// both region means. Estimates above 1 (possible by noise) are clamped and
/// flagged.
inline TransmittanceEstimate estimate_transmittance(const ScanResult& result,
                                                    char region_label,
                                                    char reference_label) {
  const RegionStats& region = result.region(region_label);
  const RegionStats& reference = result.region(reference_label);
  if (!(reference.mean > 0.0))
    throw std::invalid_argument("reference region mean is zero");
  const double passes = result.scheme == Scheme::SinglePass ? 1.0 : 2.0;
  const double ratio = region.mean / reference.mean;
  TransmittanceEstimate est;
  est.t_hat = std::pow(ratio, 1.0 / passes);
  const double rel_region =
      region.mean > 0.0
          ? std::sqrt(region.variance / static_cast<double>(region.pixels)) /
                region.mean
          : 0.0;
  const double rel_reference =
      std::sqrt(reference.variance / static_cast<double>(reference.pixels)) /
      reference.mean;
  const double rel_ratio = std::hypot(rel_region, rel_reference);
  est.t_err = est.t_hat * rel_ratio / passes;
  if (est.t_hat > 1.0) {
    est.t_hat = 1.0;
    est.clamped = true;
  }
  return est;
}

/// Raster-scan the map: every pixel is one dwell window of coincidence
/// counting at that pixel's transmittance. Pixel p consumes only the stream
/// (seed, p), so the image is reproducible for any thread count. Region
/// statistics, transmittance estimates, and SNRs against the reference
/// region (with row-cluster bootstrap errors) are filled in afterwards.
inline ScanResult scan(const SampleMap& map, const ScanConfig& cfg,
                       int threads = 1) {
  cfg.validate();
  if (map.legend.empty() || map.pixel_count() == 0)
    throw std::invalid_argument("empty sample map");

  ScanResult result;
  result.map = map;
  result.scheme = cfg.scheme;
  result.seed = cfg.seed;
  result.snr_rows = cfg.snr_rows;
  result.pairs_mean = calibrated_pairs_mean(map, cfg);
  result.reference = map.reference_label();
  result.counts.assign(map.pixel_count(), 0);

  // Outcome tables per region label.
  std::array<int, 256> table_index;
  table_index.fill(-1);
  std::vector<detail::OutcomeTable> tables;
  std::vector<char> labels = map.regions_by_transmittance();
  for (char label : labels) {
    ExperimentConfig probe;
    probe.scheme = cfg.scheme_config(map.transmittance_of(label));
    table_index[static_cast<unsigned char>(label)] =
        static_cast<int>(tables.size());
    tables.emplace_back(probe.per_mode_survival(), probe.scheme.orders.orders);
  }

  parallel_chunks(map.pixel_count(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      RandomStream rng(cfg.seed, p);
      const long long pairs = rng.poisson(result.pairs_mean);
      const detail::OutcomeTable& table =
          tables[static_cast<std::size_t>(table_index[static_cast<unsigned char>(
              map.labels[p])])];
      std::uint32_t coinc = 0;
      for (long long e = 0; e < pairs; ++e) {
        const std::uint32_t mask = table.sample(rng);
        coinc += (mask & table.coincidence_mask) == table.coincidence_mask;
      }
      result.counts[p] = coinc;
    }
  });

  // Whole-region statistics and transmittance estimates.
  for (char label : labels) {
    RegionStats stats;
    stats.label = label;
    double s = 0.0, s2 = 0.0;
    for (std::size_t p = 0; p < map.pixel_count(); ++p) {
      if (map.labels[p] != label) continue;
      const double v = result.counts[p];
      s += v;
      s2 += v * v;
      ++stats.pixels;
    }
    if (stats.pixels == 0)
      throw std::invalid_argument(std::string("region '") + label +
                                  "' has no pixels");
    const double n = static_cast<double>(stats.pixels);
    stats.mean = s / n;
    stats.variance = stats.pixels > 1
                         ? std::max(0.0, (s2 - n * stats.mean * stats.mean) / (n - 1.0))
                         : 0.0;
    result.regions.push_back(stats);
  }
  for (auto& stats : result.regions) {
    const TransmittanceEstimate est =
        estimate_transmittance(result, stats.label, result.reference);
    stats.t_hat = est.t_hat;
    stats.t_err = est.t_err;
    stats.clamped = est.clamped;
  }

  // SNR of every non-reference region against the reference, from the
  // snr_rows-row ensembles.
  const detail::RowEnsemble ref_rows =
      detail::region_rows(result, result.reference, cfg.snr_rows);
  const double mu_ref = detail::analytic_region_mean(result, result.reference);
  std::uint64_t region_tag = 1;
  for (char label : labels) {
    if (label == result.reference) continue;
    const detail::RowEnsemble rows = detail::region_rows(result, label, cfg.snr_rows);
    RegionSnr snr;
    snr.label = label;
    const SampleMoments min = ref_rows.moments();
    const SampleMoments mout = rows.moments();
    const double v = min.variance + mout.variance;
    if (v <= 0.0) {
      snr.undefined = true;
    } else {
      snr.snr = detail::snr_from_moments(min, mout);
      RandomStream rng(mix64(cfg.seed ^ 0xB00757 /*bootstrap*/), region_tag);
      double bs = 0.0, bs2 = 0.0;
      int used = 0;
      for (int b = 0; b < 1000; ++b) {
        const SampleMoments bin = ref_rows.resampled_moments(rng);
        const SampleMoments bout = rows.resampled_moments(rng);
        if (bin.variance + bout.variance <= 0.0) continue;
        const double snr_b = detail::snr_from_moments(bin, bout);
        bs += snr_b;
        bs2 += snr_b * snr_b;
        ++used;
      }
      if (used >= 2) {
        const double mean_b = bs / used;
        snr.snr_err = std::sqrt(std::max(0.0, (bs2 - used * mean_b * mean_b) / (used - 1)));
      }
    }
    const double mu = detail::analytic_region_mean(result, label);
    snr.analytic_snr = (mu_ref - mu) / std::sqrt(mu_ref + mu);  // Poisson noise
    result.snr_vs_reference.push_back(snr);
    ++region_tag;
  }
  return result;
}

struct EnhancementRow {
  char label = '?';
  double t_legend = 0.0;
  double snr_sp = 0.0, snr_sp_err = 0.0;
  double snr_dp = 0.0, snr_dp_err = 0.0;
  double enhancement = 0.0;
  double enhancement_err = 0.0;
  double analytic_snr_sp = 0.0;
  double analytic_snr_dp = 0.0;
  double analytic_enhancement = 0.0;
};

/// Compare a single-pass and a double-pass scan of the same map at matched
/// photon resources: per non-reference region, both SNRs, their ratio with a
/// paired row-bootstrap error, and the Poisson-model analytic prediction.
inline std::vector<EnhancementRow> enhancement_report(const ScanResult& sp,
                                                      const ScanResult& dp) {
  if (sp.map.width != dp.map.width || sp.map.height != dp.map.height ||
      sp.map.labels != dp.map.labels || sp.map.legend != dp.map.legend)
    throw std::invalid_argument("enhancement report needs identical maps");
  const double photons_sp = sp.sample_photons_per_pixel();
  const double photons_dp = dp.sample_photons_per_pixel();
  if (std::fabs(photons_sp - photons_dp) > 1e-3 * photons_sp)
    throw std::invalid_argument("scans are not resource matched (0.1%)");

  std::vector<EnhancementRow> rows;
  const detail::RowEnsemble sp_ref = detail::region_rows(sp, sp.reference, sp.snr_rows);
  const detail::RowEnsemble dp_ref = detail::region_rows(dp, dp.reference, dp.snr_rows);
  const double mu_ref_sp = detail::analytic_region_mean(sp, sp.reference);
  const double mu_ref_dp = detail::analytic_region_mean(dp, dp.reference);

  std::uint64_t region_tag = 1;
  for (char label : sp.map.regions_by_transmittance()) {
    if (label == sp.reference) continue;
    EnhancementRow row;
    row.label = label;
    row.t_legend = sp.map.transmittance_of(label);

    const detail::RowEnsemble sp_rows = detail::region_rows(sp, label, sp.snr_rows);
    const detail::RowEnsemble dp_rows = detail::region_rows(dp, label, dp.snr_rows);
    row.snr_sp = detail::snr_from_moments(sp_ref.moments(), sp_rows.moments());
    row.snr_dp = detail::snr_from_moments(dp_ref.moments(), dp_rows.moments());
    if (row.snr_sp == 0.0)
      throw std::invalid_argument("single-pass SNR vanishes; no enhancement ratio");
    row.enhancement = row.snr_dp / row.snr_sp;

    RandomStream rng(mix64(sp.seed ^ dp.seed ^ 0xE0A4CE /*enhancement*/), region_tag);
    double s1 = 0.0, s1sq = 0.0, s2 = 0.0, s2sq = 0.0, se = 0.0, sesq = 0.0;
    int used = 0;
    for (int b = 0; b < 1000; ++b) {
      const double snr_sp_b = detail::snr_from_moments(
          sp_ref.resampled_moments(rng), sp_rows.resampled_moments(rng));
      const double snr_dp_b = detail::snr_from_moments(
          dp_ref.resampled_moments(rng), dp_rows.resampled_moments(rng));
      s1 += snr_sp_b;
      s1sq += snr_sp_b * snr_sp_b;
      s2 += snr_dp_b;
      s2sq += snr_dp_b * snr_dp_b;
      if (snr_sp_b != 0.0) {
        const double e = snr_dp_b / snr_sp_b;
        se += e;
        sesq += e * e;
        ++used;
      }
    }
    auto sd = [](double s, double sq, int n) {
      if (n < 2) return 0.0;
      const double mean = s / n;
      return std::sqrt(std::max(0.0, (sq - n * mean * mean) / (n - 1)));
    };
    row.snr_sp_err = sd(s1, s1sq, 1000);
    row.snr_dp_err = sd(s2, s2sq, 1000);
    row.enhancement_err = sd(se, sesq, used);

    const double mu_sp = detail::analytic_region_mean(sp, label);
    const double mu_dp = detail::analytic_region_mean(dp, label);
    row.analytic_snr_sp = (mu_ref_sp - mu_sp) / std::sqrt(mu_ref_sp + mu_sp);
    row.analytic_snr_dp = (mu_ref_dp - mu_dp) / std::sqrt(mu_ref_dp + mu_dp);
    row.analytic_enhancement = row.analytic_snr_dp / row.analytic_snr_sp;

    rows.push_back(row);
    ++region_tag;
  }
  return rows;
}

/// Analytic double-pass over single-pass SNR gain at sample transmittance t
/// under matched resources and Poissonian counting; approaches sqrt(2) as
/// t -> 1. Used for the overlay curve in scan reports.
inline double analytic_snr_enhancement(double t) {
  if (!(t >= 0.0 && t < 1.0 + 1e-12))
    throw std::invalid_argument("t outside [0, 1)");
  return std::pow(1.0 + t, 1.5) / std::sqrt(2.0 * (1.0 + t * t));
}

}  // namespace twinscope
