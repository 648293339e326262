#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "twinscope/fock.hpp"
#include "twinscope/sources.hpp"

namespace twinscope {

enum class Scheme { SinglePass, DoublePass, MultiPass };

/// Which modes traverse the absorptive sample and which orders are measured.
/// SinglePass sends only the signal mode through the sample (the remaining
/// modes act as triggers at unit sample transmittance); DoublePass and
/// MultiPass send every mode through. apparatus_t models pre-existing fixed
/// losses per mode (fibers, detectors) and defaults to lossless.
struct SchemeConfig {
  Scheme scheme = Scheme::DoublePass;
  double sample_t = 1.0;
  CorrelationObservable orders;
  std::vector<double> apparatus_t;  // empty = all 1
  int signal_mode = -1;             // -1 = last mode

  int mode_count() const { return static_cast<int>(orders.orders.size()); }

  int resolved_signal_mode() const {
    return signal_mode < 0 ? mode_count() - 1 : signal_mode;
  }

  bool mode_passes_sample(int mode) const {
    return scheme == Scheme::SinglePass ? mode == resolved_signal_mode() : true;
  }

  std::vector<int> resource_modes() const {
    if (scheme == Scheme::SinglePass) return {resolved_signal_mode()};
    std::vector<int> all(static_cast<std::size_t>(mode_count()));
    for (int i = 0; i < mode_count(); ++i) all[static_cast<std::size_t>(i)] = i;
    return all;
  }

  void validate() const {
    const int modes = mode_count();
    if (modes < 1) throw std::invalid_argument("scheme needs >= 1 mode");
    if (scheme == Scheme::DoublePass && modes != 2)
      throw std::invalid_argument("double-pass is a two-mode scheme");
    if (scheme == Scheme::MultiPass && modes < 2)
      throw std::invalid_argument("multi-pass needs >= 2 modes");
    if (!std::isfinite(sample_t) || sample_t < 0.0 || sample_t > 1.0)
      throw std::invalid_argument("sample transmittance outside [0, 1]");
    if (!apparatus_t.empty()) LossNetwork{apparatus_t}.validate(modes);
    const int sig = resolved_signal_mode();
    if (sig < 0 || sig >= modes)
      throw std::invalid_argument("signal mode out of range");
  }

  LossNetwork apparatus_network() const {
    return apparatus_t.empty() ? LossNetwork::uniform(mode_count(), 1.0)
                               : LossNetwork{apparatus_t};
  }

  LossNetwork total_network() const {
    LossNetwork net = apparatus_network();
    for (int i = 0; i < mode_count(); ++i)
      if (mode_passes_sample(i)) net.per_mode_t[static_cast<std::size_t>(i)] *= sample_t;
    return net;
  }
};

/// Moments, slope, resource count, and the resulting normalized precision
/// delta_t = sqrt(R) * sqrt(Var O) / |d<O>/dt| for one scheme at one t.
/// `undefined` marks degenerate configurations (vanishing slope) instead of
/// producing infinities.
struct PrecisionReport {
  double mean_O = 0.0;
  double second_moment_O = 0.0;
  double variance_O = 0.0;
  double derivative_dO_dt = 0.0;
  double resource_R = 0.0;
  double delta_t = std::numeric_limits<double>::quiet_NaN();
  bool undefined = false;
};

/// Per-measurement uncertainty for M repeats: delta_t normalized by 1/sqrt(M).
inline double repeated_measurement_uncertainty(const PrecisionReport& report,
                                               std::uint64_t repeats) {
  if (repeats == 0) throw std::invalid_argument("repeats must be >= 1");
  return report.delta_t / std::sqrt(static_cast<double>(repeats));
}

/// Evaluate the estimation precision of the sample transmittance for a given
/// source and scheme. The mean obeys <O>(t) = A * t^kappa with kappa the
/// summed orders of the sample-passing modes and A the mean after apparatus
/// loss only, so the slope is taken analytically; moments come from the
/// exactly thinned distribution and R is the mean photon number of the input
/// state over the resource modes.
inline PrecisionReport precision(const SourceModel& src,
                                 const SchemeConfig& cfg, int n_max = 0) {
  cfg.validate();
  src.validate();
  if (cfg.mode_count() != src.mode_count())
    throw std::invalid_argument("scheme arity != source arity");
  if (n_max <= 0) n_max = default_n_max(src, cfg.orders.order_sum());

  const PhotonNumberDistribution input = expand_source(src, n_max);
  const PhotonNumberDistribution after_apparatus =
      apply_loss(input, cfg.apparatus_network());
  const PhotonNumberDistribution at_detector =
      apply_loss(after_apparatus,
                 [&] {
                   LossNetwork sample_only =
                       LossNetwork::uniform(cfg.mode_count(), 1.0);
                   for (int i = 0; i < cfg.mode_count(); ++i)
                     if (cfg.mode_passes_sample(i))
                       sample_only.per_mode_t[static_cast<std::size_t>(i)] =
                           cfg.sample_t;
                   return sample_only;
                 }());

  int kappa = 0;
  for (int i = 0; i < cfg.mode_count(); ++i)
    if (cfg.mode_passes_sample(i))
      kappa += cfg.orders.orders[static_cast<std::size_t>(i)];

  PrecisionReport report;
  report.mean_O = correlation_mean(at_detector, cfg.orders);
  report.second_moment_O = correlation_second_moment(at_detector, cfg.orders);
  report.variance_O = report.second_moment_O - report.mean_O * report.mean_O;
  if (report.variance_O < 0.0) {
    if (report.variance_O <
        -1e-12 * std::max(1.0, report.second_moment_O))
      throw std::logic_error("variance significantly negative");
    report.variance_O = 0.0;
  }

  const double mean_at_apparatus = correlation_mean(after_apparatus, cfg.orders);
  report.derivative_dO_dt = static_cast<double>(kappa) *
                            std::pow(cfg.sample_t, kappa - 1) *
                            mean_at_apparatus;

  const auto resource = cfg.resource_modes();
  report.resource_R = mean_photon_number(input, resource);

  if (mean_at_apparatus == 0.0 || report.derivative_dO_dt == 0.0) {
    report.undefined = true;
    return report;
  }
  report.delta_t = std::sqrt(report.resource_R) *
                   std::sqrt(report.variance_O) /
                   std::fabs(report.derivative_dO_dt);
  return report;
}

/// The closed-form precision curves used as cross-checks of the engine:
/// ideal pair state under single/double pass, coherent illumination, and the
/// weak-pump pair source under single/double pass.
enum class ClosedForm {
  IdealSinglePass,
  IdealDoublePass,
  CoherentState,
  SpdcSinglePass,
  SpdcDoublePass,
};

inline double precision_closed_form(ClosedForm form, double t,
                                    std::optional<double> beta = {}) {
  if (!(t >= 0.0 && t <= 1.0))
    throw std::invalid_argument("t outside [0, 1]");
  switch (form) {
    case ClosedForm::IdealSinglePass:
      return std::sqrt(t * (1.0 - t));
    case ClosedForm::IdealDoublePass:
      return std::sqrt((1.0 - t * t) / 2.0);
    case ClosedForm::CoherentState:
      return std::sqrt(t);
    case ClosedForm::SpdcSinglePass:
    case ClosedForm::SpdcDoublePass: {
      if (!beta) throw std::invalid_argument("beta required for SPDC forms");
      const double b2 = *beta * *beta;
      if (form == ClosedForm::SpdcSinglePass)
        return std::sqrt(t - t * t * b2);
      return std::sqrt((1.0 - t * t * b2) / 2.0);
    }
  }
  throw std::logic_error("unreachable");
}

struct CriticalPoint {
  double t_critical = 0.5;
  bool at_beta_zero_limit = false;
};

/// Sample transmittance above which the double-pass scheme beats single
/// pass for a weak-pump pair source: 1 / (1 + sqrt(1 - beta^2)), written in
/// the cancellation-free form. beta = 0 returns the limiting value 0.5 with
/// a flag.
inline CriticalPoint critical_transmittance(double beta) {
  if (!std::isfinite(beta) || beta < 0.0 || beta > 1.0)
    throw std::invalid_argument("beta outside [0, 1]");
  if (beta == 0.0) return {0.5, true};
  return {1.0 / (1.0 + std::sqrt(1.0 - beta * beta)), false};
}

/// Locate the single-pass/double-pass crossover of the engine curves by
/// bisection on delta_t_SP - delta_t_DP. Cross-check for
/// critical_transmittance.
inline double crossover_by_bisection(double beta, double tol = 1e-9,
                                     int n_max = 0) {
  const SourceModel src = SourceModel::weak_spdc(beta);
  auto gap = [&](double t) {
    SchemeConfig sp{Scheme::SinglePass, t, {{1, 1}}, {}, -1};
    SchemeConfig dp{Scheme::DoublePass, t, {{1, 1}}, {}, -1};
    return precision(src, sp, n_max).delta_t - precision(src, dp, n_max).delta_t;
  };
  double lo = 1e-6;
  double hi = 1.0;
  if (gap(lo) >= 0.0 || gap(hi) <= 0.0)
    throw std::logic_error("crossover not bracketed");
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (gap(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// delta_t_SP / delta_t_DP for a weak-pump pair source over a grid of sample
/// transmittances in (0, 1]. Monotone increasing in t with supremum sqrt(2).
inline std::vector<double> enhancement_curve(double beta,
                                             std::span<const double> t_grid,
                                             int n_max = 0) {
  const SourceModel src = SourceModel::weak_spdc(beta);
  std::vector<double> out;
  out.reserve(t_grid.size());
  for (double t : t_grid) {
    if (!(t > 0.0 && t <= 1.0))
      throw std::invalid_argument("enhancement grid must lie in (0, 1]");
    SchemeConfig sp{Scheme::SinglePass, t, {{1, 1}}, {}, -1};
    SchemeConfig dp{Scheme::DoublePass, t, {{1, 1}}, {}, -1};
    out.push_back(precision(src, sp, n_max).delta_t /
                  precision(src, dp, n_max).delta_t);
  }
  return out;
}

/// N-mode generalization: every mode of the correlated N-mode source passes
/// the sample and an N-fold coincidence of orders k_i is measured. Reduces
/// exactly to the double-pass scheme at N = 2.
inline PrecisionReport multipass_precision(const SourceModel& src,
                                           const CorrelationObservable& orders,
                                           double sample_t, int n_max = 0) {
  if (src.kind != SourceModel::Kind::MultiModeCorrelated &&
      src.kind != SourceModel::Kind::IdealPair)
    throw std::invalid_argument("multipass needs a correlated N-mode source");
  SchemeConfig cfg{Scheme::MultiPass, sample_t, orders, {}, -1};
  return precision(src, cfg, n_max);
}

}  // namespace twinscope
