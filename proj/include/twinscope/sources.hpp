#pragma once

#include <cmath>
#include <map>
#include <stdexcept>

#include "twinscope/fock.hpp"

namespace twinscope {

/// Illumination source, expandable to a diagonal photon-number distribution.
///
/// IdealPair(N)            |1,...,1> on N modes (N = 2 by default)
/// WeakSpdc(beta)          sqrt(1-b^2)|0,0> + b|1,1>, the weak-pump limit
/// TwoModeSqueezed(beta)   P(n,n) = (1-b^2) b^{2n}
/// Coherent(lambda)        single mode, Poissonian photon number
/// MultiModeCorrelated(N)  P(n,...,n) = (1-b^2) b^{2n} over N modes
struct SourceModel {
  enum class Kind {
    IdealPair,
    WeakSpdc,
    TwoModeSqueezed,
    Coherent,
    MultiModeCorrelated,
  };

  Kind kind = Kind::IdealPair;
  double beta = 0.0;
  double mean_photons = 0.0;  // Coherent only
  int modes = 2;

  static SourceModel ideal_pair() { return {Kind::IdealPair, 0.0, 0.0, 2}; }
  static SourceModel ideal_tuple(int n_modes) {
    return {Kind::IdealPair, 0.0, 0.0, n_modes};
  }
  static SourceModel weak_spdc(double beta) {
    return {Kind::WeakSpdc, beta, 0.0, 2};
  }
  static SourceModel two_mode_squeezed(double beta) {
    return {Kind::TwoModeSqueezed, beta, 0.0, 2};
  }
  static SourceModel coherent(double mean_photons) {
    return {Kind::Coherent, 0.0, mean_photons, 1};
  }
  static SourceModel multimode_correlated(int n_modes, double beta) {
    return {Kind::MultiModeCorrelated, beta, 0.0, n_modes};
  }

  int mode_count() const { return modes; }

  void validate() const {
    if (modes < 1) throw std::invalid_argument("source must have >= 1 mode");
    switch (kind) {
      case Kind::IdealPair:
        break;
      case Kind::WeakSpdc:
      case Kind::TwoModeSqueezed:
      case Kind::MultiModeCorrelated:
        if (!std::isfinite(beta) || beta <= 0.0 || beta >= 1.0)
          throw std::invalid_argument("beta must lie in (0, 1)");
        if (kind == Kind::MultiModeCorrelated && modes < 2)
          throw std::invalid_argument("correlated source needs >= 2 modes");
        break;
      case Kind::Coherent:
        if (!std::isfinite(mean_photons) || mean_photons <= 0.0)
          throw std::invalid_argument("coherent mean photon number must be > 0");
        break;
    }
  }
};

/// Truncation depth that keeps the neglected tail mass below ~1e-16 for the
/// given source (capped at 256 to bound table sizes; the residual deficit is
/// reported on the distribution either way).
inline int default_n_max(const SourceModel& src, int min_n_max = 1) {
  src.validate();
  int n = 2;
  switch (src.kind) {
    case SourceModel::Kind::IdealPair:
    case SourceModel::Kind::WeakSpdc:
      n = 2;
      break;
    case SourceModel::Kind::TwoModeSqueezed:
    case SourceModel::Kind::MultiModeCorrelated: {
      // (beta^2)^{n+1} < 1e-16
      double logb2 = 2.0 * std::log10(src.beta);
      n = static_cast<int>(std::ceil(-16.0 / logb2)) + 1;
      break;
    }
    case SourceModel::Kind::Coherent:
      n = static_cast<int>(std::ceil(src.mean_photons +
                                     12.0 * std::sqrt(src.mean_photons))) +
          8;
      break;
  }
  n = std::max(n, min_n_max);
  return std::min(n, 256);
}

/// Expand a source into its photon-number table, truncated at n_max photons
/// per mode. The mass beyond the cutoff is reported as the truncation
/// deficit, never renormalized into the kept entries.
inline PhotonNumberDistribution expand_source(const SourceModel& src,
                                              int n_max) {
  src.validate();
  if (n_max < 1) throw std::invalid_argument("n_max must be >= 1");
  std::map<Occupation, double> probs;
  double deficit = 0.0;

  switch (src.kind) {
    case SourceModel::Kind::IdealPair: {
      probs[Occupation(static_cast<std::size_t>(src.modes), 1)] = 1.0;
      break;
    }
    case SourceModel::Kind::WeakSpdc: {
      const double b2 = src.beta * src.beta;
      probs[{0, 0}] = 1.0 - b2;
      probs[{1, 1}] = b2;
      break;
    }
    case SourceModel::Kind::TwoModeSqueezed:
    case SourceModel::Kind::MultiModeCorrelated: {
      const double b2 = src.beta * src.beta;
      const double norm = 1.0 - b2;
      double w = norm;
      for (int n = 0; n <= n_max; ++n) {
        probs[Occupation(static_cast<std::size_t>(src.modes), n)] = w;
        w *= b2;
      }
      deficit = std::pow(b2, n_max + 1);  // geometric tail
      break;
    }
    case SourceModel::Kind::Coherent: {
      const double lambda = src.mean_photons;
      double w = std::exp(-lambda);
      double kept = 0.0;
      for (int n = 0; n <= n_max; ++n) {
        probs[{n}] = w;
        kept += w;
        w *= lambda / static_cast<double>(n + 1);
      }
      deficit = std::max(0.0, 1.0 - kept);
      break;
    }
  }
  return PhotonNumberDistribution(src.mode_count(), n_max, std::move(probs),
                                  deficit);
}

}  // namespace twinscope
