#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "svshrink/errors.hpp"
#include "svshrink/marchenko_pastur.hpp"
#include "svshrink/spectral.hpp"

namespace svshrink {

// Every shrinker below maps empirical singular values lambda to estimates
// d_hat with 0 <= d_hat_i <= lambda_i, keeping the empirical singular
// vectors. Inputs are assumed weakly decreasing and nonnegative.

/// d_hat_i = lambda_i * 1(i <= rank): keep the leading directions, drop the rest.
inline Vector hard_by_rank(const Vector& lambdas, Index rank) {
  const Index m = lambdas.size();
  if (rank < 0 || rank > m) {
    throw ValidationError("hard_by_rank: rank " + std::to_string(rank) +
                          " outside [0, " + std::to_string(m) + "]");
  }
  Vector d = Vector::Zero(m);
  d.head(rank) = lambdas.head(rank);
  return d;
}

/// d_hat_i = lambda_i * 1(lambda_i >= tau); the boundary value is kept.
inline Vector hard_by_threshold(const Vector& lambdas, double tau) {
  if (tau < 0.0) throw ValidationError("hard_by_threshold: tau must be >= 0");
  Vector d = Vector::Zero(lambdas.size());
  for (Index i = 0; i < lambdas.size(); ++i) {
    if (lambdas(i) >= tau) d(i) = lambdas(i);
  }
  return d;
}

inline double soft_value(double lambda, double tau) {
  return std::max(lambda - tau, 0.0);
}

/// d_hat_i = max(lambda_i - tau, 0).
inline Vector soft(const Vector& lambdas, double tau) {
  if (tau < 0.0) throw ValidationError("soft: tau must be >= 0");
  Vector d(lambdas.size());
  for (Index i = 0; i < lambdas.size(); ++i) d(i) = soft_value(lambdas(i), tau);
  return d;
}

/// Adaptive trace-norm value map: lambda * max(1 - (tau/lambda)^gamma, 0).
/// gamma = 1 is soft thresholding (computed in that exact form so the two
/// agree bitwise); gamma -> infinity approaches hard thresholding. The ratio
/// form (tau/lambda)^gamma keeps large gamma away from overflow.
inline double atn_value(double lambda, double tau, double gamma) {
  if (lambda <= 0.0) return 0.0;
  if (gamma == 1.0) return soft_value(lambda, tau);
  const double r = std::pow(tau / lambda, gamma);
  return lambda * std::max(1.0 - r, 0.0);
}

inline Vector atn(const Vector& lambdas, double tau, double gamma) {
  if (tau < 0.0) throw ValidationError("atn: tau must be >= 0");
  if (gamma < 1.0) throw ValidationError("atn: gamma must be >= 1");
  Vector d(lambdas.size());
  for (Index i = 0; i < lambdas.size(); ++i) {
    d(i) = atn_value(lambdas(i), tau, gamma);
  }
  return d;
}

/// Asymptotically MSE-optimal shrinkage for known noise level. Works in
/// normalized units lt = lambda / (sigma * sqrt(max(N,P))) with
/// beta = min(N,P)/max(N,P); components at or below the bulk edge
/// 1 + sqrt(beta) are undetectable and map to zero.
inline double optimal_shrink_value(double lambda, Index n, Index p, double sigma) {
  const double beta = aspect_ratio(n, p);
  const double scale = sigma * std::sqrt(static_cast<double>(std::max(n, p)));
  const double lt = lambda / scale;
  if (!(lt > 1.0 + std::sqrt(beta))) return 0.0;
  const double t = lt * lt - beta - 1.0;
  return scale * std::sqrt(std::max(t * t - 4.0 * beta, 0.0)) / lt;
}

inline Vector optimal_shrink(const Vector& lambdas, Index n, Index p, double sigma) {
  if (!(sigma > 0.0)) throw ValidationError("optimal_shrink: sigma must be > 0");
  Vector d(lambdas.size());
  for (Index i = 0; i < lambdas.size(); ++i) {
    d(i) = optimal_shrink_value(lambdas(i), n, p, sigma);
  }
  return d;
}

/// Optimal shrinkage with the noise level replaced by its median-calibrated
/// estimate.
inline Vector optimal_shrink_sigma_unknown(const Vector& lambdas, Index n, Index p) {
  return optimal_shrink(lambdas, n, p, estimate_sigma(lambdas, n, p));
}

/// Two-step rule: pick a rank, then shrink each kept value by the noise
/// energy it carries: d_hat_i = lambda_i * (1 - noise_energy / lambda_i^2),
/// floored at zero. noise_energy is in squared-singular-value units.
inline Vector two_step(const Vector& lambdas, Index rank, double noise_energy) {
  const Index m = lambdas.size();
  if (rank < 0 || rank > m) {
    throw ValidationError("two_step: rank outside [0, m]");
  }
  if (noise_energy < 0.0) {
    throw ValidationError("two_step: noise_energy must be >= 0");
  }
  Vector d = Vector::Zero(m);
  for (Index i = 0; i < rank; ++i) {
    const double l2 = lambdas(i) * lambdas(i);
    if (l2 > 0.0) d(i) = std::max(lambdas(i) * (1.0 - noise_energy / l2), 0.0);
  }
  return d;
}

/// Two-step rule with per-component noise energy from the spiked-model
/// inflation lambda^2 ~ d^2 + (N+P) sigma^2 + NP sigma^4 / d^2: each kept
/// value is shrunk by c_i = (N+P) sigma^2 + NP sigma^4 / lambda_i^2.
inline Vector two_step_spiked(const Vector& lambdas, Index rank, Index n, Index p,
                              double sigma) {
  const Index m = lambdas.size();
  if (rank < 0 || rank > m) {
    throw ValidationError("two_step_spiked: rank outside [0, m]");
  }
  if (!(sigma >= 0.0)) throw ValidationError("two_step_spiked: sigma must be >= 0");
  const double s2 = sigma * sigma;
  const double np = static_cast<double>(n) * static_cast<double>(p);
  Vector d = Vector::Zero(m);
  for (Index i = 0; i < rank; ++i) {
    const double l2 = lambdas(i) * lambdas(i);
    if (l2 > 0.0) {
      const double c = (n + p) * s2 + np * s2 * s2 / l2;
      d(i) = std::max(lambdas(i) * (1.0 - c / l2), 0.0);
    }
  }
  return d;
}

/// Closed-form solution of weighted trace-norm penalization with a weakly
/// increasing weight sequence: d_hat_i = max(lambda_i - alpha * omega_i, 0).
/// alpha = tau^gamma with omega_i = 1 / lambda_i^(gamma-1) recovers the
/// adaptive trace-norm map.
inline Vector weighted_closed_form(const Vector& lambdas, double alpha,
                                   const Vector& omegas) {
  if (alpha < 0.0) throw ValidationError("weighted_closed_form: alpha must be >= 0");
  if (omegas.size() != lambdas.size()) {
    throw ValidationError("weighted_closed_form: weight length mismatch");
  }
  for (Index i = 0; i < omegas.size(); ++i) {
    if (omegas(i) < 0.0) {
      throw ValidationError("weighted_closed_form: weights must be nonnegative");
    }
    if (i + 1 < omegas.size() && omegas(i) > omegas(i + 1)) {
      throw ValidationError("weighted_closed_form: weights must be weakly increasing");
    }
  }
  Vector d(lambdas.size());
  for (Index i = 0; i < lambdas.size(); ++i) {
    d(i) = std::max(lambdas(i) - alpha * omegas(i), 0.0);
  }
  return d;
}

/// Asymptotically optimal hard-threshold coefficient lambda*(beta); the
/// threshold itself is lambda*(beta) * sqrt(max(N,P)) * sigma. Square case:
/// lambda*(1) = 4/sqrt(3).
inline double optimal_hard_coefficient(double beta) {
  if (!(beta > 0.0 && beta <= 1.0)) {
    throw ValidationError("optimal_hard_coefficient: beta must lie in (0, 1]");
  }
  const double inner = (beta + 1.0) + std::sqrt(beta * beta + 14.0 * beta + 1.0);
  return std::sqrt(2.0 * (beta + 1.0) + 8.0 * beta / inner);
}

// ---------------------------------------------------------------------------
// Tagged shrinker descriptions, used by curve exports and the CLI.

struct HardRankSpec {
  Index rank = 0;
};
struct HardThresholdSpec {
  double tau = 0.0;
};
struct SoftSpec {
  double tau = 0.0;
};
struct AtnSpec {
  double tau = 0.0;
  double gamma = 1.0;
};
struct OptimalShrinkSpec {
  Index n_rows = 0;
  Index n_cols = 0;
  double sigma = 0.0;  // <= 0 means estimate from the spectrum
};
struct TwoStepSpec {
  Index rank = 0;
  double noise_energy = 0.0;
};
struct WeightedClosedFormSpec {
  double alpha = 0.0;
  std::vector<double> omegas;
};

using ShrinkerSpec = std::variant<HardRankSpec, HardThresholdSpec, SoftSpec,
                                  AtnSpec, OptimalShrinkSpec, TwoStepSpec,
                                  WeightedClosedFormSpec>;

inline Vector apply_shrinker(const ShrinkerSpec& spec, const Vector& lambdas) {
  return std::visit(
      [&](const auto& s) -> Vector {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, HardRankSpec>) {
          return hard_by_rank(lambdas, s.rank);
        } else if constexpr (std::is_same_v<T, HardThresholdSpec>) {
          return hard_by_threshold(lambdas, s.tau);
        } else if constexpr (std::is_same_v<T, SoftSpec>) {
          return soft(lambdas, s.tau);
        } else if constexpr (std::is_same_v<T, AtnSpec>) {
          return atn(lambdas, s.tau, s.gamma);
        } else if constexpr (std::is_same_v<T, OptimalShrinkSpec>) {
          return s.sigma > 0.0
                     ? optimal_shrink(lambdas, s.n_rows, s.n_cols, s.sigma)
                     : optimal_shrink_sigma_unknown(lambdas, s.n_rows, s.n_cols);
        } else if constexpr (std::is_same_v<T, TwoStepSpec>) {
          return two_step(lambdas, s.rank, s.noise_energy);
        } else {
          return weighted_closed_form(lambdas, s.alpha,
                                      Eigen::Map<const Vector>(s.omegas.data(),
                                                               static_cast<Index>(s.omegas.size())));
        }
      },
      spec);
}

/// Pointwise value map lambda -> d_hat for specs that define one (index-based
/// conditions are treated as satisfied). Used for shrinkage-curve exports.
inline double shrinker_curve_value(const ShrinkerSpec& spec, double lambda) {
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, HardRankSpec>) {
          return lambda;
        } else if constexpr (std::is_same_v<T, HardThresholdSpec>) {
          return lambda >= s.tau ? lambda : 0.0;
        } else if constexpr (std::is_same_v<T, SoftSpec>) {
          return soft_value(lambda, s.tau);
        } else if constexpr (std::is_same_v<T, AtnSpec>) {
          return atn_value(lambda, s.tau, s.gamma);
        } else if constexpr (std::is_same_v<T, OptimalShrinkSpec>) {
          if (!(s.sigma > 0.0)) {
            throw ValidationError("shrinker_curve_value: os curve needs sigma");
          }
          return optimal_shrink_value(lambda, s.n_rows, s.n_cols, s.sigma);
        } else if constexpr (std::is_same_v<T, TwoStepSpec>) {
          if (lambda <= 0.0) return 0.0;
          return std::max(lambda * (1.0 - s.noise_energy / (lambda * lambda)), 0.0);
        } else {
          throw ValidationError(
              "shrinker_curve_value: weighted closed form has no scalar curve");
        }
      },
      spec);
}

}  // namespace svshrink
