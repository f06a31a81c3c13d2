#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "svshrink/errors.hpp"
#include "svshrink/spectral.hpp"

namespace svshrink {

namespace detail {

/// Marchenko-Pastur CDF at x0 for aspect ratio beta in (0, 1], unit variance.
/// The density sqrt((b - x)(x - a)) / (2 pi beta x) on [a, b] with
/// a = (1 - sqrt(beta))^2, b = (1 + sqrt(beta))^2 is integrated after the
/// substitution x = a + (b - a) sin^2(theta), which removes both edge
/// singularities (and the 1/x pole at a = 0 when beta = 1). Composite
/// Simpson on the smooth transformed integrand.
inline double mp_cdf(double x0, double beta) {
  const double sb = std::sqrt(beta);
  const double a = (1.0 - sb) * (1.0 - sb);
  const double b = (1.0 + sb) * (1.0 + sb);
  if (x0 <= a) return 0.0;
  if (x0 >= b) return 1.0;

  const double span = b - a;
  const double theta0 = std::asin(std::sqrt((x0 - a) / span));
  const double pi = 3.14159265358979323846;

  auto integrand = [&](double theta) {
    const double s = std::sin(theta);
    const double c = std::cos(theta);
    const double s2 = s * s;
    const double x = a + span * s2;
    // (b-a) sin^2 / x -> 1 as theta -> 0 when a = 0; 0 otherwise.
    const double ratio = x > 0.0 ? span * s2 / x : 1.0;
    return ratio * span * c * c / (pi * beta);
  };

  const int panels = 2048;  // even; Simpson error ~ (theta0/panels)^4
  const double h = theta0 / panels;
  double acc = integrand(0.0) + integrand(theta0);
  for (int k = 1; k < panels; ++k) {
    acc += (k % 2 == 1 ? 4.0 : 2.0) * integrand(k * h);
  }
  return acc * h / 3.0;
}

}  // namespace detail

/// Median of the Marchenko-Pastur law with ratio beta, by bisection on the
/// CDF to 1e-10 in x (well under the 1e-8 target).
inline double mp_median(double beta) {
  if (!(beta > 0.0 && beta <= 1.0)) {
    throw ValidationError("mp_median: beta must lie in (0, 1]");
  }
  const double sb = std::sqrt(beta);
  double lo = (1.0 - sb) * (1.0 - sb);
  double hi = (1.0 + sb) * (1.0 + sb);
  for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (detail::mp_cdf(mid, beta) < 0.5) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  if (hi - lo > 1e-8) {
    throw ComputationError("mp_median: bisection failed to converge");
  }
  return 0.5 * (lo + hi);
}

/// min(N,P)/max(N,P) in (0, 1].
inline double aspect_ratio(Index n, Index p) {
  if (n < 1 || p < 1) {
    throw ValidationError("aspect_ratio: dimensions must be positive");
  }
  return static_cast<double>(std::min(n, p)) / static_cast<double>(std::max(n, p));
}

/// Median-calibrated noise scale: sigma_hat = median(lambda) /
/// sqrt(max(N,P) * mp_median(beta)). For pure noise the median squared
/// singular value over max(N,P) converges to the MP median, so sigma_hat
/// is consistent; the median makes it robust to a few strong components.
inline double estimate_sigma(const Vector& lambdas, Index n, Index p) {
  const Index m = lambdas.size();
  if (m < 2) {
    throw ValidationError("estimate_sigma: need at least two singular values");
  }
  std::vector<double> sorted(lambdas.data(), lambdas.data() + m);
  std::sort(sorted.begin(), sorted.end());
  const double med = (m % 2 == 1)
                         ? sorted[m / 2]
                         : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
  if (!(med > 0.0)) {
    throw EstimationError("estimate_sigma: median singular value is zero");
  }
  const double mu = mp_median(aspect_ratio(n, p));
  return med / std::sqrt(static_cast<double>(std::max(n, p)) * mu);
}

}  // namespace svshrink
