#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "svshrink/errors.hpp"
#include "svshrink/rng.hpp"
#include "svshrink/shrinkers.hpp"
#include "svshrink/spectral.hpp"

namespace svshrink {

/// One evaluated point of a SURE-type criterion. criterion is always
/// recomputable from rss and divergence; for GSURE a degenerate denominator
/// (divergence >= NP) is reported as +infinity so it can never win a search.
struct SureBreakdown {
  double rss = 0.0;
  double divergence = 0.0;
  double criterion = 0.0;
  double tau = 0.0;
  double gamma = 1.0;
};

/// Search grid; tau values strictly positive and ascending, gamma values
/// >= 1 and ascending.
struct SelectionGrid {
  std::vector<double> tau_values;
  std::vector<double> gamma_values;
};

/// How tuning parameters are chosen.
struct SelectionRule {
  enum class Kind { Fixed, Sure, Gsure, UniversalSure };
  Kind kind = Kind::Gsure;
  double sigma2 = 0.0;        // Sure / UniversalSure
  double universal_tau = 0.0; // UniversalSure: tau is pinned, gamma is searched
  double fixed_tau = 0.0;     // Fixed
  double fixed_gamma = 1.0;   // Fixed
};

namespace detail {

inline void require_tie_free(const Vector& lambdas) {
  for (Index i = 0; i + 1 < lambdas.size(); ++i) {
    const double a = lambdas(i), b = lambdas(i + 1);
    if (std::abs(a - b) <= 1e-10 * std::max(std::abs(a), std::abs(b))) {
      throw SingularityError(
          "tied singular values at positions " + std::to_string(i) + "," +
          std::to_string(i + 1) + "; the SURE divergence is undefined");
    }
  }
}

/// (tau / lambda)^gamma, with the lambda = 0 limit mapped to +infinity so
/// max(1 - r, 0) evaluates to 0 there.
inline double atn_ratio(double lambda, double tau, double gamma) {
  if (lambda <= 0.0) return std::numeric_limits<double>::infinity();
  return std::pow(tau / lambda, gamma);
}

/// Per-spectrum quantities reused across grid points:
/// pair_sum(s) = lambda_s^2 * sum_{t != s} 1 / (lambda_s^2 - lambda_t^2).
struct SurePrecompute {
  Vector lam2;
  Vector pair_sum;
};

inline SurePrecompute precompute(const Vector& lambdas) {
  require_tie_free(lambdas);
  const Index m = lambdas.size();
  SurePrecompute pre;
  pre.lam2 = lambdas.cwiseProduct(lambdas);
  pre.pair_sum = Vector::Zero(m);
  for (Index s = 0; s < m; ++s) {
    double acc = 0.0;
    for (Index t = 0; t < m; ++t) {
      if (t != s) acc += 1.0 / (pre.lam2(s) - pre.lam2(t));
    }
    pre.pair_sum(s) = pre.lam2(s) * acc;
  }
  return pre;
}

inline double divergence_from(const SurePrecompute& pre, const Vector& lambdas,
                              double tau, double gamma, Index n, Index p) {
  const Index m = lambdas.size();
  const double dim_gap = static_cast<double>(std::abs(n - p));
  double div = 0.0;
  for (Index s = 0; s < m; ++s) {
    const double r = atn_ratio(lambdas(s), tau, gamma);
    const double keep_factor = std::max(1.0 - r, 0.0);
    if (lambdas(s) >= tau) div += 1.0 + (gamma - 1.0) * r;
    div += dim_gap * keep_factor;
    div += 2.0 * keep_factor * pre.pair_sum(s);
  }
  return div;
}

inline double rss_from(const SurePrecompute& pre, const Vector& lambdas,
                       double tau, double gamma) {
  double rss = 0.0;
  for (Index s = 0; s < lambdas.size(); ++s) {
    if (lambdas(s) <= 0.0) continue;
    const double r2 = std::pow(tau / lambdas(s), 2.0 * gamma);
    rss += pre.lam2(s) * std::min(r2, 1.0);
  }
  return rss;
}

inline SureBreakdown eval_sure(const SurePrecompute& pre, const Vector& lambdas,
                               double tau, double gamma, double sigma2, Index n,
                               Index p) {
  SureBreakdown out;
  out.tau = tau;
  out.gamma = gamma;
  out.rss = rss_from(pre, lambdas, tau, gamma);
  out.divergence = divergence_from(pre, lambdas, tau, gamma, n, p);
  const double np = static_cast<double>(n) * static_cast<double>(p);
  out.criterion = -np * sigma2 + out.rss + 2.0 * sigma2 * out.divergence;
  return out;
}

inline SureBreakdown eval_gsure(const SurePrecompute& pre, const Vector& lambdas,
                                double tau, double gamma, Index n, Index p) {
  SureBreakdown out;
  out.tau = tau;
  out.gamma = gamma;
  out.rss = rss_from(pre, lambdas, tau, gamma);
  out.divergence = divergence_from(pre, lambdas, tau, gamma, n, p);
  const double np = static_cast<double>(n) * static_cast<double>(p);
  const double denom = 1.0 - out.divergence / np;
  // rss == 0 means the map rounded to the exact identity, the same
  // degenerate corner as divergence >= NP.
  out.criterion = (denom > 0.0 && out.rss > 0.0)
                      ? out.rss / (denom * denom)
                      : std::numeric_limits<double>::infinity();
  return out;
}

}  // namespace detail

/// Divergence of the shrinkage map X -> W_hat for the adaptive trace-norm
/// rule (trace of its Jacobian, the degrees-of-freedom term of SURE):
///   sum_s (1 + (gamma-1) r_s) 1(lambda_s >= tau) + |N-P| max(1 - r_s, 0)
///   + 2 sum_{t != s} lambda_s^2 max(1 - r_s, 0) / (lambda_s^2 - lambda_t^2)
/// with r_s = (tau/lambda_s)^gamma. Requires a tie-free spectrum.
inline double atn_divergence(const Vector& lambdas, double tau, double gamma,
                             Index n, Index p) {
  if (!(tau > 0.0)) throw ValidationError("atn_divergence: tau must be > 0");
  if (gamma < 1.0) throw ValidationError("atn_divergence: gamma must be >= 1");
  detail::require_tie_free(lambdas);
  const Index m = lambdas.size();
  const double dim_gap = static_cast<double>(std::abs(n - p));
  const Vector lam2 = lambdas.cwiseProduct(lambdas);
  double div = 0.0;
  for (Index s = 0; s < m; ++s) {
    const double r = detail::atn_ratio(lambdas(s), tau, gamma);
    const double keep_factor = std::max(1.0 - r, 0.0);
    if (lambdas(s) >= tau) div += 1.0 + (gamma - 1.0) * r;
    div += dim_gap * keep_factor;
    if (keep_factor > 0.0) {
      for (Index t = 0; t < m; ++t) {
        if (t != s) div += 2.0 * lam2(s) * keep_factor / (lam2(s) - lam2(t));
      }
    }
  }
  return div;
}

/// SURE(tau, gamma) = -NP sigma^2 + RSS + 2 sigma^2 div, with
/// RSS = sum_s lambda_s^2 min((tau/lambda_s)^(2 gamma), 1).
inline SureBreakdown sure_atn(const Vector& lambdas, double tau, double gamma,
                              double sigma2, Index n, Index p) {
  if (!(sigma2 > 0.0)) throw ValidationError("sure_atn: sigma2 must be > 0");
  if (!(tau > 0.0)) throw ValidationError("sure_atn: tau must be > 0");
  if (gamma < 1.0) throw ValidationError("sure_atn: gamma must be >= 1");
  const auto pre = detail::precompute(lambdas);
  return detail::eval_sure(pre, lambdas, tau, gamma, sigma2, n, p);
}

/// GSURE(tau, gamma) = RSS / (1 - div/(NP))^2; needs no noise level.
inline SureBreakdown gsure_atn(const Vector& lambdas, double tau, double gamma,
                               Index n, Index p) {
  if (!(tau > 0.0)) throw ValidationError("gsure_atn: tau must be > 0");
  if (gamma < 1.0) throw ValidationError("gsure_atn: gamma must be >= 1");
  const auto pre = detail::precompute(lambdas);
  return detail::eval_gsure(pre, lambdas, tau, gamma, n, p);
}

// ---------------------------------------------------------------------------
// Universal threshold: a high quantile of the largest singular value of a
// pure-noise matrix, so that rank-zero signals are estimated as rank zero
// with probability 1 - 1/sqrt(log(max(N,P))).

struct UniversalThresholdTable {
  Index n_rows = 0;
  Index n_cols = 0;
  double sigma = 0.0;
  double alpha_level = 0.0;  // 1/sqrt(log(max(N,P)))
  int n_simulations = 0;
  std::uint64_t seed = 0;
  double tau_universal = 0.0;
};

namespace detail {

/// Linear-interpolation order statistic at level q (R "type 7" convention),
/// on an ascending sample.
inline double interpolated_quantile(const std::vector<double>& sorted, double q) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = q * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= n) return sorted[n - 1];
  return sorted[lo] + (h - lo) * (sorted[lo + 1] - sorted[lo]);
}

/// Simulated (1 - alpha)-quantile of the largest singular value of an
/// N x P standard Gaussian matrix. Each simulation owns an independent
/// stream derived from (seed, index) and results are reduced in index
/// order, so thread count never changes the value. Cached per
/// (N, P, n_sim, seed).
inline double unit_largest_sv_quantile(Index n, Index p, int n_sim,
                                       std::uint64_t seed, int threads) {
  static std::mutex cache_mutex;
  static std::map<std::tuple<Index, Index, int, std::uint64_t>, double> cache;
  const auto key = std::make_tuple(n, p, n_sim, seed);
  {
    std::lock_guard<std::mutex> lock(cache_mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }

  std::vector<double> top(static_cast<std::size_t>(n_sim));
  auto simulate = [&](int i) {
    auto eng = make_engine(derive_seed(seed, {static_cast<std::uint64_t>(i)}));
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix x(n, p);
    for (Index j = 0; j < p; ++j) {
      for (Index r = 0; r < n; ++r) x(r, j) = gauss(eng);
    }
    Eigen::BDCSVD<Matrix> svd(x);
    top[static_cast<std::size_t>(i)] = svd.singularValues()(0);
  };

  threads = std::max(1, threads);
  if (threads == 1) {
    for (int i = 0; i < n_sim; ++i) simulate(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&] {
        for (int i = next.fetch_add(1); i < n_sim; i = next.fetch_add(1)) {
          simulate(i);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  std::sort(top.begin(), top.end());
  const double alpha =
      1.0 / std::sqrt(std::log(static_cast<double>(std::max(n, p))));
  const double q = interpolated_quantile(top, 1.0 - alpha);
  std::lock_guard<std::mutex> lock(cache_mutex);
  cache[key] = q;
  return q;
}

}  // namespace detail

/// tau = sigma * F^{-1}_{Lambda_1}(1 - 1/sqrt(log(max(N,P)))) with the
/// unit-variance law of the largest singular value estimated by Monte Carlo.
/// Homogeneous in sigma by construction (the unit quantile is cached and
/// rescaled), and deterministic per (N, P, n_sim, seed).
inline UniversalThresholdTable universal_threshold(Index n, Index p, double sigma,
                                                   int n_sim = 1000,
                                                   std::uint64_t seed = 0,
                                                   int threads = 1) {
  if (std::max(n, p) <= 1) {
    throw ValidationError("universal_threshold: need max(N,P) >= 2");
  }
  if (sigma < 0.0) throw ValidationError("universal_threshold: sigma must be >= 0");
  if (n_sim < 100) throw ValidationError("universal_threshold: need n_sim >= 100");

  UniversalThresholdTable table;
  table.n_rows = n;
  table.n_cols = p;
  table.sigma = sigma;
  table.alpha_level =
      1.0 / std::sqrt(std::log(static_cast<double>(std::max(n, p))));
  table.n_simulations = n_sim;
  table.seed = seed;
  table.tau_universal =
      sigma == 0.0
          ? 0.0
          : sigma * detail::unit_largest_sv_quantile(n, p, n_sim, seed, threads);
  return table;
}

// ---------------------------------------------------------------------------
// Grid construction and search.

/// Default gamma grid: 20 log-spaced values on [1, 64] with exact endpoints.
inline std::vector<double> default_gamma_grid() {
  const int count = 20;
  std::vector<double> g(count);
  const double step = std::log(64.0) / (count - 1);
  for (int i = 0; i < count; ++i) g[i] = std::exp(i * step);
  g.front() = 1.0;
  g.back() = 64.0;
  return g;
}

/// Default tau grid: the empirical singular values themselves restricted to
/// (lambda_m, lambda_1] — SURE is non-smooth exactly at tau = lambda_i, so
/// knots sit at the interesting points — thinned to at most 50 log-spaced
/// knots when the spectrum is long. Falls back to {lambda_1} for degenerate
/// spectra so the zero estimate stays reachable.
inline SelectionGrid default_grid(const Vector& lambdas) {
  const Index m = lambdas.size();
  if (m < 1 || !(lambdas(0) > 0.0)) {
    throw ValidationError("default_grid: need a positive leading singular value");
  }
  std::vector<double> knots;
  const double lam_min = lambdas(m - 1);
  for (Index i = 0; i < m; ++i) {
    if (lambdas(i) > lam_min && lambdas(i) > 0.0) knots.push_back(lambdas(i));
  }
  if (knots.empty()) knots.push_back(lambdas(0));
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());

  const std::size_t max_knots = 50;
  if (knots.size() > max_knots) {
    std::vector<double> thinned;
    thinned.reserve(max_knots);
    const double lo = std::log(knots.front());
    const double hi = std::log(knots.back());
    std::size_t cursor = 0;
    for (std::size_t k = 0; k < max_knots; ++k) {
      const double target = lo + (hi - lo) * k / (max_knots - 1);
      // knots are ascending; advance to the log-nearest one
      while (cursor + 1 < knots.size() &&
             std::abs(std::log(knots[cursor + 1]) - target) <=
                 std::abs(std::log(knots[cursor]) - target)) {
        ++cursor;
      }
      thinned.push_back(knots[cursor]);
    }
    thinned.erase(std::unique(thinned.begin(), thinned.end()), thinned.end());
    knots = std::move(thinned);
  }

  SelectionGrid grid;
  grid.tau_values = std::move(knots);
  grid.gamma_values = default_gamma_grid();
  return grid;
}

struct SelectionResult {
  double tau = 0.0;
  double gamma = 1.0;
  SureBreakdown best;
  std::vector<SureBreakdown> surface;  // tau-major, gamma inner, grid order
};

/// Minimizes the rule's criterion over the grid. Ties resolve to the
/// smallest tau, then the smallest gamma (the iteration order below). For
/// the universal rule tau is pinned to rule.universal_tau and only gamma is
/// searched.
inline SelectionResult grid_select(const SpectralDecomposition& dec,
                                   const SelectionRule& rule,
                                   const SelectionGrid& grid) {
  if (rule.kind == SelectionRule::Kind::Fixed) {
    throw ValidationError("grid_select: fixed rules have nothing to search");
  }
  std::vector<double> taus = rule.kind == SelectionRule::Kind::UniversalSure
                                 ? std::vector<double>{rule.universal_tau}
                                 : grid.tau_values;
  if (taus.empty() || grid.gamma_values.empty()) {
    throw ValidationError("grid_select: empty grid");
  }
  for (double t : taus) {
    if (!(t > 0.0)) throw ValidationError("grid_select: tau values must be > 0");
  }
  for (std::size_t i = 0; i + 1 < taus.size(); ++i) {
    if (taus[i] > taus[i + 1]) {
      throw ValidationError("grid_select: tau values must be ascending");
    }
  }
  for (double g : grid.gamma_values) {
    if (g < 1.0) throw ValidationError("grid_select: gamma values must be >= 1");
  }
  const bool needs_sigma = rule.kind != SelectionRule::Kind::Gsure;
  if (needs_sigma && !(rule.sigma2 > 0.0)) {
    throw ValidationError("grid_select: this rule needs sigma2 > 0");
  }

  const auto pre = detail::precompute(dec.lambdas);
  SelectionResult result;
  result.surface.reserve(taus.size() * grid.gamma_values.size());
  bool have_best = false;
  for (double tau : taus) {
    for (double gamma : grid.gamma_values) {
      SureBreakdown pt =
          rule.kind == SelectionRule::Kind::Gsure
              ? detail::eval_gsure(pre, dec.lambdas, tau, gamma, dec.n_rows,
                                   dec.n_cols)
              : detail::eval_sure(pre, dec.lambdas, tau, gamma, rule.sigma2,
                                  dec.n_rows, dec.n_cols);
      result.surface.push_back(pt);
      if (std::isfinite(pt.criterion) &&
          (!have_best || pt.criterion < result.best.criterion)) {
        result.best = pt;
        have_best = true;
      }
    }
  }
  if (!have_best) {
    throw SelectionError("grid_select: no admissible grid point (all criteria infinite)");
  }
  result.tau = result.best.tau;
  result.gamma = result.best.gamma;
  return result;
}

}  // namespace svshrink
