#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "svshrink/errors.hpp"
#include "svshrink/rng.hpp"
#include "svshrink/selection.hpp"
#include "svshrink/shrinkers.hpp"
#include "svshrink/spectral.hpp"

namespace svshrink {

enum class NoiseFamily { Gaussian, Student5 };

inline const char* to_string(NoiseFamily f) {
  return f == NoiseFamily::Gaussian ? "gaussian" : "student5";
}

/// Rank-R signal with unit Frobenius energy: W = P D Q^T with random
/// orthonormal factors and equal singular values 1/sqrt(R), so the zero
/// estimate has relative MSE exactly 1 and every component carries the same
/// strength relative to the noise.
struct SignalGroundTruth {
  Matrix w;
  Index true_rank = 0;
  Vector singular_values;
};

inline SignalGroundTruth generate_signal(Index n, Index p, Index rank,
                                         std::uint64_t seed) {
  if (rank < 1 || rank > std::min(n, p)) {
    throw ValidationError("generate_signal: rank outside [1, min(N,P)]");
  }
  auto eng = make_engine(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix a(n, rank), b(p, rank);
  for (Index j = 0; j < rank; ++j) {
    for (Index i = 0; i < n; ++i) a(i, j) = gauss(eng);
  }
  for (Index j = 0; j < rank; ++j) {
    for (Index i = 0; i < p; ++i) b(i, j) = gauss(eng);
  }
  const Matrix qa = Eigen::HouseholderQR<Matrix>(a).householderQ() *
                    Matrix::Identity(n, rank);
  const Matrix qb = Eigen::HouseholderQR<Matrix>(b).householderQ() *
                    Matrix::Identity(p, rank);
  const double d = 1.0 / std::sqrt(static_cast<double>(rank));

  SignalGroundTruth sig;
  sig.w = qa * (d * qb.transpose());
  sig.true_rank = rank;
  sig.singular_values = Vector::Constant(rank, d);
  return sig;
}

/// Ground truth from a user-supplied matrix: its best rank-R approximation,
/// rescaled to unit Frobenius energy so SNR keeps the same meaning as for
/// synthetic signals.
inline SignalGroundTruth signal_from_matrix(const Matrix& m, Index rank) {
  if (rank < 1 || rank > std::min(m.rows(), m.cols())) {
    throw ValidationError("signal_from_matrix: rank outside [1, min(N,P)]");
  }
  const auto dec = decompose(m);
  const Vector d = hard_by_rank(dec.lambdas, rank);
  const double scale = std::sqrt(d.squaredNorm());
  if (!(scale > 0.0)) {
    throw ValidationError("signal_from_matrix: matrix has no rank-" +
                          std::to_string(rank) + " content");
  }
  SignalGroundTruth sig;
  sig.w = reconstruct(dec, d) / scale;
  sig.true_rank = estimated_rank(d);
  sig.singular_values = d.head(sig.true_rank) / scale;
  return sig;
}

struct NoisySample {
  Matrix x;
  double sigma = 0.0;
};

/// X = W + E with sigma = 1/(snr * sqrt(NP)). Gaussian noise is N(0, sigma^2);
/// Student noise is t(5) rescaled by sigma/sqrt(5/3) so the entry variance is
/// exactly sigma^2 in both families.
inline NoisySample add_noise(const Matrix& w, double snr, NoiseFamily family,
                             std::uint64_t seed) {
  if (!(snr > 0.0)) throw ValidationError("add_noise: snr must be > 0");
  const double np = static_cast<double>(w.rows()) * static_cast<double>(w.cols());
  NoisySample out;
  out.sigma = 1.0 / (snr * std::sqrt(np));
  out.x = w;

  auto eng = make_engine(seed);
  if (family == NoiseFamily::Gaussian) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Index j = 0; j < w.cols(); ++j) {
      for (Index i = 0; i < w.rows(); ++i) out.x(i, j) += out.sigma * gauss(eng);
    }
  } else {
    std::student_t_distribution<double> student(5.0);
    const double scale = out.sigma / std::sqrt(5.0 / 3.0);
    for (Index j = 0; j < w.cols(); ++j) {
      for (Index i = 0; i < w.rows(); ++i) out.x(i, j) += scale * student(eng);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Estimator registry.

struct EstimatorInput {
  const SpectralDecomposition& dec;
  double sigma = 0.0;      // true noise level, for sigma-known estimators
  Index true_rank = 0;     // oracle rank, for rank-oracle estimators
  std::uint64_t universal_seed = 0;
  int universal_nsim = 1000;
};

struct EstimateOutput {
  Vector d_hat;
  std::optional<double> tau;
  std::optional<double> gamma;
  std::optional<double> criterion;
  const char* sigma_source = "n/a";  // "given" | "estimated" | "n/a"
};

using Estimator = std::function<EstimateOutput(const EstimatorInput&)>;

inline const std::vector<std::string>& known_estimators() {
  static const std::vector<std::string> names = {
      "atn-sure",  "atn-gsure", "atn-universal", "svst-sure",
      "tsvd-rank", "tsvd-tau",  "tsvd-median",   "os",
      "os-median", "two-step",  "two-step-literal"};
  return names;
}

/// Builds one of the registered denoisers by name:
///   atn-sure       ATN, (tau, gamma) minimizing SURE, sigma known
///   atn-gsure      ATN, (tau, gamma) minimizing GSURE, fully blind
///   atn-universal  ATN, tau at the universal threshold, gamma by SURE
///   svst-sure      soft thresholding, tau minimizing SURE, sigma known
///   tsvd-rank      hard thresholding at the oracle rank
///   tsvd-tau       hard thresholding at lambda*(beta) sqrt(max(N,P)) sigma
///   tsvd-median    same threshold with the median-estimated sigma
///   os             optimal shrinkage, sigma known
///   os-median      optimal shrinkage, sigma estimated
///   two-step       oracle rank, spiked-model noise energy per component
///   two-step-literal  oracle rank, noise energy sigma^2 taken literally
inline Estimator make_estimator(const std::string& name) {
  if (name == "atn-sure") {
    return [](const EstimatorInput& in) {
      SelectionRule rule;
      rule.kind = SelectionRule::Kind::Sure;
      rule.sigma2 = in.sigma * in.sigma;
      const auto sel = grid_select(in.dec, rule, default_grid(in.dec.lambdas));
      return EstimateOutput{atn(in.dec.lambdas, sel.tau, sel.gamma), sel.tau,
                            sel.gamma, sel.best.criterion, "given"};
    };
  }
  if (name == "atn-gsure") {
    return [](const EstimatorInput& in) {
      SelectionRule rule;
      rule.kind = SelectionRule::Kind::Gsure;
      const auto sel = grid_select(in.dec, rule, default_grid(in.dec.lambdas));
      return EstimateOutput{atn(in.dec.lambdas, sel.tau, sel.gamma), sel.tau,
                            sel.gamma, sel.best.criterion, "n/a"};
    };
  }
  if (name == "atn-universal") {
    return [](const EstimatorInput& in) {
      const auto table =
          universal_threshold(in.dec.n_rows, in.dec.n_cols, in.sigma,
                              in.universal_nsim, in.universal_seed);
      SelectionRule rule;
      rule.kind = SelectionRule::Kind::UniversalSure;
      rule.sigma2 = in.sigma * in.sigma;
      rule.universal_tau = table.tau_universal;
      const auto sel = grid_select(in.dec, rule, default_grid(in.dec.lambdas));
      return EstimateOutput{atn(in.dec.lambdas, sel.tau, sel.gamma), sel.tau,
                            sel.gamma, sel.best.criterion, "given"};
    };
  }
  if (name == "svst-sure") {
    return [](const EstimatorInput& in) {
      SelectionRule rule;
      rule.kind = SelectionRule::Kind::Sure;
      rule.sigma2 = in.sigma * in.sigma;
      SelectionGrid grid = default_grid(in.dec.lambdas);
      grid.gamma_values = {1.0};
      const auto sel = grid_select(in.dec, rule, grid);
      return EstimateOutput{soft(in.dec.lambdas, sel.tau), sel.tau, sel.gamma,
                            sel.best.criterion, "given"};
    };
  }
  if (name == "tsvd-rank") {
    return [](const EstimatorInput& in) {
      return EstimateOutput{hard_by_rank(in.dec.lambdas, in.true_rank),
                            std::nullopt, std::nullopt, std::nullopt, "n/a"};
    };
  }
  if (name == "tsvd-tau" || name == "tsvd-median") {
    const bool known = name == "tsvd-tau";
    return [known](const EstimatorInput& in) {
      const double sigma =
          known ? in.sigma
                : estimate_sigma(in.dec.lambdas, in.dec.n_rows, in.dec.n_cols);
      const double tau =
          optimal_hard_coefficient(aspect_ratio(in.dec.n_rows, in.dec.n_cols)) *
          std::sqrt(static_cast<double>(std::max(in.dec.n_rows, in.dec.n_cols))) *
          sigma;
      return EstimateOutput{hard_by_threshold(in.dec.lambdas, tau), tau,
                            std::nullopt, std::nullopt,
                            known ? "given" : "estimated"};
    };
  }
  if (name == "os") {
    return [](const EstimatorInput& in) {
      return EstimateOutput{
          optimal_shrink(in.dec.lambdas, in.dec.n_rows, in.dec.n_cols, in.sigma),
          std::nullopt, std::nullopt, std::nullopt, "given"};
    };
  }
  if (name == "os-median") {
    return [](const EstimatorInput& in) {
      return EstimateOutput{
          optimal_shrink_sigma_unknown(in.dec.lambdas, in.dec.n_rows, in.dec.n_cols),
          std::nullopt, std::nullopt, std::nullopt, "estimated"};
    };
  }
  if (name == "two-step") {
    return [](const EstimatorInput& in) {
      return EstimateOutput{
          two_step_spiked(in.dec.lambdas, in.true_rank, in.dec.n_rows,
                          in.dec.n_cols, in.sigma),
          std::nullopt, std::nullopt, std::nullopt, "given"};
    };
  }
  if (name == "two-step-literal") {
    return [](const EstimatorInput& in) {
      return EstimateOutput{
          two_step(in.dec.lambdas, in.true_rank, in.sigma * in.sigma),
          std::nullopt, std::nullopt, std::nullopt, "given"};
    };
  }
  throw ValidationError("make_estimator: unknown estimator '" + name + "'");
}

// ---------------------------------------------------------------------------
// Scenario execution.

struct ScenarioConfig {
  Index n_rows = 200;
  Index n_cols = 500;
  Index true_rank = 10;
  std::vector<double> snr_values;
  NoiseFamily noise = NoiseFamily::Gaussian;
  int n_replicates = 50;
  std::vector<std::string> estimators;
  std::uint64_t master_seed = 1;
  int universal_nsim = 1000;
  // When set, every replicate reuses this ground truth (a user matrix,
  // already truncated and normalized) instead of drawing a fresh synthetic
  // signal; n_rows/n_cols/true_rank must agree with it.
  std::shared_ptr<const SignalGroundTruth> fixed_signal;

  std::string id() const {
    std::ostringstream os;
    os << n_rows << "x" << n_cols << "-r" << true_rank << "-" << to_string(noise);
    if (fixed_signal) os << "-user";
    return os.str();
  }
};

struct ReplicateRecord {
  std::string scenario;
  Index true_rank = 0;
  double snr = 0.0;
  int replicate = 0;
  std::string estimator;
  bool ok = true;
  std::string error;
  double relative_mse = std::numeric_limits<double>::quiet_NaN();
  Index estimated_rank = 0;
  double tau = std::numeric_limits<double>::quiet_NaN();
  double gamma = std::numeric_limits<double>::quiet_NaN();
  double wall_time_ms = 0.0;
};

namespace detail {

// role tags for per-replicate stream derivation
inline constexpr std::uint64_t kRoleSignal = 1;
inline constexpr std::uint64_t kRoleNoise = 2;
inline constexpr std::uint64_t kRoleUniversal = 3;

inline std::vector<ReplicateRecord> run_replicate(const ScenarioConfig& cfg,
                                                  std::size_t snr_index,
                                                  int replicate) {
  const double snr = cfg.snr_values[snr_index];
  const auto signal =
      cfg.fixed_signal
          ? *cfg.fixed_signal
          : generate_signal(cfg.n_rows, cfg.n_cols, cfg.true_rank,
                            derive_seed(cfg.master_seed,
                                        {snr_index,
                                         static_cast<std::uint64_t>(replicate),
                                         kRoleSignal}));
  const auto sample = add_noise(
      signal.w, snr, cfg.noise,
      derive_seed(cfg.master_seed, {snr_index, static_cast<std::uint64_t>(replicate),
                                    kRoleNoise}));
  const auto dec = decompose(sample.x);

  std::vector<ReplicateRecord> records;
  records.reserve(cfg.estimators.size());
  for (const auto& name : cfg.estimators) {
    ReplicateRecord rec;
    rec.scenario = cfg.id();
    rec.true_rank = cfg.true_rank;
    rec.snr = snr;
    rec.replicate = replicate;
    rec.estimator = name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      EstimatorInput in{dec, sample.sigma, cfg.true_rank,
                        derive_seed(cfg.master_seed, {kRoleUniversal}),
                        cfg.universal_nsim};
      const auto est = make_estimator(name)(in);
      rec.relative_mse = relative_mse(reconstruct(dec, est.d_hat), signal.w);
      rec.estimated_rank = estimated_rank(est.d_hat);
      if (est.tau) rec.tau = *est.tau;
      if (est.gamma) rec.gamma = *est.gamma;
    } catch (const std::exception& e) {
      rec.ok = false;
      rec.error = e.what();
    }
    rec.wall_time_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - t0)
                           .count();
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace detail

/// Runs every (snr, replicate) cell of the scenario. All estimators within a
/// replicate see the same noisy matrix (paired design). Per-replicate RNG
/// streams are derived from (master_seed, snr index, replicate, role), so
/// results are identical for any thread count, and a failing estimator is
/// recorded as a failed row without aborting the sweep.
inline std::vector<ReplicateRecord> run_scenario(const ScenarioConfig& cfg,
                                                 int threads = 1) {
  if (cfg.n_replicates < 1) {
    throw ValidationError("run_scenario: need at least one replicate");
  }
  for (double snr : cfg.snr_values) {
    if (!(snr > 0.0)) throw ValidationError("run_scenario: snr values must be > 0");
  }
  if (cfg.fixed_signal &&
      (cfg.fixed_signal->w.rows() != cfg.n_rows ||
       cfg.fixed_signal->w.cols() != cfg.n_cols ||
       cfg.fixed_signal->true_rank != cfg.true_rank)) {
    throw ValidationError("run_scenario: fixed signal disagrees with the config shape");
  }
  for (const auto& name : cfg.estimators) make_estimator(name);  // validate early

  // Warm the universal-threshold cache up front so worker threads only read it.
  const bool needs_universal =
      std::find(cfg.estimators.begin(), cfg.estimators.end(), "atn-universal") !=
      cfg.estimators.end();
  if (needs_universal) {
    universal_threshold(cfg.n_rows, cfg.n_cols, 1.0, cfg.universal_nsim,
                        derive_seed(cfg.master_seed, {detail::kRoleUniversal}),
                        std::max(1, threads));
  }

  const std::size_t n_tasks = cfg.snr_values.size() *
                              static_cast<std::size_t>(cfg.n_replicates);
  std::vector<std::vector<ReplicateRecord>> slots(n_tasks);
  auto run_task = [&](std::size_t task) {
    const std::size_t snr_index = task / cfg.n_replicates;
    const int replicate = static_cast<int>(task % cfg.n_replicates);
    slots[task] = detail::run_replicate(cfg, snr_index, replicate);
  };

  threads = std::max(1, threads);
  if (threads == 1 || n_tasks <= 1) {
    for (std::size_t t = 0; t < n_tasks; ++t) run_task(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const int workers = static_cast<int>(
        std::min<std::size_t>(static_cast<std::size_t>(threads), n_tasks));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t t = next.fetch_add(1); t < n_tasks;
             t = next.fetch_add(1)) {
          run_task(t);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  std::vector<ReplicateRecord> records;
  records.reserve(n_tasks * cfg.estimators.size());
  for (auto& slot : slots) {
    for (auto& rec : slot) records.push_back(std::move(rec));
  }
  return records;
}

struct SummaryRow {
  std::string estimator;
  Index true_rank = 0;
  double snr = 0.0;
  double mean_mse = 0.0;
  double sd_mse = 0.0;
  double mean_rank = 0.0;
  double sd_rank = 0.0;
  int n = 0;
};

/// Per-(estimator, R, SNR) mean and sample standard deviation over the
/// successful replicates. Cells with fewer than two successes are dropped
/// with a note on stderr.
inline std::vector<SummaryRow> summarize(const std::vector<ReplicateRecord>& records) {
  struct Cell {
    std::vector<double> mse;
    std::vector<double> rank;
    Index true_rank = 0;
  };
  std::map<std::pair<std::string, double>, Cell> cells;
  std::vector<std::pair<std::string, double>> order;
  for (const auto& rec : records) {
    const auto key = std::make_pair(rec.estimator, rec.snr);
    auto it = cells.find(key);
    if (it == cells.end()) {
      it = cells.emplace(key, Cell{}).first;
      it->second.true_rank = rec.true_rank;
      order.push_back(key);
    }
    if (rec.ok) {
      it->second.mse.push_back(rec.relative_mse);
      it->second.rank.push_back(static_cast<double>(rec.estimated_rank));
    }
  }

  auto mean_of = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  auto sd_of = [&](const std::vector<double>& v, double mean) {
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
  };

  std::vector<SummaryRow> rows;
  for (const auto& key : order) {
    const Cell& cell = cells[key];
    if (cell.mse.size() < 2) {
      std::fprintf(stderr,
                   "summarize: dropping cell (%s, snr=%g) with %zu successful "
                   "replicates\n",
                   key.first.c_str(), key.second, cell.mse.size());
      continue;
    }
    SummaryRow row;
    row.estimator = key.first;
    row.true_rank = cell.true_rank;
    row.snr = key.second;
    row.n = static_cast<int>(cell.mse.size());
    row.mean_mse = mean_of(cell.mse);
    row.sd_mse = sd_of(cell.mse, row.mean_mse);
    row.mean_rank = mean_of(cell.rank);
    row.sd_rank = sd_of(cell.rank, row.mean_rank);
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Figure-style exports.

struct SurfacePoint {
  double tau = 0.0;
  double gamma = 1.0;
  double criterion = 0.0;
  double loss = std::numeric_limits<double>::quiet_NaN();
};

struct SurfaceTable {
  std::vector<SurfacePoint> points;
  bool has_loss = false;
  std::size_t min_criterion_index = 0;
  std::size_t min_loss_index = 0;
};

/// Criterion surface over the grid and, when the true signal is supplied,
/// the exact squared loss ||W_hat(tau, gamma) - W||_F^2 alongside it. The
/// loss is evaluated in spectral form via g_s = u_s^T W v_s, so the grid
/// sweep costs O(m) per point instead of a full reconstruction.
inline SurfaceTable export_surface(const SpectralDecomposition& dec,
                                   const SelectionRule& rule,
                                   const SelectionGrid& grid,
                                   const Matrix* w_true = nullptr) {
  const auto sel = grid_select(dec, rule, grid);

  Vector g;
  double w_norm2 = 0.0;
  if (w_true != nullptr) {
    if (w_true->rows() != dec.n_rows || w_true->cols() != dec.n_cols) {
      throw ValidationError("export_surface: signal shape mismatch");
    }
    g = (dec.u.transpose() * (*w_true) * dec.v).diagonal();
    w_norm2 = w_true->squaredNorm();
  }

  SurfaceTable table;
  table.has_loss = w_true != nullptr;
  table.points.reserve(sel.surface.size());
  double best_crit = std::numeric_limits<double>::infinity();
  double best_loss = std::numeric_limits<double>::infinity();
  for (const auto& pt : sel.surface) {
    SurfacePoint sp;
    sp.tau = pt.tau;
    sp.gamma = pt.gamma;
    sp.criterion = pt.criterion;
    if (table.has_loss) {
      const Vector d = atn(dec.lambdas, pt.tau, pt.gamma);
      sp.loss = d.squaredNorm() - 2.0 * d.dot(g) + w_norm2;
      if (sp.loss < best_loss) {
        best_loss = sp.loss;
        table.min_loss_index = table.points.size();
      }
    }
    if (sp.criterion < best_crit) {
      best_crit = sp.criterion;
      table.min_criterion_index = table.points.size();
    }
    table.points.push_back(sp);
  }
  return table;
}

struct CurveSpec {
  std::string label;
  ShrinkerSpec spec;
};

struct CurvePoint {
  double lambda = 0.0;
  std::string spec;
  double d_hat = 0.0;
};

/// Samples each spec's value map over the given lambda range, one row per
/// (lambda, spec).
inline std::vector<CurvePoint> export_shrinker_curves(
    const std::vector<CurveSpec>& specs, const std::vector<double>& lambda_range) {
  if (lambda_range.empty()) {
    throw ValidationError("export_shrinker_curves: empty lambda range");
  }
  std::vector<CurvePoint> rows;
  rows.reserve(specs.size() * lambda_range.size());
  for (const auto& cs : specs) {
    for (double lambda : lambda_range) {
      rows.push_back({lambda, cs.label, shrinker_curve_value(cs.spec, lambda)});
    }
  }
  return rows;
}

}  // namespace svshrink
