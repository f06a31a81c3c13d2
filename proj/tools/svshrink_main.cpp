// Command-line front end: denoise a CSV matrix, run Monte Carlo benchmarks,
// estimate the universal threshold, and export criterion surfaces and
// shrinkage curves. Exit codes: 0 success, 1 computation error, 2 usage error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include <svshrink/svshrink.hpp>

namespace {

using namespace svshrink;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DenoiseOptions {
  std::string in_path, out_path, report_path;
  std::string method = "atn";
  std::string select = "fixed";
  std::optional<double> tau, gamma, sigma;
  std::optional<Index> rank;
  bool center = false;
  std::uint64_t seed = 0;
  int nsim = 1000;
};

double required(const std::optional<double>& v, const char* flag, const char* why) {
  if (!v) throw UsageError(std::string("missing ") + flag + " (" + why + ")");
  return *v;
}

/// Resolves the noise level for selection rules that need one: --sigma wins,
/// otherwise the median-calibrated estimate.
std::pair<double, const char*> resolve_sigma(const DenoiseOptions& opt,
                                             const SpectralDecomposition& dec) {
  if (opt.sigma) {
    if (!(*opt.sigma > 0.0)) throw UsageError("--sigma must be > 0");
    return {*opt.sigma, "given"};
  }
  return {estimate_sigma(dec.lambdas, dec.n_rows, dec.n_cols), "estimated"};
}

int run_denoise(const DenoiseOptions& opt) {
  Matrix x = parse_matrix_csv(opt.in_path);

  Eigen::RowVectorXd col_means;
  if (opt.center) {
    col_means = x.colwise().mean();
    x.rowwise() -= col_means;
  }
  const auto dec = decompose(x);

  DenoiseReport report;
  report.n_rows = dec.n_rows;
  report.n_cols = dec.n_cols;
  report.method = opt.method;
  report.select = opt.select;
  report.output_path = opt.out_path;

  Vector d_hat;
  const bool atn_like = opt.method == "atn" || opt.method == "soft";
  if (atn_like && opt.select != "fixed") {
    SelectionRule rule;
    if (opt.select == "gsure") {
      rule.kind = SelectionRule::Kind::Gsure;
      report.sigma_source = "n/a";
    } else if (opt.select == "sure" || opt.select == "universal") {
      const auto [sigma, source] = resolve_sigma(opt, dec);
      rule.sigma2 = sigma * sigma;
      report.sigma = sigma;
      report.sigma_source = source;
      if (opt.select == "universal") {
        rule.kind = SelectionRule::Kind::UniversalSure;
        rule.universal_tau =
            universal_threshold(dec.n_rows, dec.n_cols, sigma, opt.nsim, opt.seed,
                                static_cast<int>(std::thread::hardware_concurrency()))
                .tau_universal;
      } else {
        rule.kind = SelectionRule::Kind::Sure;
      }
    } else {
      throw UsageError("unknown --select '" + opt.select + "'");
    }
    SelectionGrid grid = default_grid(dec.lambdas);
    if (opt.method == "soft") grid.gamma_values = {1.0};
    const auto sel = grid_select(dec, rule, grid);
    d_hat = atn(dec.lambdas, sel.tau, sel.gamma);
    report.tau = sel.tau;
    report.gamma = sel.gamma;
    report.criterion = sel.best.criterion;
  } else if (opt.method == "atn") {
    const double tau = required(opt.tau, "--tau", "atn with --select fixed");
    const double gamma = opt.gamma.value_or(1.0);
    d_hat = atn(dec.lambdas, tau, gamma);
    report.tau = tau;
    report.gamma = gamma;
    report.sigma_source = "n/a";
  } else if (opt.method == "soft") {
    const double tau = required(opt.tau, "--tau", "soft with --select fixed");
    d_hat = soft(dec.lambdas, tau);
    report.tau = tau;
    report.gamma = 1.0;
    report.sigma_source = "n/a";
  } else if (opt.method == "tsvd-rank") {
    if (!opt.rank) throw UsageError("missing --rank (tsvd-rank)");
    d_hat = hard_by_rank(dec.lambdas, *opt.rank);
    report.sigma_source = "n/a";
  } else if (opt.method == "tsvd-tau") {
    double tau;
    if (opt.tau) {
      tau = *opt.tau;
      report.sigma_source = "n/a";
    } else {
      const auto [sigma, source] = resolve_sigma(opt, dec);
      tau = optimal_hard_coefficient(aspect_ratio(dec.n_rows, dec.n_cols)) *
            std::sqrt(static_cast<double>(std::max(dec.n_rows, dec.n_cols))) * sigma;
      report.sigma = sigma;
      report.sigma_source = source;
    }
    d_hat = hard_by_threshold(dec.lambdas, tau);
    report.tau = tau;
  } else if (opt.method == "os") {
    const auto [sigma, source] = resolve_sigma(opt, dec);
    d_hat = optimal_shrink(dec.lambdas, dec.n_rows, dec.n_cols, sigma);
    report.sigma = sigma;
    report.sigma_source = source;
  } else if (opt.method == "two-step") {
    if (!opt.rank) throw UsageError("missing --rank (two-step)");
    const auto [sigma, source] = resolve_sigma(opt, dec);
    d_hat = two_step_spiked(dec.lambdas, *opt.rank, dec.n_rows, dec.n_cols, sigma);
    report.sigma = sigma;
    report.sigma_source = source;
  } else {
    throw UsageError("unknown --method '" + opt.method + "'");
  }

  Matrix w_hat = reconstruct(dec, d_hat);
  if (opt.center) w_hat.rowwise() += col_means;

  report.d_hat = d_hat;
  report.estimated_rank = estimated_rank(d_hat);
  write_matrix_csv(w_hat, opt.out_path);
  if (!opt.report_path.empty()) write_report(report, opt.report_path);

  std::cout << "rank " << report.estimated_rank;
  if (report.tau) std::cout << "  tau " << format_g17(*report.tau);
  if (report.gamma) std::cout << "  gamma " << format_g17(*report.gamma);
  std::cout << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Matrix denoising by singular-value shrinkage"};
  app.require_subcommand(1);

  DenoiseOptions dn;
  auto* denoise = app.add_subcommand("denoise", "Denoise a CSV matrix");
  denoise->add_option("--in", dn.in_path, "Input matrix CSV")->required();
  denoise->add_option("--out", dn.out_path, "Output matrix CSV")->required();
  denoise->add_option("--report", dn.report_path, "Report JSON path");
  denoise->add_option("--method", dn.method,
                      "tsvd-rank|tsvd-tau|soft|atn|os|two-step");
  denoise->add_option("--select", dn.select, "fixed|sure|gsure|universal");
  denoise->add_option("--tau", dn.tau, "Fixed threshold");
  denoise->add_option("--gamma", dn.gamma, "Fixed shrink exponent (>= 1)");
  denoise->add_option("--rank", dn.rank, "Rank for tsvd-rank/two-step");
  denoise->add_option("--sigma", dn.sigma, "Known noise level");
  denoise->add_flag("--center", dn.center, "Subtract column means first");
  denoise->add_option("--seed", dn.seed, "Seed for the universal threshold");
  denoise->add_option("--nsim", dn.nsim, "Universal threshold simulations");

  std::string bm_config, bm_out, bm_records;
  int bm_threads = static_cast<int>(std::thread::hardware_concurrency());
  std::optional<std::uint64_t> bm_seed;
  auto* benchmark = app.add_subcommand("benchmark", "Run a Monte Carlo scenario");
  benchmark->add_option("--config", bm_config, "Scenario config file")->required();
  benchmark->add_option("--out", bm_out, "Summary CSV path")->required();
  benchmark->add_option("--records", bm_records, "Optional per-replicate CSV path");
  benchmark->add_option("--threads", bm_threads, "Worker threads");
  benchmark->add_option("--seed", bm_seed, "Override the config master seed");

  Index ut_n = 0, ut_p = 0;
  double ut_sigma = 1.0;
  int ut_nsim = 1000;
  std::uint64_t ut_seed = 0;
  auto* universal = app.add_subcommand("universal-threshold",
                                       "Monte Carlo universal threshold");
  universal->add_option("--n", ut_n, "Rows")->required();
  universal->add_option("--p", ut_p, "Cols")->required();
  universal->add_option("--sigma", ut_sigma, "Noise level")->required();
  universal->add_option("--nsim", ut_nsim, "Simulations");
  universal->add_option("--seed", ut_seed, "Seed");

  std::string sf_in, sf_rule = "gsure", sf_out, sf_truth;
  std::optional<double> sf_sigma;
  auto* surface = app.add_subcommand("surface", "Export a criterion surface");
  surface->add_option("--in", sf_in, "Input matrix CSV")->required();
  surface->add_option("--rule", sf_rule, "sure|gsure");
  surface->add_option("--sigma", sf_sigma, "Known noise level (sure)");
  surface->add_option("--out", sf_out, "Surface CSV path")->required();
  surface->add_option("--truth", sf_truth,
                      "Optional true signal CSV; adds a loss column");

  std::vector<std::string> cv_specs;
  double cv_lambda_max = 0.0;
  int cv_points = 256;
  std::string cv_out;
  auto* curves = app.add_subcommand("curves", "Export shrinkage curves");
  curves->add_option("--spec", cv_specs, "soft:tau=..|hard:tau=..|atn:tau=..,gamma=..|os:sigma=..,n=..,p=..|two-step:c=..")
      ->required();
  curves->add_option("--lambda-max", cv_lambda_max, "Upper end of the range")
      ->required();
  curves->add_option("--points", cv_points, "Samples per curve");
  curves->add_option("--out", cv_out, "Curves CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (*denoise) return run_denoise(dn);

    if (*benchmark) {
      ScenarioConfig cfg = parse_scenario_config(bm_config);
      if (bm_seed) cfg.master_seed = *bm_seed;
      if (cfg.estimators.empty()) {
        std::cerr << "note: config lists no estimators; summary will be empty\n";
      }
      const auto records = run_scenario(cfg, std::max(1, bm_threads));
      write_summary_csv(summarize(records), bm_out);
      if (!bm_records.empty()) write_records_csv(records, bm_records);
      return 0;
    }

    if (*universal) {
      const auto table = universal_threshold(
          ut_n, ut_p, ut_sigma, ut_nsim, ut_seed,
          static_cast<int>(std::thread::hardware_concurrency()));
      std::cout << format_g17(table.tau_universal) << "\n";
      return 0;
    }

    if (*surface) {
      const Matrix x = parse_matrix_csv(sf_in);
      const auto dec = decompose(x);
      SelectionRule rule;
      if (sf_rule == "gsure") {
        rule.kind = SelectionRule::Kind::Gsure;
      } else if (sf_rule == "sure") {
        rule.kind = SelectionRule::Kind::Sure;
        const double sigma =
            sf_sigma ? *sf_sigma : estimate_sigma(dec.lambdas, dec.n_rows, dec.n_cols);
        if (!(sigma > 0.0)) throw UsageError("--sigma must be > 0");
        rule.sigma2 = sigma * sigma;
      } else {
        throw UsageError("unknown --rule '" + sf_rule + "'");
      }
      std::optional<Matrix> truth;
      if (!sf_truth.empty()) truth = parse_matrix_csv(sf_truth);
      const auto table = export_surface(dec, rule, default_grid(dec.lambdas),
                                        truth ? &*truth : nullptr);
      write_surface_csv(table, sf_out);
      const auto& best = table.points[table.min_criterion_index];
      std::cout << "tau " << format_g17(best.tau) << "  gamma "
                << format_g17(best.gamma) << "\n";
      return 0;
    }

    if (*curves) {
      if (!(cv_lambda_max > 0.0)) throw UsageError("--lambda-max must be > 0");
      if (cv_points < 2) throw UsageError("--points must be >= 2");
      std::vector<CurveSpec> specs;
      for (const auto& text : cv_specs) {
        specs.push_back({text, parse_shrinker_spec(text)});
      }
      std::vector<double> range(static_cast<std::size_t>(cv_points));
      for (int i = 0; i < cv_points; ++i) {
        range[static_cast<std::size_t>(i)] =
            cv_lambda_max * static_cast<double>(i) / (cv_points - 1);
      }
      write_curves_csv(export_shrinker_curves(specs, range), cv_out);
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
