#include <catch2/catch_amalgamated.hpp>

#include <svshrink/simbench.hpp>

#include "test_support.hpp"

using namespace svshrink;

TEST_CASE("signal generation") {
  SECTION("deterministic per seed, unit energy, exact rank") {
    const auto a = generate_signal(20, 50, 4, 7);
    const auto b = generate_signal(20, 50, 4, 7);
    CHECK(a.w == b.w);
    CHECK(a.true_rank == 4);
    CHECK(a.singular_values.size() == 4);
    CHECK(a.w.squaredNorm() == Catch::Approx(1.0).margin(1e-10));
    CHECK(estimated_rank(decompose(a.w).lambdas) == 4);
  }
  SECTION("full-rank case") {
    const auto sig = generate_signal(8, 12, 8, 9);
    CHECK(estimated_rank(decompose(sig.w).lambdas) == 8);
  }
  SECTION("energy normalization over many draws") {
    std::vector<double> energies;
    for (int r = 0; r < 1000; ++r) {
      energies.push_back(generate_signal(10, 15, 3, 10000 + r).w.squaredNorm());
    }
    const double mean = test_support::mean_of(energies);
    CHECK(mean >= 0.95);
    CHECK(mean <= 1.05);
  }
  CHECK_THROWS_AS(generate_signal(10, 15, 11, 1), ValidationError);
  CHECK_THROWS_AS(generate_signal(10, 15, 0, 1), ValidationError);
}

TEST_CASE("user matrices as ground truth") {
  // a full-rank matrix with a planted strong rank-2 part
  const Matrix m = 5.0 * generate_signal(15, 20, 2, 33).w +
                   0.01 * test_support::gaussian_matrix(15, 20, 34);
  const auto sig = signal_from_matrix(m, 2);
  CHECK(sig.true_rank == 2);
  CHECK(sig.w.squaredNorm() == Catch::Approx(1.0).margin(1e-12));
  CHECK(estimated_rank(decompose(sig.w).lambdas) == 2);
  CHECK(sig.singular_values.size() == 2);
  CHECK_THROWS_AS(signal_from_matrix(m, 0), ValidationError);
  CHECK_THROWS_AS(signal_from_matrix(Matrix::Zero(4, 5), 2), ValidationError);

  SECTION("scenario runs against the fixed signal") {
    ScenarioConfig cfg;
    cfg.n_rows = 15;
    cfg.n_cols = 20;
    cfg.true_rank = 2;
    cfg.snr_values = {4.0};
    cfg.n_replicates = 3;
    cfg.estimators = {"tsvd-rank"};
    cfg.master_seed = 35;
    cfg.fixed_signal = std::make_shared<SignalGroundTruth>(sig);
    const auto records = run_scenario(cfg);
    REQUIRE(records.size() == 3);
    for (const auto& rec : records) {
      CHECK(rec.ok);
      CHECK(rec.scenario == "15x20-r2-gaussian-user");
      CHECK(rec.relative_mse < 0.5);  // strong signal, oracle rank
    }
    // replicates share the signal but draw fresh noise
    CHECK(records[0].relative_mse != records[1].relative_mse);

    cfg.true_rank = 3;  // disagrees with the fixed signal
    CHECK_THROWS_AS(run_scenario(cfg), ValidationError);
  }
}

TEST_CASE("noise injection") {
  const auto sig = generate_signal(200, 500, 10, 21);

  SECTION("sigma follows 1/(snr sqrt(NP))") {
    const auto sample = add_noise(sig.w, 4.0, NoiseFamily::Gaussian, 22);
    CHECK(sample.sigma ==
          Catch::Approx(1.0 / (4.0 * std::sqrt(100000.0))).epsilon(1e-15));
  }
  SECTION("empirical variance within 5% for both families") {
    for (auto family : {NoiseFamily::Gaussian, NoiseFamily::Student5}) {
      const auto sample = add_noise(sig.w, 1.0, family, 23);
      const Matrix e = sample.x - sig.w;
      const double var = e.squaredNorm() / (200.0 * 500.0);
      CHECK(var == Catch::Approx(sample.sigma * sample.sigma).epsilon(0.05));
    }
  }
  SECTION("student noise has positive excess kurtosis") {
    const auto sample = add_noise(sig.w, 1.0, NoiseFamily::Student5, 24);
    const Matrix e = sample.x - sig.w;
    const double m2 = e.array().square().mean();
    const double m4 = e.array().square().square().mean();
    CHECK(m4 / (m2 * m2) - 3.0 > 0.5);
  }
  CHECK_THROWS_AS(add_noise(sig.w, 0.0, NoiseFamily::Gaussian, 1), ValidationError);
}

TEST_CASE("scenario execution") {
  ScenarioConfig cfg;
  cfg.n_rows = 20;
  cfg.n_cols = 30;
  cfg.true_rank = 2;
  cfg.snr_values = {2.0};
  cfg.n_replicates = 1;
  cfg.estimators = {"tsvd-rank"};
  cfg.master_seed = 5;

  SECTION("one replicate, one estimator, one record") {
    const auto records = run_scenario(cfg);
    REQUIRE(records.size() == 1);
    CHECK(records[0].ok);
    CHECK(records[0].estimator == "tsvd-rank");
    CHECK(records[0].estimated_rank == 2);
    CHECK(records[0].relative_mse >= 0.0);
  }
  SECTION("empty registry produces no records and no error") {
    cfg.estimators.clear();
    CHECK(run_scenario(cfg).empty());
  }
  SECTION("unknown estimator is rejected up front") {
    cfg.estimators = {"nope"};
    CHECK_THROWS_AS(run_scenario(cfg), ValidationError);
  }
  SECTION("an estimator failure is recorded and the run continues") {
    // a 1 x P data matrix has a single singular value; the median-based
    // noise estimate needs at least two and must fail
    cfg.n_rows = 1;
    cfg.true_rank = 1;
    cfg.estimators = {"os-median", "tsvd-rank"};
    const auto records = run_scenario(cfg);
    REQUIRE(records.size() == 2);
    CHECK_FALSE(records[0].ok);
    CHECK(!records[0].error.empty());
    CHECK(records[1].ok);
  }
  SECTION("records are identical for any thread count") {
    cfg.n_replicates = 4;
    cfg.snr_values = {1.0, 2.0};
    cfg.estimators = {"atn-gsure", "tsvd-median"};
    const auto seq = run_scenario(cfg, 1);
    const auto par = run_scenario(cfg, 4);
    REQUIRE(seq.size() == par.size());
    for (std::size_t i = 0; i < seq.size(); ++i) {
      CHECK(seq[i].estimator == par[i].estimator);
      CHECK(seq[i].snr == par[i].snr);
      CHECK(seq[i].replicate == par[i].replicate);
      CHECK(seq[i].ok == par[i].ok);
      CHECK(seq[i].relative_mse == par[i].relative_mse);
      CHECK(seq[i].estimated_rank == par[i].estimated_rank);
    }
  }
}

TEST_CASE("summaries") {
  auto record = [](const char* est, double snr, double mse, double rank) {
    ReplicateRecord r;
    r.estimator = est;
    r.snr = snr;
    r.true_rank = 3;
    r.ok = true;
    r.relative_mse = mse;
    r.estimated_rank = static_cast<Index>(rank);
    return r;
  };

  SECTION("identical records have zero sd") {
    const auto rows = summarize({record("a", 1, 0.25, 3), record("a", 1, 0.25, 3)});
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].mean_mse == 0.25);
    CHECK(rows[0].sd_mse == 0.0);
    CHECK(rows[0].n == 2);
  }
  SECTION("two-point mean and sd") {
    const auto rows = summarize({record("a", 1, 0.1, 2), record("a", 1, 0.3, 4)});
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].mean_mse == Catch::Approx(0.2).margin(1e-15));
    CHECK(rows[0].sd_mse == Catch::Approx(std::sqrt(0.02)).epsilon(1e-12));
    CHECK(rows[0].mean_rank == 3.0);
  }
  SECTION("cells without two successes are dropped") {
    auto bad = record("b", 1, 0.5, 1);
    bad.ok = false;
    const auto rows = summarize({record("a", 1, 0.1, 2), record("a", 1, 0.2, 2),
                                 bad, record("b", 1, 0.5, 1)});
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].estimator == "a");
  }
}

TEST_CASE("criterion surface export") {
  const auto signal = generate_signal(30, 45, 3, 81);
  const auto sample = add_noise(signal.w, 2.0, NoiseFamily::Gaussian, 82);
  const auto dec = decompose(sample.x);

  SECTION("single-point grid is its own minimizer") {
    SelectionRule rule;
    rule.kind = SelectionRule::Kind::Gsure;
    SelectionGrid grid;
    grid.tau_values = {dec.lambdas(5)};
    grid.gamma_values = {2.0};
    const auto table = export_surface(dec, rule, grid, &signal.w);
    REQUIRE(table.points.size() == 1);
    CHECK(table.min_criterion_index == 0);
    CHECK(table.min_loss_index == 0);
    CHECK(table.has_loss);
  }
  SECTION("beyond lambda_1 the loss equals the signal energy") {
    SelectionRule rule;
    rule.kind = SelectionRule::Kind::Sure;
    rule.sigma2 = sample.sigma * sample.sigma;
    SelectionGrid grid;
    grid.tau_values = {dec.lambdas(0) * 1.5};
    grid.gamma_values = {1.0, 8.0};
    const auto table = export_surface(dec, rule, grid, &signal.w);
    for (const auto& pt : table.points) {
      CHECK(pt.loss == Catch::Approx(signal.w.squaredNorm()).epsilon(1e-10));
    }
  }
}

TEST_CASE("criterion and loss minimizers sit in the same grid region") {
  // strong-signal regime: the blind criterion surface tracks the true loss
  const auto signal = generate_signal(200, 500, 10, 404);
  const auto sample = add_noise(signal.w, 1.0, NoiseFamily::Gaussian, 405);
  const auto dec = decompose(sample.x);
  SelectionRule rule;
  rule.kind = SelectionRule::Kind::Gsure;
  const auto grid = default_grid(dec.lambdas);
  const auto table = export_surface(dec, rule, grid, &signal.w);

  const auto n_gamma = grid.gamma_values.size();
  const auto crit_tau = table.min_criterion_index / n_gamma;
  const auto crit_gamma = table.min_criterion_index % n_gamma;
  const auto loss_tau = table.min_loss_index / n_gamma;
  const auto loss_gamma = table.min_loss_index % n_gamma;
  CHECK(std::abs(static_cast<long>(crit_tau) - static_cast<long>(loss_tau)) <= 1);
  CHECK(std::abs(static_cast<long>(crit_gamma) - static_cast<long>(loss_gamma)) <= 1);
}

TEST_CASE("blind GSURE tracks sigma-known SURE at scale") {
  // strong general-rank signal: the two criteria pick (tau, gamma) pairs
  // whose relative MSEs agree to the third decimal
  for (int rep = 0; rep < 5; ++rep) {
    const auto signal = generate_signal(200, 500, 100, 660 + rep);
    const auto sample = add_noise(signal.w, 4.0, NoiseFamily::Gaussian, 680 + rep);
    const auto dec = decompose(sample.x);
    const auto grid = default_grid(dec.lambdas);

    SelectionRule gsure;
    gsure.kind = SelectionRule::Kind::Gsure;
    const auto g = grid_select(dec, gsure, grid);

    SelectionRule sure;
    sure.kind = SelectionRule::Kind::Sure;
    sure.sigma2 = sample.sigma * sample.sigma;
    const auto s = grid_select(dec, sure, grid);

    const double mse_g =
        relative_mse(reconstruct(dec, atn(dec.lambdas, g.tau, g.gamma)), signal.w);
    const double mse_s =
        relative_mse(reconstruct(dec, atn(dec.lambdas, s.tau, s.gamma)), signal.w);
    CHECK(std::abs(mse_g - mse_s) <= 0.001);
    CHECK(mse_g == Catch::Approx(0.037).margin(0.004));
  }
}

TEST_CASE("soft behavior is selected in the undetectable regime") {
  const auto signal = generate_signal(200, 500, 100, 550);
  const auto sample = add_noise(signal.w, 0.5, NoiseFamily::Gaussian, 551);
  const auto dec = decompose(sample.x);
  SelectionRule rule;
  rule.kind = SelectionRule::Kind::Sure;
  rule.sigma2 = sample.sigma * sample.sigma;
  const auto sel = grid_select(dec, rule, default_grid(dec.lambdas));
  CHECK(sel.gamma == 1.0);
}

TEST_CASE("shrinkage curve export") {
  std::vector<CurveSpec> specs = {{"atn1", AtnSpec{1.5, 1.0}},
                                  {"soft", SoftSpec{1.5}},
                                  {"atn8", AtnSpec{1.5, 8.0}}};
  std::vector<double> range;
  for (int i = 0; i <= 100; ++i) range.push_back(4.0 * i / 100.0);
  const auto rows = export_shrinker_curves(specs, range);
  REQUIRE(rows.size() == specs.size() * range.size());

  for (std::size_t i = 0; i < range.size(); ++i) {
    const auto& atn1 = rows[i];
    const auto& soft_row = rows[range.size() + i];
    const auto& atn8 = rows[2 * range.size() + i];
    CHECK(atn1.d_hat == soft_row.d_hat);  // gamma = 1 is soft thresholding
    if (atn8.lambda <= 1.5) {
      CHECK(atn8.d_hat == 0.0);
    } else {
      CHECK(atn8.d_hat > 0.0);
      CHECK(atn8.d_hat <= atn8.lambda);
    }
  }
  CHECK_THROWS_AS(export_shrinker_curves(specs, {}), ValidationError);
}
