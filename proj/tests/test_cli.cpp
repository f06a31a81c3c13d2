// End-to-end checks of the command-line tool: exit codes, file outputs and
// seed-level reproducibility, driven through the real binary.

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <svshrink/io.hpp>
#include <svshrink/simbench.hpp>

using namespace svshrink;

namespace {

namespace fs = std::filesystem;

struct RunResult {
  int exit_code = -1;
  std::string output;
};

RunResult run_cli(const std::string& args) {
  const auto out_path = fs::temp_directory_path() / "svshrink_cli_out.txt";
  const std::string cmd = std::string(SVSHRINK_CLI_PATH) + " " + args + " > " +
                          out_path.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(out_path);
  std::stringstream buf;
  buf << in.rdbuf();
  result.output = buf.str();
  return result;
}

fs::path scratch_dir() {
  const auto dir = fs::temp_directory_path() / "svshrink_cli_test";
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("denoise happy path with a report") {
  const auto dir = scratch_dir();
  const auto in_csv = (dir / "x.csv").string();
  const auto out_csv = (dir / "w.csv").string();
  const auto report_json = (dir / "r.json").string();

  const auto signal = generate_signal(30, 40, 3, 1);
  const auto sample = add_noise(signal.w, 2.0, NoiseFamily::Gaussian, 2);
  write_matrix_csv(sample.x, in_csv);

  const auto res = run_cli("denoise --in " + in_csv + " --out " + out_csv +
                           " --report " + report_json +
                           " --method atn --select gsure");
  INFO(res.output);
  REQUIRE(res.exit_code == 0);

  const Matrix w_hat = parse_matrix_csv(out_csv);
  CHECK(w_hat.rows() == 30);
  CHECK(w_hat.cols() == 40);
  CHECK(relative_mse(w_hat, signal.w) < relative_mse(sample.x, signal.w));

  const auto report = read_report(report_json);
  CHECK(report.method == "atn");
  CHECK(report.select == "gsure");
  CHECK(report.estimated_rank == estimated_rank(report.d_hat));
  CHECK(report.tau.has_value());
}

TEST_CASE("denoise soft with fixed tau and centering") {
  const auto dir = scratch_dir();
  const auto in_csv = (dir / "x2.csv").string();
  const auto out_csv = (dir / "w2.csv").string();
  Matrix x = Matrix::Ones(6, 4) * 10.0;  // constant columns survive --center
  write_matrix_csv(x, in_csv);
  const auto res = run_cli("denoise --in " + in_csv + " --out " + out_csv +
                           " --method soft --select fixed --tau 1000 --center");
  INFO(res.output);
  REQUIRE(res.exit_code == 0);
  const Matrix w_hat = parse_matrix_csv(out_csv);
  CHECK((w_hat - x).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("denoise covers the remaining method branches") {
  const auto dir = scratch_dir();
  const auto in_csv = (dir / "x3.csv").string();
  const auto out_csv = (dir / "w3.csv").string();
  const auto report_json = (dir / "r3.json").string();
  const auto signal = generate_signal(40, 60, 4, 21);
  const auto sample = add_noise(signal.w, 2.0, NoiseFamily::Gaussian, 22);
  write_matrix_csv(sample.x, in_csv);
  const std::string io_args =
      " --in " + in_csv + " --out " + out_csv + " --report " + report_json;

  SECTION("optimal shrinkage with estimated sigma") {
    const auto res = run_cli("denoise" + io_args + " --method os");
    INFO(res.output);
    REQUIRE(res.exit_code == 0);
    CHECK(read_report(report_json).sigma_source == "estimated");
  }
  SECTION("two-step with oracle rank and known sigma") {
    const auto res = run_cli("denoise" + io_args +
                             " --method two-step --rank 4 --sigma " +
                             format_g17(sample.sigma));
    INFO(res.output);
    REQUIRE(res.exit_code == 0);
    const auto report = read_report(report_json);
    CHECK(report.sigma_source == "given");
    CHECK(report.estimated_rank <= 4);
  }
  SECTION("tsvd-tau via the known-sigma coefficient rule") {
    const auto res = run_cli("denoise" + io_args +
                             " --method tsvd-tau --sigma " +
                             format_g17(sample.sigma));
    REQUIRE(res.exit_code == 0);
    CHECK(read_report(report_json).tau.has_value());
  }
  SECTION("atn with the universal threshold") {
    const auto res = run_cli("denoise" + io_args +
                             " --method atn --select universal --sigma " +
                             format_g17(sample.sigma) +
                             " --nsim 200 --seed 3");
    REQUIRE(res.exit_code == 0);
    const auto report = read_report(report_json);
    CHECK(report.select == "universal");
    CHECK(report.estimated_rank == 4);
  }
}

TEST_CASE("universal-threshold prints the same value twice") {
  const std::string args = "universal-threshold --n 40 --p 60 --sigma 2 "
                           "--nsim 200 --seed 7";
  const auto a = run_cli(args);
  const auto b = run_cli(args);
  REQUIRE(a.exit_code == 0);
  CHECK(a.output == b.output);
  CHECK(std::stod(a.output) > 0.0);
}

TEST_CASE("benchmark end to end from a config file") {
  const auto dir = scratch_dir();
  const auto cfg_path = (dir / "scenario.cfg").string();
  const auto out_path = (dir / "summary.csv").string();
  const auto rec_path = (dir / "records.csv").string();
  std::ofstream cfg(cfg_path);
  cfg << "n_rows=20\nn_cols=30\ntrue_rank=2\nsnr=2\nreplicates=3\n"
         "estimator=tsvd-rank\nestimator=atn-gsure\nseed=5\n";
  cfg.close();

  const auto res = run_cli("benchmark --config " + cfg_path + " --out " + out_path +
                           " --records " + rec_path + " --threads 2");
  INFO(res.output);
  REQUIRE(res.exit_code == 0);

  std::ifstream in(out_path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "estimator,R,snr,mean_mse,sd_mse,mean_rank,sd_rank");
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 2);  // one per estimator at the single snr

  std::ifstream rec(rec_path);
  std::getline(rec, header);
  int rec_rows = 0;
  while (std::getline(rec, line)) {
    if (!line.empty()) ++rec_rows;
  }
  CHECK(rec_rows == 6);  // 3 replicates x 2 estimators
}

TEST_CASE("surface export with a truth column") {
  const auto dir = scratch_dir();
  const auto in_csv = (dir / "xs.csv").string();
  const auto truth_csv = (dir / "ws.csv").string();
  const auto out_csv = (dir / "surface.csv").string();
  const auto signal = generate_signal(25, 35, 2, 11);
  const auto sample = add_noise(signal.w, 2.0, NoiseFamily::Gaussian, 12);
  write_matrix_csv(sample.x, in_csv);
  write_matrix_csv(signal.w, truth_csv);

  const auto res = run_cli("surface --in " + in_csv + " --rule gsure --out " +
                           out_csv + " --truth " + truth_csv);
  INFO(res.output);
  REQUIRE(res.exit_code == 0);
  std::ifstream in(out_csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == "tau,gamma,criterion,loss");

  const auto res2 = run_cli("surface --in " + in_csv + " --rule sure --sigma " +
                            format_g17(sample.sigma) + " --out " + out_csv);
  REQUIRE(res2.exit_code == 0);
  std::ifstream in2(out_csv);
  std::getline(in2, header);
  CHECK(header == "tau,gamma,criterion");
}

TEST_CASE("curves export") {
  const auto dir = scratch_dir();
  const auto out_csv = (dir / "curves.csv").string();
  const auto res = run_cli(
      "curves --spec soft:tau=1 --spec atn:tau=1,gamma=8 --lambda-max 4 "
      "--points 64 --out " + out_csv);
  INFO(res.output);
  REQUIRE(res.exit_code == 0);
  std::ifstream in(out_csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == "lambda,spec,d_hat");
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 128);
}

TEST_CASE("exit codes distinguish usage from computation errors") {
  // unknown flag -> usage error (2)
  CHECK(run_cli("denoise --bogus").exit_code == 2);
  // missing required input -> usage error (2)
  CHECK(run_cli("denoise --in only.csv").exit_code == 2);
  // missing rank for tsvd-rank -> usage error (2)
  const auto dir = scratch_dir();
  const auto in_csv = (dir / "xr.csv").string();
  write_matrix_csv(Matrix::Identity(3, 3), in_csv);
  CHECK(run_cli("denoise --in " + in_csv + " --out " + (dir / "o.csv").string() +
                " --method tsvd-rank")
            .exit_code == 2);
  // malformed data -> computation error (1)
  const auto bad_csv = (dir / "bad.csv").string();
  std::ofstream bad(bad_csv);
  bad << "1,2\n3\n";
  bad.close();
  const auto res = run_cli("denoise --in " + bad_csv + " --out " +
                           (dir / "o2.csv").string() + " --method atn --select gsure");
  CHECK(res.exit_code == 1);
  CHECK(res.output.find("bad.csv:2") != std::string::npos);
}
