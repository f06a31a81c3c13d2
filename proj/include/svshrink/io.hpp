#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "svshrink/errors.hpp"
#include "svshrink/shrinkers.hpp"
#include "svshrink/simbench.hpp"
#include "svshrink/spectral.hpp"

namespace svshrink {

/// 17 significant digits: enough for an exact double round trip in text.
inline std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

inline double parse_double(std::string_view token, const std::string& where) {
  const auto t = trim(token);
  double value = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size()) {
    throw ParseError(where + ": not a number: '" + std::string(t) + "'");
  }
  if (!std::isfinite(value)) {
    throw ParseError(where + ": non-finite value '" + std::string(t) + "'");
  }
  return value;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ComputationError("cannot open for writing: " + path);
  return out;
}

}  // namespace detail

/// Header-less rectangular numeric CSV -> row-major matrix. Rejects ragged
/// rows, non-numeric cells and non-finite values with the offending line
/// number in the message.
inline Matrix parse_matrix_csv(std::istream& in, const std::string& label) {
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    std::vector<double> row;
    std::string_view rest(line);
    const std::string where = label + ":" + std::to_string(line_no);
    while (true) {
      const auto comma = rest.find(',');
      row.push_back(detail::parse_double(rest.substr(0, comma), where));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError(where + ": expected " + std::to_string(rows.front().size()) +
                       " columns, got " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(label + ": empty matrix file");

  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return m;
}

inline Matrix parse_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open matrix file: " + path);
  return parse_matrix_csv(in, path);
}

inline void write_matrix_csv(const Matrix& m, std::ostream& out) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ',';
      out << format_g17(m(i, j));
    }
    out << '\n';
  }
}

inline void write_matrix_csv(const Matrix& m, const std::string& path) {
  auto out = detail::open_out(path);
  write_matrix_csv(m, out);
  if (!out) throw ComputationError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Denoise report (JSON, fixed key order).

struct DenoiseReport {
  Index n_rows = 0;
  Index n_cols = 0;
  std::string method;
  std::string select;
  std::optional<double> tau;
  std::optional<double> gamma;
  std::string sigma_source = "n/a";  // "given" | "estimated" | "n/a"
  std::optional<double> sigma;
  Index estimated_rank = 0;
  std::optional<double> criterion;
  Vector d_hat;
  std::string output_path;
};

inline void write_report(const DenoiseReport& report, const std::string& path) {
  nlohmann::ordered_json j;
  j["rows"] = report.n_rows;
  j["cols"] = report.n_cols;
  j["method"] = report.method;
  j["select"] = report.select;
  j["tau"] = report.tau ? nlohmann::ordered_json(*report.tau)
                        : nlohmann::ordered_json(nullptr);
  j["gamma"] = report.gamma ? nlohmann::ordered_json(*report.gamma)
                            : nlohmann::ordered_json(nullptr);
  j["sigma_source"] = report.sigma_source;
  j["sigma"] = report.sigma ? nlohmann::ordered_json(*report.sigma)
                            : nlohmann::ordered_json(nullptr);
  j["estimated_rank"] = report.estimated_rank;
  j["criterion"] = report.criterion ? nlohmann::ordered_json(*report.criterion)
                                    : nlohmann::ordered_json(nullptr);
  j["d_hat"] = std::vector<double>(report.d_hat.data(),
                                   report.d_hat.data() + report.d_hat.size());
  j["output_path"] = report.output_path;

  auto out = detail::open_out(path);
  out << j.dump(2) << '\n';
  if (!out) throw ComputationError("write failed: " + path);
}

inline DenoiseReport read_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open report file: " + path);
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  DenoiseReport r;
  r.n_rows = j.at("rows").get<Index>();
  r.n_cols = j.at("cols").get<Index>();
  r.method = j.at("method").get<std::string>();
  r.select = j.at("select").get<std::string>();
  if (!j.at("tau").is_null()) r.tau = j["tau"].get<double>();
  if (!j.at("gamma").is_null()) r.gamma = j["gamma"].get<double>();
  r.sigma_source = j.at("sigma_source").get<std::string>();
  if (!j.at("sigma").is_null()) r.sigma = j["sigma"].get<double>();
  r.estimated_rank = j.at("estimated_rank").get<Index>();
  if (!j.at("criterion").is_null()) r.criterion = j["criterion"].get<double>();
  const auto d = j.at("d_hat").get<std::vector<double>>();
  r.d_hat = Eigen::Map<const Vector>(d.data(), static_cast<Index>(d.size()));
  r.output_path = j.at("output_path").get<std::string>();
  return r;
}

// ---------------------------------------------------------------------------
// Scenario config: flat key=value lines, repeated keys for lists, full-line
// '#' comments.

inline ScenarioConfig parse_scenario_config(std::istream& in, const std::string& label) {
  ScenarioConfig cfg;
  cfg.snr_values.clear();
  cfg.estimators.clear();
  std::string line;
  int line_no = 0;
  bool saw_replicates = false;
  std::string signal_csv;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const std::string where = label + ":" + std::to_string(line_no);
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(where + ": expected key=value, got '" + std::string(t) + "'");
    }
    const std::string key(detail::trim(t.substr(0, eq)));
    const std::string value(detail::trim(t.substr(eq + 1)));
    if (value.empty()) throw ParseError(where + ": empty value for '" + key + "'");

    auto as_long = [&](long lo, long hi) {
      long v = 0;
      const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
      if (res.ec != std::errc{} || res.ptr != value.data() + value.size()) {
        throw ParseError(where + ": not an integer: '" + value + "'");
      }
      if (v < lo || v > hi) throw ParseError(where + ": '" + key + "' out of range");
      return v;
    };

    if (key == "n_rows") {
      cfg.n_rows = as_long(1, 1000000);
    } else if (key == "n_cols") {
      cfg.n_cols = as_long(1, 1000000);
    } else if (key == "true_rank") {
      cfg.true_rank = as_long(1, 1000000);
    } else if (key == "snr") {
      cfg.snr_values.push_back(detail::parse_double(value, where));
    } else if (key == "noise") {
      if (value == "gaussian") {
        cfg.noise = NoiseFamily::Gaussian;
      } else if (value == "student5") {
        cfg.noise = NoiseFamily::Student5;
      } else {
        throw ParseError(where + ": noise must be 'gaussian' or 'student5'");
      }
    } else if (key == "replicates") {
      cfg.n_replicates = static_cast<int>(as_long(1, 1000000));
      saw_replicates = true;
    } else if (key == "estimator") {
      make_estimator(value);  // throws on unknown names
      cfg.estimators.push_back(value);
    } else if (key == "seed") {
      cfg.master_seed = static_cast<std::uint64_t>(as_long(0, std::numeric_limits<long>::max()));
    } else if (key == "universal_nsim") {
      cfg.universal_nsim = static_cast<int>(as_long(100, 1000000));
    } else if (key == "signal_csv") {
      signal_csv = value;
    } else {
      throw ParseError(where + ": unknown key '" + key + "'");
    }
  }
  if (cfg.snr_values.empty()) throw ParseError(label + ": no snr values given");
  if (!saw_replicates) throw ParseError(label + ": missing replicates");
  if (!signal_csv.empty()) {
    // a user matrix replaces the synthetic signal: its rank-true_rank
    // truncation (unit energy) is the ground truth for every replicate
    const Matrix m = parse_matrix_csv(signal_csv);
    auto sig = std::make_shared<SignalGroundTruth>(
        signal_from_matrix(m, cfg.true_rank));
    cfg.n_rows = sig->w.rows();
    cfg.n_cols = sig->w.cols();
    cfg.true_rank = sig->true_rank;
    cfg.fixed_signal = std::move(sig);
  }
  return cfg;
}

inline ScenarioConfig parse_scenario_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file: " + path);
  return parse_scenario_config(in, path);
}

// ---------------------------------------------------------------------------
// Tabular outputs.

inline void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& out) {
  out << "estimator,R,snr,mean_mse,sd_mse,mean_rank,sd_rank\n";
  for (const auto& r : rows) {
    out << r.estimator << ',' << r.true_rank << ',' << format_g17(r.snr) << ','
        << format_g17(r.mean_mse) << ',' << format_g17(r.sd_mse) << ','
        << format_g17(r.mean_rank) << ',' << format_g17(r.sd_rank) << '\n';
  }
}

inline void write_summary_csv(const std::vector<SummaryRow>& rows,
                              const std::string& path) {
  auto out = detail::open_out(path);
  write_summary_csv(rows, out);
  if (!out) throw ComputationError("write failed: " + path);
}

inline void write_records_csv(const std::vector<ReplicateRecord>& records,
                              const std::string& path) {
  auto out = detail::open_out(path);
  out << "scenario,R,snr,replicate,estimator,ok,relative_mse,estimated_rank,"
         "tau,gamma,wall_time_ms,error\n";
  for (const auto& r : records) {
    out << r.scenario << ',' << r.true_rank << ',' << format_g17(r.snr) << ','
        << r.replicate << ',' << r.estimator << ',' << (r.ok ? 1 : 0) << ','
        << format_g17(r.relative_mse) << ',' << r.estimated_rank << ','
        << format_g17(r.tau) << ',' << format_g17(r.gamma) << ','
        << format_g17(r.wall_time_ms) << ',' << r.error << '\n';
  }
  if (!out) throw ComputationError("write failed: " + path);
}

inline void write_surface_csv(const SurfaceTable& table, std::ostream& out) {
  out << (table.has_loss ? "tau,gamma,criterion,loss\n" : "tau,gamma,criterion\n");
  for (const auto& pt : table.points) {
    out << format_g17(pt.tau) << ',' << format_g17(pt.gamma) << ','
        << format_g17(pt.criterion);
    if (table.has_loss) out << ',' << format_g17(pt.loss);
    out << '\n';
  }
}

inline void write_surface_csv(const SurfaceTable& table, const std::string& path) {
  auto out = detail::open_out(path);
  write_surface_csv(table, out);
  if (!out) throw ComputationError("write failed: " + path);
}

inline void write_curves_csv(const std::vector<CurvePoint>& rows,
                             const std::string& path) {
  auto out = detail::open_out(path);
  out << "lambda,spec,d_hat\n";
  for (const auto& r : rows) {
    out << format_g17(r.lambda) << ',' << r.spec << ',' << format_g17(r.d_hat) << '\n';
  }
  if (!out) throw ComputationError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Shrinker spec strings for the curves subcommand:
//   soft:tau=T | hard:tau=T | atn:tau=T,gamma=G | os:sigma=S,n=N,p=P |
//   two-step:c=C

inline ShrinkerSpec parse_shrinker_spec(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name(detail::trim(text.substr(0, colon)));
  std::map<std::string, double> kv;
  if (colon != std::string::npos) {
    std::string_view rest(text);
    rest.remove_prefix(colon + 1);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const auto item = detail::trim(rest.substr(0, comma));
      const auto eq = item.find('=');
      if (eq == std::string_view::npos) {
        throw ParseError("shrinker spec '" + text + "': expected key=value");
      }
      kv[std::string(detail::trim(item.substr(0, eq)))] =
          detail::parse_double(item.substr(eq + 1), "shrinker spec '" + text + "'");
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
  }
  auto need = [&](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end()) {
      throw ParseError("shrinker spec '" + text + "': missing '" + key + "'");
    }
    return it->second;
  };

  if (name == "soft") return SoftSpec{need("tau")};
  if (name == "hard") return HardThresholdSpec{need("tau")};
  if (name == "atn") return AtnSpec{need("tau"), need("gamma")};
  if (name == "os") {
    return OptimalShrinkSpec{static_cast<Index>(need("n")),
                             static_cast<Index>(need("p")), need("sigma")};
  }
  if (name == "two-step") return TwoStepSpec{0, need("c")};
  throw ParseError("shrinker spec '" + text + "': unknown shrinker '" + name + "'");
}

}  // namespace svshrink
