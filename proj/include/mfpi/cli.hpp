#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mfpi::cli {

/// Exit codes: 0 success, 1 runtime failure, 2 usage error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

struct RunConfig {
  std::string command;

  // predict / conjecture
  std::string data;
  std::vector<double> xf;
  double alpha = 0.05;
  std::string method = "qe";
  std::string estimator = "kernel";
  std::string side = "two";
  std::optional<double> h;
  std::optional<double> h0;
  std::string weight_kernel = "epanechnikov";
  std::string cdf_kernel = "gaussian-cdf";
  std::string predictor = "mean";
  std::string scheme = "random-regressor";
  std::string variant = "standard";
  std::string cp_mode = "auto";
  std::optional<std::size_t> B;
  std::string null_kind = "point";
  double y0 = 0.0;

  // simulate-coverage / sweep
  std::string profile = "desk";
  std::size_t n = 400;
  double sigma = 0.2;
  std::optional<std::size_t> K;
  std::optional<std::size_t> M;
  std::vector<std::string> methods{"qe", "mfb", "cp"};
  std::vector<std::size_t> n_list{50, 100, 150, 200, 250, 300, 350, 400};
  std::vector<std::string> estimators{"kernel", "qr"};
  std::string json_dir;
  bool record_runtime = false;

  // var-backtest
  std::string returns;
  std::size_t synthetic_length = 0;
  std::size_t m = 10;
  std::vector<double> alphas{0.01, 0.05, 0.1};
  std::size_t window = 34;
  std::vector<std::string> var_methods{"QE", "MFB-L1", "MFB-L2", "CP"};

  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string out;
};

struct ParseResult {
  std::optional<RunConfig> config;
  /// Set when parsing ended without a config (help or usage error).
  int exit_code = kExitOk;
  std::string message;
};

ParseResult parse_args(int argc, const char* const* argv);

/// Executes a parsed command; prints a one-line summary to `out` and
/// diagnostics to `err`.
int run(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// parse_args + run, with usage errors reported on `err`.
int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mfpi::cli
