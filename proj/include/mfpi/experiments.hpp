#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfpi/cdf_models.hpp"
#include "mfpi/dataset.hpp"
#include "mfpi/pi_methods.hpp"
#include "mfpi/random.hpp"

namespace mfpi {

/// Execution knobs that never change results.
struct RunOptions {
  unsigned threads = 1;
  /// Wall-clock time is left out of reports unless asked for, so that
  /// repeated runs produce identical files.
  bool record_runtime = false;
};

// ---------------------------------------------------------------------------
// Synthetic model: X ~ Unif(0,1), Y = sin(pi X) + sigma sqrt(1 + 2X) eps, eps ~ t_5.

Dataset gen_synthetic(std::size_t n, double sigma, std::uint64_t seed);

double synthetic_mean(double x);
double synthetic_scale(double x, double sigma);
/// One response drawn at covariate x.
double draw_synthetic_response(double x, double sigma, Rng& rng);

/// The true conditional law of the synthetic model.
std::shared_ptr<const AnalyticCdfModel> synthetic_true_model(double sigma);

enum class Profile { desk, paper, custom };

std::string_view to_string(Profile profile);
Profile parse_profile(std::string_view name);

struct SyntheticConfig {
  std::size_t n = 400;
  double sigma = 0.2;
  double alpha = 0.05;
  std::size_t K = 200;
  std::size_t M = 3000;
  std::size_t B = 1000;
  double x_f = 0.5;
  EstimatorKind estimator = EstimatorKind::kernel;
  std::vector<Method> methods{Method::qe, Method::mfb, Method::cp};
  std::uint64_t seed = 1;
  Profile profile = Profile::paper;
  Functional predictor = Functional::mean;
  Scheme scheme = Scheme::random_regressor;
  Variant variant = Variant::standard;
  CpMode cp_mode = CpMode::automatic;

  /// K=100, M=1000, B=500.
  static SyntheticConfig desk();
  /// K=200, M=3000, B=1000.
  static SyntheticConfig paper();
  static SyntheticConfig for_profile(Profile profile);

  void validate() const;
};

struct MethodCoverage {
  std::string name;
  std::vector<double> cvp;
  double cvp_mean = 0.0;
  double cvp_var = 0.0;
  double mean_length = 0.0;
  /// Interval endpoints per dataset.
  std::vector<double> lower;
  std::vector<double> upper;
};

struct CoverageReport {
  SyntheticConfig config;
  std::vector<MethodCoverage> methods;
  /// Datasets redrawn because some interval construction failed.
  std::size_t redrawn = 0;
  std::optional<double> runtime_s;

  const MethodCoverage& method(std::string_view name) const;
};

/// Methods as run inside the coverage study.
MethodSpec coverage_method_spec(const SyntheticConfig& cfg, Method method);

/// Per dataset attempts before an interval failure is fatal.
inline constexpr int kCoverageAttempts = 3;

CoverageReport estimate_cvp(const SyntheticConfig& cfg, const RunOptions& run = {});

std::vector<std::size_t> default_sweep_sizes();

/// One report per (n, estimator), every method inside each report.
std::vector<CoverageReport> sweep_sample_sizes(const SyntheticConfig& base,
                                               std::span<const std::size_t> n_list,
                                               std::span<const EstimatorKind> estimators,
                                               const RunOptions& run = {});

// ---------------------------------------------------------------------------
// Reports

nlohmann::json config_to_json(const SyntheticConfig& cfg);
SyntheticConfig config_from_json(const nlohmann::json& j);
nlohmann::json report_to_json(const CoverageReport& report);

/// Columns n, estimator, method, coverage_mean, coverage_var_scaled, mean_length.
/// The variance column is Var(CVP) multiplied by n.
std::string figure_csv(std::span<const CoverageReport> reports);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// ---------------------------------------------------------------------------
// Value-at-risk backtest on intraday returns.

struct ReturnsSeries {
  /// Seconds since the epoch (UTC); strictly increasing.
  std::vector<std::int64_t> timestamps;
  std::vector<double> returns;
  /// Trading-day index per return; empty when the data carries no sessions.
  std::vector<std::int64_t> session;
  std::string symbol;
  std::string bar_interval;

  bool has_sessions() const { return !session.empty(); }
};

/// Parses "YYYY-MM-DD", "YYYY-MM-DDTHH:MM[:SS]" with an optional "Z"; a space
/// may replace the "T". Returns seconds since the epoch.
std::int64_t parse_iso8601(std::string_view text);

/// Header `timestamp,price` (log-returns are computed) or `timestamp,log_return`.
/// Timestamps with a time of day mark intraday bars; their calendar date is
/// the session.
ReturnsSeries load_returns_csv(const std::filesystem::path& path);

inline constexpr std::size_t kSessionTrimBars = 5;

/// Drops the first and last 5 returns of every session.
ReturnsSeries trim_sessions(const ReturnsSeries& series);

double realized_volatility(std::span<const double> block);
/// min over j of the cumulative sum of the first j returns.
double worst_cumulative_return(std::span<const double> block);

struct VarPair {
  double V = 0.0;
  double T = 0.0;
  std::size_t k = 0;
  /// 0-based index of the first return in the V block; T covers the m
  /// returns that follow it.
  std::size_t start = 0;
};

/// Pairs anchored at t = (2k+1)m (1-based): V from X_{t-m+1..t}, T from
/// X_{t+1..t+m}. Sessions are trimmed first when present. Requires m >= 2 and
/// at least 4m returns after trimming.
std::vector<VarPair> build_var_pairs(const ReturnsSeries& series, std::size_t m);

/// Heteroscedastic synthetic returns X_t = s_t Z_t with
/// s_t = scale (1 + amplitude sin(2 pi t / period)) and Z_t a t_5 draw scaled
/// to unit variance.
struct HeteroReturnsConfig {
  std::size_t length = 10000;
  double scale = 0.01;
  double amplitude = 0.6;
  double period = 1200.0;
  std::uint64_t seed = 1;
};

double hetero_scale(const HeteroReturnsConfig& cfg, std::size_t t);
ReturnsSeries gen_hetero_returns(const HeteroReturnsConfig& cfg);

/// Lower alpha-bound of T for pair `pair_index`.
using OracleBound = std::function<double(std::size_t pair_index, double alpha)>;

/// Monte Carlo quantile of T given the generator's known scale path.
OracleBound hetero_oracle(const HeteroReturnsConfig& cfg, std::span<const VarPair> pairs,
                          std::size_t m, std::size_t paths = 4000);

struct VarBacktestConfig {
  std::size_t m = 10;
  std::vector<double> alphas{0.01, 0.05, 0.1};
  std::size_t window = 34;
  /// Any of QE, MFB-L1, MFB-L2, CP, oracle.
  std::vector<std::string> methods{"QE", "MFB-L1", "MFB-L2", "CP"};
  EstimatorSpec estimator;
  std::size_t B = 500;
  std::uint64_t seed = 1;
};

struct VarRow {
  double alpha = 0.0;
  std::string method;
  std::size_t tests = 0;
  std::size_t accepts = 0;
  /// Test points where the interval could not be built (e.g. V outside the
  /// training support).
  std::size_t skipped = 0;
  double acceptance_rate = 0.0;
};

struct VarBacktestResult {
  VarBacktestConfig config;
  std::size_t pairs = 0;
  bool trimmed = false;
  std::vector<VarRow> rows;

  const VarRow& row(double alpha, std::string_view method) const;
};

/// Rolling backtest: each test pair t >= window is predicted from the `window`
/// pairs before it, and the realized T is accepted iff T >= VaR_pred.
VarBacktestResult var_backtest(std::span<const VarPair> pairs, const VarBacktestConfig& cfg,
                               const OracleBound& oracle = {}, const RunOptions& run = {});

nlohmann::json var_config_to_json(const VarBacktestConfig& cfg);
nlohmann::json var_report_to_json(const VarBacktestResult& result);

}  // namespace mfpi
