#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mfpi/cdf_models.hpp"
#include "mfpi/dataset.hpp"

namespace mfpi {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// two: finite both ends. lower: (-inf, c]. upper: [c, +inf).
enum class Side { two, lower, upper };

enum class Method { qe, cp, mfb, t_iid, t_ls };

std::string_view to_string(Side side);
std::string_view to_string(Method method);
Side parse_side(std::string_view name);
Method parse_method(std::string_view name);

struct PredictionInterval {
  double lower = -kInf;
  double upper = kInf;
  double level = 0.95;
  Method method = Method::qe;
  Side side = Side::two;
  std::optional<double> center;

  /// Closed on both ends.
  bool contains(double y) const { return y >= lower && y <= upper; }
  double length() const { return upper - lower; }
};

// ---------------------------------------------------------------------------
// Point prediction

enum class Functional { mean, median };

std::string_view to_string(Functional f);
Functional parse_functional(std::string_view name);

inline constexpr std::size_t kMeanGrid = 512;

/// Midpoint levels (k + 0.5) / 512 averaged by the mean functional.
std::span<const double> mean_tau_grid();

double point_predict(const ConditionalLaw& law, Functional functional);
double point_predict(const ConditionalCdfModel& model, std::span<const double> x_f,
                     Functional functional);

// ---------------------------------------------------------------------------
// Quantile estimation

PredictionInterval qe_interval(const ConditionalCdfModel& model, std::span<const double> x_f,
                               double alpha, Side side = Side::two);

// ---------------------------------------------------------------------------
// Distributional conformal prediction

enum class CpMode { automatic, exact, rank_approx };

std::string_view to_string(CpMode mode);
CpMode parse_cp_mode(std::string_view name);

/// Default: 200 points spanning the response range padded by 10% per side.
struct CpGrid {
  std::size_t points = 200;
  double pad = 0.1;
  /// Explicit candidates; overrides `points` / `pad` when nonempty.
  std::vector<double> values;
};

struct CpOptions {
  CpMode mode = CpMode::automatic;
  CpGrid grid;
  unsigned threads = 1;
};

/// Scores compare with this slack so that ties survive rounding.
inline constexpr double kScoreTieTolerance = 1e-12;

/// (1/(n+1)) * #{i <= n+1 : V_i >= V_{n+1}} with V_{n+1} = candidate.
double conformal_p_value(std::span<const double> scores, double candidate);

/// Rank-approx on kernel models with n >= 200, exact otherwise.
CpMode resolve_cp_mode(CpMode mode, const EstimatorSpec& resolved, std::size_t n);

std::vector<double> cp_candidates(const Dataset& data, const CpGrid& grid);

struct CpResult {
  PredictionInterval interval;
  CpMode mode = CpMode::exact;
  std::vector<double> candidates;
  std::vector<double> p_values;
};

/// `estimator` must be resolved (bandwidths fixed). Throws CpEmptyError when
/// no candidate is accepted.
CpResult cp_interval(const Dataset& data, std::span<const double> x_f, double alpha,
                     const EstimatorSpec& estimator, Side side = Side::two,
                     const CpOptions& options = {});

// ---------------------------------------------------------------------------
// Model-free bootstrap

enum class Scheme { random_regressor, fixed_regressor };
enum class Variant { standard, limit, predictive };

std::string_view to_string(Scheme scheme);
std::string_view to_string(Variant variant);
Scheme parse_scheme(std::string_view name);
Variant parse_variant(std::string_view name);

struct MfbOptions {
  Functional predictor = Functional::mean;
  Scheme scheme = Scheme::random_regressor;
  Variant variant = Variant::standard;
  std::size_t B = 1000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

/// Redraws per replicate when the refit has no mass at x_f.
inline constexpr int kMfbMaxRedraws = 10;
/// Fraction of replicates allowed to fail after redraws.
inline constexpr double kMfbFailureShare = 0.05;

struct RootSample {
  double center = 0.0;
  /// R*_f = Y*_f - Yhat*_f for each successful replicate.
  std::vector<double> roots;
  /// Y*_f and Yhat*_f, aligned with `roots`.
  std::vector<double> future_draws;
  std::vector<double> refit_predictions;
  std::size_t B = 0;
  Scheme scheme = Scheme::random_regressor;
  Variant variant = Variant::standard;
  std::size_t redraws = 0;
  std::size_t failed = 0;
};

struct MfbResult {
  PredictionInterval interval;
  RootSample sample;
};

/// `estimator` must be resolved. Throws BootstrapError when more than 5% of
/// replicates fail at x_f after redraws.
MfbResult mfb_interval(const Dataset& data, std::span<const double> x_f, double alpha,
                       const EstimatorSpec& estimator, const MfbOptions& options,
                       Side side = Side::two);

// ---------------------------------------------------------------------------
// Gaussian baselines

/// mean +- t_{n-1} * sd * sqrt(1 + 1/n).
PredictionInterval baseline_t_interval(std::span<const double> y, double alpha);

/// Least squares with an intercept column; df = n - (d + 1).
PredictionInterval baseline_ls_interval(const Dataset& data, std::span<const double> x_f,
                                        double alpha);

// ---------------------------------------------------------------------------
// One entry point used by the experiments, conjecture tests and CLI.

struct MethodSpec {
  Method method = Method::qe;
  EstimatorSpec estimator;
  CpOptions cp;
  MfbOptions mfb;
  /// Short identifier such as "MFB-kernel" used in reports.
  std::string label() const;
};

/// Resolves the estimator on `data` and builds the interval. `seed` replaces
/// the MFB seed.
PredictionInterval build_interval(const MethodSpec& spec, const Dataset& data,
                                  std::span<const double> x_f, double alpha, Side side,
                                  std::uint64_t seed);

}  // namespace mfpi
