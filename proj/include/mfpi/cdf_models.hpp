#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mfpi/dataset.hpp"
#include "mfpi/stat_kernels.hpp"

namespace mfpi {

/// Ranks are clipped to [kRankClip, 1 - kRankClip] so inversion never hits 0 or 1.
inline constexpr double kRankClip = 1e-6;

double clip_rank(double u);

/// The estimated conditional law F(.|x) at one fixed covariate.
class ConditionalLaw {
 public:
  virtual ~ConditionalLaw() = default;
  virtual double cdf(double y) const = 0;
  /// inf{ y : cdf(y) >= p }.
  virtual double quantile(double p) const = 0;
  /// Quantiles for ascending probabilities; implementations may share work.
  virtual void quantiles(std::span<const double> ascending_p, std::span<double> out) const;
  /// quantile(p), with `guess` as a starting point where the solver can use one.
  virtual double quantile_near(double p, double guess) const;
};

/// A fitted conditional CDF estimator. Immutable; safe to share across threads.
class ConditionalCdfModel {
 public:
  virtual ~ConditionalCdfModel() = default;
  /// Throws OutOfSupportError when the estimator has no mass at x.
  virtual std::unique_ptr<ConditionalLaw> at(std::span<const double> x) const = 0;
  virtual std::string describe() const = 0;
};

double cdf_eval(const ConditionalCdfModel& model, double y, std::span<const double> x);
double cdf_quantile(const ConditionalCdfModel& model, double p, std::span<const double> x);

// ---------------------------------------------------------------------------
// Kernel estimator:
//   F(y|x) = sum_i W_h(X_i, x) K((y - Y_i)/h0) / sum_i W_h(X_i, x)
// with product weights W_h(X_i, x) = prod_s w((X_is - x_s)/h).

class KernelCdfModel : public ConditionalCdfModel {
 public:
  KernelCdfModel(Dataset data, double h, double h0, KernelSpec spec);

  std::unique_ptr<ConditionalLaw> at(std::span<const double> x) const override;
  std::string describe() const override;

  double h() const { return h_; }
  double h0() const { return h0_; }
  const KernelSpec& spec() const { return spec_; }
  const Dataset& data() const { return data_; }

  /// Product-kernel weight between two covariate vectors (unnormalized).
  double weight(std::span<const double> a, std::span<const double> b) const;

  /// F(Y_i | X_i) computed without observation i (delete-one rank).
  double rank_excluding(std::size_t i) const;

 private:
  Dataset data_;
  double h_;
  double h0_;
  KernelSpec spec_;
  double y_min_;
  double y_max_;
};

KernelCdfModel fit_kernel_cdf(const Dataset& data, double h, double h0, const KernelSpec& spec);

// ---------------------------------------------------------------------------
// Quantile-regression estimator: linear conditional quantiles on a tau grid,
// rearranged per evaluation point, then F(y|x) = (1/J) sum_j 1(q_j(x) <= y).

std::vector<double> default_tau_grid();

class QrCdfModel : public ConditionalCdfModel {
 public:
  /// `coefficients[j]` is (intercept, slope_1, ..., slope_d) for tau_grid[j].
  QrCdfModel(std::vector<double> tau_grid, std::vector<std::vector<double>> coefficients);

  std::unique_ptr<ConditionalLaw> at(std::span<const double> x) const override;
  std::string describe() const override;

  const std::vector<double>& tau_grid() const { return tau_grid_; }
  const std::vector<std::vector<double>>& coefficients() const { return coefficients_; }
  /// Rearranged (sorted) quantile curve at x.
  std::vector<double> quantile_curve(std::span<const double> x) const;

 private:
  std::vector<double> tau_grid_;
  std::vector<std::vector<double>> coefficients_;
};

/// Fits one regression quantile per grid level. Requires n > d + 1.
/// `warm_start`, when given, supplies starting coefficients per level.
QrCdfModel fit_qr_cdf(const Dataset& data, std::vector<double> tau_grid = default_tau_grid(),
                      const QrCdfModel* warm_start = nullptr);

// ---------------------------------------------------------------------------
// Known conditional law supplied as functions (used as the oracle model).

class AnalyticCdfModel : public ConditionalCdfModel {
 public:
  using CdfFn = std::function<double(double y, std::span<const double> x)>;
  using QuantileFn = std::function<double(double p, std::span<const double> x)>;

  AnalyticCdfModel(std::string name, CdfFn cdf, QuantileFn quantile);

  std::unique_ptr<ConditionalLaw> at(std::span<const double> x) const override;
  std::string describe() const override { return name_; }

 private:
  std::string name_;
  CdfFn cdf_;
  QuantileFn quantile_;
};

/// N(mu, sigma^2) at every covariate.
std::shared_ptr<const AnalyticCdfModel> normal_model(double mu = 0.0, double sigma = 1.0);
/// Exp(rate) at every covariate.
std::shared_ptr<const AnalyticCdfModel> exponential_model(double rate = 1.0);

// ---------------------------------------------------------------------------
// Estimator family: how a model is fitted from data. Resampling methods refit
// with the same hyperparameters; bandwidths are fixed once by resolve_estimator.

enum class EstimatorKind { kernel, qr, oracle };

struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::kernel;
  KernelSpec kernel{};
  std::optional<double> h;
  std::optional<double> h0;
  /// Candidate bandwidths for KS selection; empty means the default relative grids.
  std::vector<double> h_grid;
  std::vector<double> h0_grid;
  /// Empty means default_tau_grid().
  std::vector<double> tau_grid;
  std::shared_ptr<const ConditionalCdfModel> oracle;
};

std::string_view to_string(EstimatorKind kind);
EstimatorKind parse_estimator_kind(std::string_view name);

/// Fills in bandwidths by KS selection when they are not fixed.
EstimatorSpec resolve_estimator(const EstimatorSpec& spec, const Dataset& data);

/// Fits a model from a resolved spec. A QR `warm` model seeds the solver.
std::shared_ptr<const ConditionalCdfModel> fit_model(const EstimatorSpec& resolved,
                                                     const Dataset& data,
                                                     const ConditionalCdfModel* warm = nullptr);

// ---------------------------------------------------------------------------
// Probability integral transform ranks.

enum class RankVariant { plugin, delete_one };

struct RankVector {
  std::vector<double> u;
  RankVariant variant = RankVariant::plugin;
};

/// plugin: U_i = F_n(Y_i|X_i); delete-one: U_i = F_n^(-i)(Y_i|X_i). Clipped.
RankVector pit_ranks(const EstimatorSpec& resolved, const Dataset& data, RankVariant variant);

// ---------------------------------------------------------------------------
// Bandwidth selection by KS uniformity of plug-in ranks.

struct BandwidthChoice {
  double h = 0.0;
  double h0 = 0.0;
  KsResult ks;
};

/// Default grids: {0.05, 0.10, ..., 0.50} times the covariate / response range
/// (a zero range is replaced by 1).
std::vector<double> default_h_grid(const Dataset& data);
std::vector<double> default_h0_grid(const Dataset& data);

/// Maximizes the KS p-value (ties: smaller KS statistic, then smaller h, then
/// smaller h0). Pairs that leave some design point without kernel mass are skipped.
BandwidthChoice select_bandwidths(const Dataset& data, std::span<const double> h_grid,
                                  std::span<const double> h0_grid, const KernelSpec& spec);

}  // namespace mfpi
