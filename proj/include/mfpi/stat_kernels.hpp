#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>

namespace mfpi {

/// Covariate weight kernel w. Both are symmetric densities with bounded support.
enum class WeightKind { epanechnikov, gaussian_truncated };

/// Response smoother K. `step` is the h0 -> 0 limit 1(v > 0) + 0.5 * 1(v == 0),
/// which turns the kernel estimator into a locally weighted empirical CDF.
enum class CdfKind { gaussian_cdf, integrated_epanechnikov, step };

struct KernelSpec {
  WeightKind weight = WeightKind::epanechnikov;
  CdfKind cdf = CdfKind::gaussian_cdf;
};

/// Truncation point of the gaussian-truncated weight kernel.
inline constexpr double kGaussianTruncation = 3.0;

double kernel_weight(double u, const KernelSpec& spec);

/// Radius of the weight kernel's support.
double weight_support(const KernelSpec& spec);

double smooth_cdf(double v, const KernelSpec& spec);
/// Derivative of smooth_cdf in v (0 for the step kind).
double smooth_pdf(double v, const KernelSpec& spec);

/// Quantile (check) loss r * (tau - 1(r < 0)).
double check_loss(double r, double tau);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// One-sample Kolmogorov-Smirnov test against Unif(0,1), asymptotic p-value.
KsResult ks_uniform_test(std::span<const double> sample);

/// Survival function of the Kolmogorov distribution, P(K > lambda).
double kolmogorov_survival(double lambda);

double normal_cdf(double z);
double normal_quantile(double p);

double t_pdf(double t, int df);
double t_cdf(double t, int df);

/// Student-t quantile for integer degrees of freedom.
double t_quantile(double p, int df);

/// Lower empirical quantile: the ceil(p * B)-th order statistic (1-based).
double empirical_quantile(std::span<const double> values, double p);

std::string_view to_string(WeightKind kind);
std::string_view to_string(CdfKind kind);
WeightKind parse_weight_kind(std::string_view name);
CdfKind parse_cdf_kind(std::string_view name);

}  // namespace mfpi
