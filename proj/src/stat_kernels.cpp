#include "mfpi/stat_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfpi {
namespace {

constexpr double kPi = std::numbers::pi;

// Normalizing mass of the standard normal on [-3, 3].
const double kTruncatedMass = std::erf(kGaussianTruncation / std::numbers::sqrt2);

// Continued fraction for the regularized incomplete beta (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return std::exp(log_front) * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - std::exp(log_front) * beta_continued_fraction(b, a, 1.0 - x) / b;
}

// Lower-tail t probability P(T <= -|t|) without cancellation.
double t_lower_tail(double t, int df) {
  const double nu = df;
  const double x = nu / (nu + t * t);
  return 0.5 * incomplete_beta(0.5 * nu, 0.5, x);
}

// Hill (1970) approximation to the upper two-tailed t quantile, p2 = 2 * tail.
double hill_t_quantile(double p2, double nu) {
  const double a = 1.0 / (nu - 0.5);
  const double b = 48.0 / (a * a);
  double c = ((20700.0 * a / b - 98.0) * a - 16.0) * a + 96.36;
  const double d = ((94.5 / (b + c) - 3.0) / b + 1.0) * std::sqrt(a * kPi / 2.0) * nu;
  double y = std::pow(d * p2, 2.0 / nu);
  if (y > 0.05 + a) {
    const double x = normal_quantile(0.5 * p2);
    y = x * x;
    if (nu < 5.0) c += 0.3 * (nu - 4.5) * (x + 0.6);
    c = (((0.05 * d * x - 5.0) * x - 7.0) * x - 2.0) * x + b + c;
    y = (((((0.4 * y + 6.3) * y + 36.0) * y + 94.5) / c - y - 3.0) / b + 1.0) * x;
    y = std::expm1(a * y * y);
  } else {
    y = ((1.0 / (((nu + 6.0) / (nu * y) - 0.089 * d - 0.822) * (nu + 2.0) * 3.0) +
          0.5 / (nu + 4.0)) *
             y -
         1.0) *
            (nu + 1.0) / (nu + 2.0) +
        1.0 / y;
  }
  return std::sqrt(nu * y);
}

}  // namespace

double kernel_weight(double u, const KernelSpec& spec) {
  switch (spec.weight) {
    case WeightKind::epanechnikov:
      return std::fabs(u) < 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
    case WeightKind::gaussian_truncated:
      if (std::fabs(u) > kGaussianTruncation) return 0.0;
      return std::exp(-0.5 * u * u) / (std::sqrt(2.0 * kPi) * kTruncatedMass);
  }
  return 0.0;
}

double weight_support(const KernelSpec& spec) {
  return spec.weight == WeightKind::epanechnikov ? 1.0 : kGaussianTruncation;
}

double smooth_pdf(double v, const KernelSpec& spec) {
  switch (spec.cdf) {
    case CdfKind::gaussian_cdf:
      return std::exp(-0.5 * v * v) / std::sqrt(2.0 * kPi);
    case CdfKind::integrated_epanechnikov:
      return std::fabs(v) < 1.0 ? 0.75 * (1.0 - v * v) : 0.0;
    case CdfKind::step:
      return 0.0;
  }
  return 0.0;
}

double smooth_cdf(double v, const KernelSpec& spec) {
  switch (spec.cdf) {
    case CdfKind::gaussian_cdf:
      return normal_cdf(v);
    case CdfKind::integrated_epanechnikov:
      if (v <= -1.0) return 0.0;
      if (v >= 1.0) return 1.0;
      return 0.5 + 0.75 * (v - v * v * v / 3.0);
    case CdfKind::step:
      if (v > 0.0) return 1.0;
      if (v < 0.0) return 0.0;
      return 0.5;
  }
  return 0.0;
}

double check_loss(double r, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::domain_error("check_loss: tau must be in (0,1)");
  return r * (tau - (r < 0.0 ? 1.0 : 0.0));
}

double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    // Jacobi theta form of the CDF converges fast for small lambda.
    const double f = -kPi * kPi / (8.0 * lambda * lambda);
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
      const double term = std::exp(f * (2 * k - 1) * (2 * k - 1));
      sum += term;
      if (term < 1e-17 * sum) break;
    }
    const double cdf = std::sqrt(2.0 * kPi) / lambda * sum;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1) ? term : -term;
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_uniform_test(std::span<const double> sample) {
  if (sample.empty()) throw std::domain_error("ks_uniform_test: empty sample");
  std::vector<double> sorted(sample.begin(), sample.end());
  for (double u : sorted) {
    if (!(u >= 0.0 && u <= 1.0)) {
      throw std::domain_error("ks_uniform_test: value outside [0,1]: " + std::to_string(u));
    }
  }
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double above = static_cast<double>(i + 1) / n - sorted[i];
    const double below = sorted[i] - static_cast<double>(i) / n;
    d = std::max({d, above, below});
  }
  return {d, kolmogorov_survival(std::sqrt(n) * d)};
}

double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p must be in (0,1)");
  // Acklam's rational approximation followed by one Halley step.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Refine against the tail that does not cancel.
  const double e = (x < 0.0) ? normal_cdf(x) - p : (1.0 - p) - normal_cdf(-x);
  const double u = e * std::sqrt(2.0 * kPi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + x * u / 2.0);
}

double t_pdf(double t, int df) {
  if (df < 1) throw std::domain_error("t_pdf: df must be >= 1");
  const double nu = df;
  const double log_norm =
      std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * kPi);
  return std::exp(log_norm - 0.5 * (nu + 1.0) * std::log1p(t * t / nu));
}

double t_cdf(double t, int df) {
  if (df < 1) throw std::domain_error("t_cdf: df must be >= 1");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double tail = t_lower_tail(t, df);
  return t < 0.0 ? tail : 1.0 - tail;
}

double t_quantile(double p, int df) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("t_quantile: p must be in (0,1)");
  if (df < 1) throw std::domain_error("t_quantile: df must be >= 1");
  if (p == 0.5) return 0.0;
  if (df == 1) return std::tan(kPi * (p - 0.5));
  const double tail = std::min(p, 1.0 - p);
  const double sign = p < 0.5 ? -1.0 : 1.0;
  if (df == 2) {
    const double q = (2.0 * tail - 1.0) / std::sqrt(2.0 * tail * (1.0 - tail));
    return -sign * q;
  }
  // Newton on the lower tail, started from Hill's approximation.
  double q = -hill_t_quantile(2.0 * tail, df);
  for (int iter = 0; iter < 12; ++iter) {
    const double f = t_lower_tail(q, df) - tail;
    const double step = f / t_pdf(q, df);
    q -= step;
    if (q > 0.0) q = 0.0;
    if (std::fabs(step) <= 1e-14 * std::max(1.0, std::fabs(q))) break;
  }
  return sign * -q;
}

double empirical_quantile(std::span<const double> values, double p) {
  if (values.empty()) throw std::domain_error("empirical_quantile: empty input");
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("empirical_quantile: p must be in (0,1)");
  const std::size_t count = values.size();
  // p * B within 1e-9 of an integer is treated as that integer.
  const double raw = std::ceil(p * static_cast<double>(count) - 1e-9);
  const std::size_t rank = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(raw, 1.0)), 1, count);
  std::vector<double> scratch(values.begin(), values.end());
  std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                   scratch.end());
  return scratch[rank - 1];
}

std::string_view to_string(WeightKind kind) {
  return kind == WeightKind::epanechnikov ? "epanechnikov" : "gaussian-truncated";
}

std::string_view to_string(CdfKind kind) {
  switch (kind) {
    case CdfKind::gaussian_cdf: return "gaussian-cdf";
    case CdfKind::integrated_epanechnikov: return "integrated-epanechnikov";
    case CdfKind::step: return "step";
  }
  return "?";
}

WeightKind parse_weight_kind(std::string_view name) {
  if (name == "epanechnikov") return WeightKind::epanechnikov;
  if (name == "gaussian-truncated") return WeightKind::gaussian_truncated;
  throw std::invalid_argument("unknown weight kernel: " + std::string(name));
}

CdfKind parse_cdf_kind(std::string_view name) {
  if (name == "gaussian-cdf") return CdfKind::gaussian_cdf;
  if (name == "integrated-epanechnikov") return CdfKind::integrated_epanechnikov;
  if (name == "step") return CdfKind::step;
  throw std::invalid_argument("unknown cdf kernel: " + std::string(name));
}

}  // namespace mfpi
