#include "mfpi/cdf_models.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mfpi/errors.hpp"

namespace mfpi {
namespace {

// Beyond this many h0 the gaussian smoother is 0 or 1 to double precision.
constexpr double kGaussianCutoff = 8.5;

std::string format_point(std::span<const double> x) {
  std::ostringstream out;
  out.precision(10);
  out << '(';
  for (std::size_t s = 0; s < x.size(); ++s) out << (s ? ", " : "") << x[s];
  out << ')';
  return out.str();
}

class KernelLaw final : public ConditionalLaw {
 public:
  KernelLaw(std::vector<std::pair<double, double>> points, double h0, CdfKind kind, double lo,
            double hi)
      : h0_(h0), spec_{WeightKind::epanechnikov, kind}, lo_(lo), hi_(hi) {
    std::sort(points.begin(), points.end());
    double total = 0.0;
    for (const auto& [y, w] : points) total += w;
    ys_.reserve(points.size());
    ws_.reserve(points.size());
    prefix_.reserve(points.size() + 1);
    prefix_.push_back(0.0);
    for (const auto& [y, w] : points) {
      ys_.push_back(y);
      ws_.push_back(w / total);
      prefix_.push_back(prefix_.back() + w / total);
    }
    cutoff_ = (kind == CdfKind::gaussian_cdf) ? kGaussianCutoff * h0 : h0;
    const double range = hi_ - lo_;
    tol_ = 1e-8 * (range > 0.0 ? range : 1.0);
  }

  double cdf(double y) const override {
    if (std::isinf(y)) return y > 0 ? 1.0 : 0.0;
    if (spec_.cdf == CdfKind::step) {
      const auto k1 = std::lower_bound(ys_.begin(), ys_.end(), y) - ys_.begin();
      const auto k2 = std::upper_bound(ys_.begin(), ys_.end(), y) - ys_.begin();
      return std::min(1.0, prefix_[k1] + 0.5 * (prefix_[k2] - prefix_[k1]));
    }
    return cdf_and_pdf(y).first;
  }

  double quantile(double p) const override {
    if (spec_.cdf == CdfKind::step) return step_quantile(p);
    return solve(p, step_quantile(p));
  }

  void quantiles(std::span<const double> ascending_p, std::span<double> out) const override {
    double density = 0.0;
    for (std::size_t k = 0; k < ascending_p.size(); ++k) {
      const double p = ascending_p[k];
      if (spec_.cdf == CdfKind::step) {
        out[k] = step_quantile(p);
        continue;
      }
      double guess = step_quantile(p);
      if (k > 0) {
        guess = out[k - 1];
        if (density > 0.0) guess += (p - ascending_p[k - 1]) / density;
      }
      out[k] = solve(p, guess, &density);
    }
  }

  double quantile_near(double p, double guess) const override {
    if (spec_.cdf == CdfKind::step) return step_quantile(p);
    return solve(p, guess);
  }

 private:
  std::pair<double, double> cdf_and_pdf(double y) const {
    const auto k1 = std::lower_bound(ys_.begin(), ys_.end(), y - cutoff_) - ys_.begin();
    const auto k2 = std::upper_bound(ys_.begin(), ys_.end(), y + cutoff_) - ys_.begin();
    double sum = prefix_[k1];
    double density = 0.0;
    for (auto k = k1; k < k2; ++k) {
      const double v = (y - ys_[k]) / h0_;
      sum += ws_[k] * smooth_cdf(v, spec_);
      density += ws_[k] * smooth_pdf(v, spec_);
    }
    return {std::clamp(sum, 0.0, 1.0), density / h0_};
  }

  // Smallest y in [lo_, hi_] with cdf(y) >= p, to within tol_. Newton steps
  // from `guess` inside a shrinking bracket; bisection whenever a step leaves it.
  double solve(double p, double guess, double* density_out = nullptr) const {
    double lo = lo_;
    double hi = hi_;
    double y = std::clamp(guess, lo, hi);
    for (int iter = 0; iter < 200; ++iter) {
      const auto [f, density] = cdf_and_pdf(y);
      if (density_out) *density_out = density;
      const double g = f - p;
      if (g >= 0.0) {
        hi = y;
      } else {
        lo = y;
      }
      if (hi - lo <= tol_) break;
      double next = density > 0.0 ? y - g / density : std::nan("");
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - y) <= 0.5 * tol_) {
        // Converged from below: step just past the root.
        return g >= 0.0 ? y : std::min(y + tol_, hi_);
      }
      y = next;
    }
    return hi;
  }

  double step_quantile(double p) const {
    const auto it = std::lower_bound(prefix_.begin() + 1, prefix_.end(), p - 1e-12);
    if (it == prefix_.end()) return ys_.back();
    return ys_[static_cast<std::size_t>(it - prefix_.begin() - 1)];
  }

  std::vector<double> ys_;
  std::vector<double> ws_;
  std::vector<double> prefix_;
  double h0_;
  KernelSpec spec_;
  double lo_;
  double hi_;
  double cutoff_ = 0.0;
  double tol_ = 0.0;
};

constexpr double kQrTieTolerance = 1e-9;

class QrLaw final : public ConditionalLaw {
 public:
  explicit QrLaw(std::vector<double> sorted_q) : q_(std::move(sorted_q)) {}

  double cdf(double y) const override {
    // Fitted lines pass exactly through some observations; rounding must not
    // decide whether such a point sits on or above its own line.
    if (std::isinf(y)) return y > 0 ? 1.0 : 0.0;
    const double slack = kQrTieTolerance * std::max(1.0, std::abs(y));
    const auto count = std::upper_bound(q_.begin(), q_.end(), y + slack) - q_.begin();
    return static_cast<double>(count) / static_cast<double>(q_.size());
  }

  double quantile(double p) const override {
    const double levels = static_cast<double>(q_.size());
    const double raw = std::ceil(p * levels - 1e-9);
    const auto k = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(raw, 1.0)), 1, q_.size());
    return q_[k - 1];
  }

 private:
  std::vector<double> q_;
};

class AnalyticLaw final : public ConditionalLaw {
 public:
  AnalyticLaw(const AnalyticCdfModel::CdfFn& cdf, const AnalyticCdfModel::QuantileFn& quantile,
              std::vector<double> x)
      : cdf_(cdf), quantile_(quantile), x_(std::move(x)) {}

  double cdf(double y) const override { return cdf_(y, x_); }
  double quantile(double p) const override { return quantile_(p, x_); }

 private:
  const AnalyticCdfModel::CdfFn& cdf_;
  const AnalyticCdfModel::QuantileFn& quantile_;
  std::vector<double> x_;
};

std::vector<double> relative_grid(double range) {
  const double scale = range > 0.0 ? range : 1.0;
  std::vector<double> grid;
  for (int k = 1; k <= 10; ++k) grid.push_back(0.05 * k * scale);
  return grid;
}

}  // namespace

double clip_rank(double u) { return std::clamp(u, kRankClip, 1.0 - kRankClip); }

double ConditionalLaw::quantile_near(double p, double) const { return quantile(p); }

void ConditionalLaw::quantiles(std::span<const double> ascending_p, std::span<double> out) const {
  for (std::size_t k = 0; k < ascending_p.size(); ++k) out[k] = quantile(ascending_p[k]);
}

double cdf_eval(const ConditionalCdfModel& model, double y, std::span<const double> x) {
  return model.at(x)->cdf(y);
}

double cdf_quantile(const ConditionalCdfModel& model, double p, std::span<const double> x) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("cdf_quantile: p must be in (0,1)");
  return model.at(x)->quantile(p);
}

// ---------------------------------------------------------------------------

KernelCdfModel::KernelCdfModel(Dataset data, double h, double h0, KernelSpec spec)
    : data_(std::move(data)), h_(h), h0_(h0), spec_(spec) {
  if (!(h > 0.0) || !(h0 > 0.0)) {
    throw std::domain_error("kernel cdf: bandwidths must be positive");
  }
  y_min_ = data_.response_min();
  y_max_ = data_.response_max();
}

double KernelCdfModel::weight(std::span<const double> a, std::span<const double> b) const {
  double w = 1.0;
  for (std::size_t s = 0; s < a.size(); ++s) {
    w *= kernel_weight((a[s] - b[s]) / h_, spec_);
    if (w == 0.0) break;
  }
  return w;
}

std::unique_ptr<ConditionalLaw> KernelCdfModel::at(std::span<const double> x) const {
  if (x.size() != data_.dim()) throw std::domain_error("kernel cdf: covariate has wrong dimension");
  std::vector<std::pair<double, double>> points;
  double total = 0.0;
  for (std::size_t i = 0; i < data_.size(); ++i) {
    const double w = weight(data_.row(i), x);
    if (w > 0.0) {
      points.emplace_back(data_.response(i), w);
      total += w;
    }
  }
  if (!(total > 0.0)) {
    throw OutOfSupportError("out-of-support covariate " + format_point(x) +
                            ": no kernel mass within bandwidth h=" + std::to_string(h_));
  }
  return std::make_unique<KernelLaw>(std::move(points), h0_, spec_.cdf, y_min_ - 3.0 * h0_,
                                     y_max_ + 3.0 * h0_);
}

double KernelCdfModel::rank_excluding(std::size_t i) const {
  const auto xi = data_.row(i);
  const double yi = data_.response(i);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t j = 0; j < data_.size(); ++j) {
    if (j == i) continue;
    const double w = weight(data_.row(j), xi);
    if (w == 0.0) continue;
    num += w * smooth_cdf((yi - data_.response(j)) / h0_, spec_);
    den += w;
  }
  if (!(den > 0.0)) {
    throw OutOfSupportError("out-of-support covariate " + format_point(xi) +
                            " after deleting its own observation");
  }
  return num / den;
}

std::string KernelCdfModel::describe() const {
  std::ostringstream out;
  out << "kernel(h=" << h_ << ", h0=" << h0_ << ", w=" << to_string(spec_.weight)
      << ", K=" << to_string(spec_.cdf) << ')';
  return out.str();
}

KernelCdfModel fit_kernel_cdf(const Dataset& data, double h, double h0, const KernelSpec& spec) {
  return KernelCdfModel(data, h, h0, spec);
}

// ---------------------------------------------------------------------------

std::vector<double> default_tau_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 99; ++i) grid.push_back(0.01 * i);
  return grid;
}

QrCdfModel::QrCdfModel(std::vector<double> tau_grid, std::vector<std::vector<double>> coefficients)
    : tau_grid_(std::move(tau_grid)), coefficients_(std::move(coefficients)) {
  if (tau_grid_.empty() || tau_grid_.size() != coefficients_.size()) {
    throw std::domain_error("qr cdf: tau grid and coefficient table disagree");
  }
  for (std::size_t j = 0; j < tau_grid_.size(); ++j) {
    if (!(tau_grid_[j] > 0.0 && tau_grid_[j] < 1.0)) {
      throw std::domain_error("qr cdf: tau grid must lie in (0,1)");
    }
    if (j > 0 && !(tau_grid_[j] > tau_grid_[j - 1])) {
      throw std::domain_error("qr cdf: tau grid must be ascending");
    }
    if (coefficients_[j].size() != coefficients_.front().size() || coefficients_[j].empty()) {
      throw std::domain_error("qr cdf: ragged coefficient table");
    }
  }
}

std::vector<double> QrCdfModel::quantile_curve(std::span<const double> x) const {
  if (x.size() + 1 != coefficients_.front().size()) {
    throw std::domain_error("qr cdf: covariate has wrong dimension");
  }
  std::vector<double> q;
  q.reserve(coefficients_.size());
  for (const auto& beta : coefficients_) {
    double v = beta[0];
    for (std::size_t s = 0; s < x.size(); ++s) v += beta[s + 1] * x[s];
    q.push_back(v);
  }
  std::sort(q.begin(), q.end());
  return q;
}

std::unique_ptr<ConditionalLaw> QrCdfModel::at(std::span<const double> x) const {
  return std::make_unique<QrLaw>(quantile_curve(x));
}

std::string QrCdfModel::describe() const {
  return "qr(levels=" + std::to_string(tau_grid_.size()) + ")";
}

// ---------------------------------------------------------------------------

AnalyticCdfModel::AnalyticCdfModel(std::string name, CdfFn cdf, QuantileFn quantile)
    : name_(std::move(name)), cdf_(std::move(cdf)), quantile_(std::move(quantile)) {}

std::unique_ptr<ConditionalLaw> AnalyticCdfModel::at(std::span<const double> x) const {
  return std::make_unique<AnalyticLaw>(cdf_, quantile_, std::vector<double>(x.begin(), x.end()));
}

std::shared_ptr<const AnalyticCdfModel> normal_model(double mu, double sigma) {
  return std::make_shared<AnalyticCdfModel>(
      "normal",
      [mu, sigma](double y, std::span<const double>) { return normal_cdf((y - mu) / sigma); },
      [mu, sigma](double p, std::span<const double>) { return mu + sigma * normal_quantile(p); });
}

std::shared_ptr<const AnalyticCdfModel> exponential_model(double rate) {
  return std::make_shared<AnalyticCdfModel>(
      "exponential",
      [rate](double y, std::span<const double>) { return y <= 0.0 ? 0.0 : -std::expm1(-rate * y); },
      [rate](double p, std::span<const double>) { return -std::log1p(-p) / rate; });
}

// ---------------------------------------------------------------------------

std::string_view to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::kernel: return "kernel";
    case EstimatorKind::qr: return "qr";
    case EstimatorKind::oracle: return "oracle";
  }
  return "?";
}

EstimatorKind parse_estimator_kind(std::string_view name) {
  if (name == "kernel") return EstimatorKind::kernel;
  if (name == "qr") return EstimatorKind::qr;
  if (name == "oracle") return EstimatorKind::oracle;
  throw std::invalid_argument("unknown estimator: " + std::string(name));
}

EstimatorSpec resolve_estimator(const EstimatorSpec& spec, const Dataset& data) {
  EstimatorSpec out = spec;
  if (spec.kind == EstimatorKind::kernel && !spec.h0 &&
      data.response_max() == data.response_min()) {
    // Constant responses: the h0 -> 0 limit is the only sensible smoother.
    out.kernel.cdf = CdfKind::step;
    out.h0 = 1.0;
  }
  if (spec.kind == EstimatorKind::kernel && (!out.h || !out.h0)) {
    const std::vector<double> h_grid =
        out.h ? std::vector<double>{*out.h}
              : (spec.h_grid.empty() ? default_h_grid(data) : spec.h_grid);
    const std::vector<double> h0_grid =
        out.h0 ? std::vector<double>{*out.h0}
               : (spec.h0_grid.empty() ? default_h0_grid(data) : spec.h0_grid);
    const auto choice = select_bandwidths(data, h_grid, h0_grid, out.kernel);
    out.h = choice.h;
    out.h0 = choice.h0;
  }
  if (spec.kind == EstimatorKind::qr && out.tau_grid.empty()) out.tau_grid = default_tau_grid();
  if (spec.kind == EstimatorKind::oracle && !spec.oracle) {
    throw std::domain_error("oracle estimator requires a model");
  }
  return out;
}

std::shared_ptr<const ConditionalCdfModel> fit_model(const EstimatorSpec& resolved,
                                                     const Dataset& data,
                                                     const ConditionalCdfModel* warm) {
  switch (resolved.kind) {
    case EstimatorKind::kernel:
      if (!resolved.h || !resolved.h0) {
        throw std::domain_error("fit_model: kernel bandwidths not resolved");
      }
      return std::make_shared<KernelCdfModel>(data, *resolved.h, *resolved.h0, resolved.kernel);
    case EstimatorKind::qr:
      return std::make_shared<QrCdfModel>(
          fit_qr_cdf(data, resolved.tau_grid.empty() ? default_tau_grid() : resolved.tau_grid,
                     dynamic_cast<const QrCdfModel*>(warm)));
    case EstimatorKind::oracle:
      if (!resolved.oracle) throw std::domain_error("oracle estimator requires a model");
      return resolved.oracle;
  }
  throw std::logic_error("fit_model: unknown estimator");
}

// ---------------------------------------------------------------------------

RankVector pit_ranks(const EstimatorSpec& resolved, const Dataset& data, RankVariant variant) {
  const std::size_t n = data.size();
  if (variant == RankVariant::delete_one && n < 2) {
    throw std::domain_error("pit_ranks: delete-one ranks need n >= 2");
  }
  RankVector ranks;
  ranks.variant = variant;
  ranks.u.resize(n);
  if (resolved.kind == EstimatorKind::kernel) {
    const auto model = fit_model(resolved, data);
    const auto& kernel = static_cast<const KernelCdfModel&>(*model);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = variant == RankVariant::plugin
                           ? kernel.at(data.row(i))->cdf(data.response(i))
                           : kernel.rank_excluding(i);
      ranks.u[i] = clip_rank(u);
    }
    return ranks;
  }
  if (variant == RankVariant::plugin || resolved.kind == EstimatorKind::oracle) {
    const auto model = fit_model(resolved, data);
    for (std::size_t i = 0; i < n; ++i) {
      ranks.u[i] = clip_rank(model->at(data.row(i))->cdf(data.response(i)));
    }
    return ranks;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto model = fit_model(resolved, data.without(i));
    ranks.u[i] = clip_rank(model->at(data.row(i))->cdf(data.response(i)));
  }
  return ranks;
}

// ---------------------------------------------------------------------------

std::vector<double> default_h_grid(const Dataset& data) {
  return relative_grid(data.covariate_range());
}

std::vector<double> default_h0_grid(const Dataset& data) {
  return relative_grid(data.response_max() - data.response_min());
}

BandwidthChoice select_bandwidths(const Dataset& data, std::span<const double> h_grid,
                                  std::span<const double> h0_grid, const KernelSpec& spec) {
  if (h_grid.empty() || h0_grid.empty()) {
    throw std::domain_error("select_bandwidths: empty bandwidth grid");
  }
  std::vector<double> hs(h_grid.begin(), h_grid.end());
  std::vector<double> h0s(h0_grid.begin(), h0_grid.end());
  std::sort(hs.begin(), hs.end());
  std::sort(h0s.begin(), h0s.end());

  const std::size_t n = data.size();
  struct Neighbour {
    std::size_t j;
    double w;
  };
  std::optional<BandwidthChoice> best;
  std::vector<double> ranks(n);
  for (double h : hs) {
    if (!(h > 0.0)) continue;
    const KernelCdfModel weights(data, h, 1.0, spec);
    std::vector<std::vector<Neighbour>> neighbours(n);
    std::vector<double> totals(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double w = weights.weight(data.row(j), data.row(i));
        if (w > 0.0) {
          neighbours[i].push_back({j, w});
          totals[i] += w;
        }
      }
    }
    for (double h0 : h0s) {
      if (!(h0 > 0.0)) continue;
      for (std::size_t i = 0; i < n; ++i) {
        double num = 0.0;
        for (const auto& [j, w] : neighbours[i]) {
          num += w * smooth_cdf((data.response(i) - data.response(j)) / h0, spec);
        }
        ranks[i] = clip_rank(num / totals[i]);
      }
      const KsResult ks = ks_uniform_test(ranks);
      const bool better =
          !best || ks.p_value > best->ks.p_value ||
          (ks.p_value == best->ks.p_value && ks.statistic < best->ks.statistic);
      if (better) best = BandwidthChoice{h, h0, ks};
    }
  }
  if (!best) throw SelectionError("select_bandwidths: no usable bandwidth pair on the grid");
  return *best;
}

}  // namespace mfpi
