#include "mfpi/experiments.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mfpi/parallel.hpp"
#include "mfpi/stat_kernels.hpp"

namespace mfpi {

double synthetic_mean(double x) { return std::sin(std::numbers::pi * x); }

double synthetic_scale(double x, double sigma) { return sigma * std::sqrt(1.0 + 2.0 * x); }

double draw_synthetic_response(double x, double sigma, Rng& rng) {
  return synthetic_mean(x) + synthetic_scale(x, sigma) * t_quantile(uniform01(rng), 5);
}

Dataset gen_synthetic(std::size_t n, double sigma, std::uint64_t seed) {
  if (n < 1) throw std::domain_error("gen_synthetic: n must be positive");
  Rng rng = make_stream(seed, 0);
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = uniform01(rng);
    y[i] = draw_synthetic_response(x[i], sigma, rng);
  }
  return Dataset::univariate(std::move(x), std::move(y));
}

std::shared_ptr<const AnalyticCdfModel> synthetic_true_model(double sigma) {
  return std::make_shared<AnalyticCdfModel>(
      "synthetic-true",
      [sigma](double y, std::span<const double> x) {
        if (std::isinf(y)) return y > 0 ? 1.0 : 0.0;
        return t_cdf((y - synthetic_mean(x[0])) / synthetic_scale(x[0], sigma), 5);
      },
      [sigma](double p, std::span<const double> x) {
        return synthetic_mean(x[0]) + synthetic_scale(x[0], sigma) * t_quantile(p, 5);
      });
}

// ---------------------------------------------------------------------------

std::string_view to_string(Profile profile) {
  switch (profile) {
    case Profile::desk: return "desk";
    case Profile::paper: return "paper";
    case Profile::custom: return "custom";
  }
  return "?";
}

Profile parse_profile(std::string_view name) {
  if (name == "desk") return Profile::desk;
  if (name == "paper") return Profile::paper;
  if (name == "custom") return Profile::custom;
  throw std::invalid_argument("unknown profile: " + std::string(name));
}

SyntheticConfig SyntheticConfig::desk() {
  SyntheticConfig cfg;
  cfg.K = 100;
  cfg.M = 1000;
  cfg.B = 500;
  cfg.profile = Profile::desk;
  return cfg;
}

SyntheticConfig SyntheticConfig::paper() { return SyntheticConfig{}; }

SyntheticConfig SyntheticConfig::for_profile(Profile profile) {
  if (profile == Profile::desk) return desk();
  SyntheticConfig cfg = paper();
  cfg.profile = profile;
  return cfg;
}

void SyntheticConfig::validate() const {
  if (n < 1) throw std::domain_error("n must be positive");
  if (!(sigma > 0.0)) throw std::domain_error("sigma must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("alpha must be in (0,1)");
  if (K < 1 || M < 1) throw std::domain_error("K and M must be positive");
  if (B < 100) throw std::domain_error("B must be at least 100");
  if (!(x_f > 0.0 && x_f < 1.0)) throw std::domain_error("x_f must be in (0,1)");
  if (methods.empty()) throw std::domain_error("no methods requested");
}

const MethodCoverage& CoverageReport::method(std::string_view name) const {
  for (const auto& m : methods) {
    if (m.name == name) return m;
  }
  throw std::out_of_range("no method named " + std::string(name) + " in report");
}

MethodSpec coverage_method_spec(const SyntheticConfig& cfg, Method method) {
  MethodSpec spec;
  spec.method = method;
  spec.estimator.kind = cfg.estimator;
  if (cfg.estimator == EstimatorKind::oracle) spec.estimator.oracle = synthetic_true_model(cfg.sigma);
  spec.cp.mode = cfg.cp_mode;
  spec.mfb.predictor = cfg.predictor;
  spec.mfb.scheme = cfg.scheme;
  spec.mfb.variant = cfg.variant;
  spec.mfb.B = cfg.B;
  return spec;
}

CoverageReport estimate_cvp(const SyntheticConfig& cfg, const RunOptions& run) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  const std::vector<double> x_f{cfg.x_f};
  const std::size_t n_methods = cfg.methods.size();
  std::vector<MethodSpec> specs;
  for (Method m : cfg.methods) specs.push_back(coverage_method_spec(cfg, m));

  struct Slot {
    std::vector<double> cvp;
    std::vector<double> lower;
    std::vector<double> upper;
    int redrawn = 0;
  };
  std::vector<Slot> slots(cfg.K);
  parallel_for(cfg.K, run.threads, [&](std::size_t k) {
    Slot& slot = slots[k];
    for (int attempt = 0;; ++attempt) {
      try {
        const Dataset data = gen_synthetic(cfg.n, cfg.sigma, derive_seed(cfg.seed, k, attempt));
        const EstimatorSpec resolved = resolve_estimator(specs.front().estimator, data);
        slot.lower.assign(n_methods, 0.0);
        slot.upper.assign(n_methods, 0.0);
        for (std::size_t j = 0; j < n_methods; ++j) {
          MethodSpec spec = specs[j];
          spec.estimator = resolved;
          const auto interval = build_interval(spec, data, x_f, cfg.alpha, Side::two,
                                               derive_seed(cfg.seed, k, 1000 + attempt));
          slot.lower[j] = interval.lower;
          slot.upper[j] = interval.upper;
        }
        Rng future = make_stream(cfg.seed, k, 2000 + static_cast<std::uint64_t>(attempt));
        std::vector<std::size_t> covered(n_methods, 0);
        for (std::size_t t = 0; t < cfg.M; ++t) {
          const double y = draw_synthetic_response(cfg.x_f, cfg.sigma, future);
          for (std::size_t j = 0; j < n_methods; ++j) {
            if (y >= slot.lower[j] && y <= slot.upper[j]) ++covered[j];
          }
        }
        slot.cvp.resize(n_methods);
        for (std::size_t j = 0; j < n_methods; ++j) {
          slot.cvp[j] = static_cast<double>(covered[j]) / static_cast<double>(cfg.M);
        }
        slot.redrawn = attempt;
        return;
      } catch (const std::runtime_error&) {
        if (attempt + 1 >= kCoverageAttempts) throw;
      }
    }
  });

  CoverageReport report;
  report.config = cfg;
  for (std::size_t j = 0; j < n_methods; ++j) {
    MethodCoverage mc;
    mc.name = specs[j].label();
    double length_total = 0.0;
    for (const auto& slot : slots) {
      mc.cvp.push_back(slot.cvp[j]);
      mc.lower.push_back(slot.lower[j]);
      mc.upper.push_back(slot.upper[j]);
      length_total += slot.upper[j] - slot.lower[j];
    }
    double total = 0.0;
    for (double v : mc.cvp) total += v;
    mc.cvp_mean = total / static_cast<double>(cfg.K);
    double ss = 0.0;
    for (double v : mc.cvp) ss += (v - mc.cvp_mean) * (v - mc.cvp_mean);
    mc.cvp_var = cfg.K > 1 ? ss / static_cast<double>(cfg.K - 1) : 0.0;
    mc.mean_length = length_total / static_cast<double>(cfg.K);
    report.methods.push_back(std::move(mc));
  }
  for (const auto& slot : slots) report.redrawn += static_cast<std::size_t>(slot.redrawn);
  if (run.record_runtime) {
    report.runtime_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  }
  return report;
}

std::vector<std::size_t> default_sweep_sizes() {
  std::vector<std::size_t> sizes;
  for (std::size_t i = 1; i <= 8; ++i) sizes.push_back(50 * i);
  return sizes;
}

std::vector<CoverageReport> sweep_sample_sizes(const SyntheticConfig& base,
                                               std::span<const std::size_t> n_list,
                                               std::span<const EstimatorKind> estimators,
                                               const RunOptions& run) {
  if (n_list.empty()) throw std::domain_error("sweep: empty sample-size list");
  if (estimators.empty()) throw std::domain_error("sweep: no estimators");
  std::vector<CoverageReport> reports;
  for (std::size_t n : n_list) {
    for (EstimatorKind kind : estimators) {
      SyntheticConfig cfg = base;
      cfg.n = n;
      cfg.estimator = kind;
      reports.push_back(estimate_cvp(cfg, run));
    }
  }
  return reports;
}

}  // namespace mfpi
