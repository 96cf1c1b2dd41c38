#include "mfpi/pi_methods.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mfpi/errors.hpp"
#include "mfpi/parallel.hpp"
#include "mfpi/random.hpp"
#include "mfpi/stat_kernels.hpp"

namespace mfpi {
namespace {

void require_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("alpha must be in (0,1)");
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    c = c == '_' ? '-' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

double score(double u, Side side) {
  switch (side) {
    case Side::two: return std::abs(u - 0.5);
    case Side::lower: return u;
    case Side::upper: return -u;
  }
  return 0.0;
}

// Endpoints from the accepted candidates; one-sided intervals open the far end.
PredictionInterval hull(std::span<const double> candidates, std::span<const double> p_values,
                        double alpha, Side side) {
  double lo = kInf;
  double hi = -kInf;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    if (p_values[k] > alpha) {
      lo = std::min(lo, candidates[k]);
      hi = std::max(hi, candidates[k]);
    }
  }
  if (lo > hi) throw CpEmptyError();
  PredictionInterval out;
  out.method = Method::cp;
  out.level = 1.0 - alpha;
  out.side = side;
  out.lower = side == Side::lower ? -kInf : lo;
  out.upper = side == Side::upper ? kInf : hi;
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(Side side) {
  switch (side) {
    case Side::two: return "two";
    case Side::lower: return "lower";
    case Side::upper: return "upper";
  }
  return "?";
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::qe: return "QE";
    case Method::cp: return "CP";
    case Method::mfb: return "MFB";
    case Method::t_iid: return "T_IID";
    case Method::t_ls: return "T_LS";
  }
  return "?";
}

Side parse_side(std::string_view name) {
  const auto s = lowercase(name);
  if (s == "two" || s == "two-sided") return Side::two;
  if (s == "lower") return Side::lower;
  if (s == "upper") return Side::upper;
  throw std::invalid_argument("unknown side: " + std::string(name));
}

Method parse_method(std::string_view name) {
  const auto s = lowercase(name);
  if (s == "qe") return Method::qe;
  if (s == "cp") return Method::cp;
  if (s == "mfb") return Method::mfb;
  if (s == "t-iid") return Method::t_iid;
  if (s == "t-ls") return Method::t_ls;
  throw std::invalid_argument("unknown method: " + std::string(name));
}

std::string_view to_string(Functional f) { return f == Functional::mean ? "mean" : "median"; }

Functional parse_functional(std::string_view name) {
  const auto s = lowercase(name);
  if (s == "mean" || s == "l2") return Functional::mean;
  if (s == "median" || s == "l1") return Functional::median;
  throw std::invalid_argument("unknown predictor: " + std::string(name));
}

std::string_view to_string(CpMode mode) {
  switch (mode) {
    case CpMode::automatic: return "auto";
    case CpMode::exact: return "exact";
    case CpMode::rank_approx: return "rank-approx";
  }
  return "?";
}

CpMode parse_cp_mode(std::string_view name) {
  const auto s = lowercase(name);
  if (s == "auto") return CpMode::automatic;
  if (s == "exact") return CpMode::exact;
  if (s == "rank-approx") return CpMode::rank_approx;
  throw std::invalid_argument("unknown CP mode: " + std::string(name));
}

std::string_view to_string(Scheme scheme) {
  return scheme == Scheme::random_regressor ? "random-regressor" : "fixed-regressor";
}

std::string_view to_string(Variant variant) {
  switch (variant) {
    case Variant::standard: return "standard";
    case Variant::limit: return "limit";
    case Variant::predictive: return "predictive";
  }
  return "?";
}

Scheme parse_scheme(std::string_view name) {
  const auto s = lowercase(name);
  if (s == "random-regressor" || s == "random") return Scheme::random_regressor;
  if (s == "fixed-regressor" || s == "fixed") return Scheme::fixed_regressor;
  throw std::invalid_argument("unknown scheme: " + std::string(name));
}

Variant parse_variant(std::string_view name) {
  const auto s = lowercase(name);
  if (s == "standard") return Variant::standard;
  if (s == "limit") return Variant::limit;
  if (s == "predictive") return Variant::predictive;
  throw std::invalid_argument("unknown variant: " + std::string(name));
}

// ---------------------------------------------------------------------------

std::span<const double> mean_tau_grid() {
  static const std::array<double, kMeanGrid> grid = [] {
    std::array<double, kMeanGrid> g{};
    for (std::size_t k = 0; k < kMeanGrid; ++k) {
      g[k] = (static_cast<double>(k) + 0.5) / static_cast<double>(kMeanGrid);
    }
    return g;
  }();
  return grid;
}

double point_predict(const ConditionalLaw& law, Functional functional) {
  if (functional == Functional::median) return law.quantile(0.5);
  const auto taus = mean_tau_grid();
  std::array<double, kMeanGrid> q{};
  law.quantiles(taus, q);
  double total = 0.0;
  for (double v : q) total += v;
  return total / static_cast<double>(kMeanGrid);
}

double point_predict(const ConditionalCdfModel& model, std::span<const double> x_f,
                     Functional functional) {
  return point_predict(*model.at(x_f), functional);
}

PredictionInterval qe_interval(const ConditionalCdfModel& model, std::span<const double> x_f,
                               double alpha, Side side) {
  require_alpha(alpha);
  const auto law = model.at(x_f);
  PredictionInterval out;
  out.method = Method::qe;
  out.level = 1.0 - alpha;
  out.side = side;
  out.center = law->quantile(0.5);
  switch (side) {
    case Side::two:
      out.lower = law->quantile(alpha / 2.0);
      out.upper = law->quantile(1.0 - alpha / 2.0);
      break;
    case Side::lower:
      out.upper = law->quantile(1.0 - alpha);
      break;
    case Side::upper:
      out.lower = law->quantile(alpha);
      break;
  }
  return out;
}

// ---------------------------------------------------------------------------

double conformal_p_value(std::span<const double> scores, double candidate) {
  std::size_t count = 1;  // the candidate itself
  for (double v : scores) {
    if (v >= candidate - kScoreTieTolerance) ++count;
  }
  return static_cast<double>(count) / static_cast<double>(scores.size() + 1);
}

CpMode resolve_cp_mode(CpMode mode, const EstimatorSpec& resolved, std::size_t n) {
  if (mode != CpMode::automatic) return mode;
  return (resolved.kind == EstimatorKind::kernel && n >= 200) ? CpMode::rank_approx
                                                              : CpMode::exact;
}

std::vector<double> cp_candidates(const Dataset& data, const CpGrid& grid) {
  if (!grid.values.empty()) {
    std::vector<double> values = grid.values;
    std::sort(values.begin(), values.end());
    return values;
  }
  if (grid.points < 2) throw std::domain_error("cp grid needs at least two points");
  const double lo_y = data.response_min();
  const double hi_y = data.response_max();
  const double range = hi_y - lo_y;
  if (range == 0.0) return {lo_y};
  const double lo = lo_y - grid.pad * range;
  const double hi = hi_y + grid.pad * range;
  std::vector<double> values(grid.points);
  for (std::size_t k = 0; k < grid.points; ++k) {
    values[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(grid.points - 1);
  }
  return values;
}

CpResult cp_interval(const Dataset& data, std::span<const double> x_f, double alpha,
                     const EstimatorSpec& estimator, Side side, const CpOptions& options) {
  require_alpha(alpha);
  const std::size_t n = data.size();
  if (static_cast<double>(n + 1) * alpha < 1.0 - 1e-12) {
    throw std::domain_error("cp: n must be at least ceil(1/alpha) - 1 for any candidate to be rejected");
  }
  if (x_f.size() != data.dim()) throw std::domain_error("cp: covariate has wrong dimension");

  CpResult result;
  result.mode = resolve_cp_mode(options.mode, estimator, n);
  result.candidates = cp_candidates(data, options.grid);
  const auto& cand = result.candidates;
  result.p_values.assign(cand.size(), 0.0);

  if (result.mode == CpMode::rank_approx) {
    const auto model = fit_model(estimator, data);
    const auto law_f = model->at(x_f);
    const auto ranks = pit_ranks(estimator, data, RankVariant::plugin);
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) scores[i] = score(ranks.u[i], side);
    for (std::size_t k = 0; k < cand.size(); ++k) {
      result.p_values[k] = conformal_p_value(scores, score(clip_rank(law_f->cdf(cand[k])), side));
    }
  } else if (estimator.kind == EstimatorKind::kernel) {
    // Adding (x_f, y) changes each design rank by one weighted term, so the
    // refit reduces to O(n) updates per candidate.
    const auto model = fit_model(estimator, data);
    const auto& km = static_cast<const KernelCdfModel&>(*model);
    const KernelSpec& spec = km.spec();
    const double h0 = km.h0();
    std::vector<double> num(n, 0.0), den(n, 0.0), w_f(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double w = km.weight(data.row(j), data.row(i));
        if (w == 0.0) continue;
        num[i] += w * smooth_cdf((data.response(i) - data.response(j)) / h0, spec);
        den[i] += w;
      }
      w_f[i] = km.weight(data.row(i), x_f);
    }
    const double w_ff = km.weight(x_f, x_f);
    std::vector<double> scores(n);
    for (std::size_t k = 0; k < cand.size(); ++k) {
      const double y = cand[k];
      double num_f = w_ff * smooth_cdf(0.0, spec);
      double den_f = w_ff;
      for (std::size_t i = 0; i < n; ++i) {
        const double u = (num[i] + w_f[i] * smooth_cdf((data.response(i) - y) / h0, spec)) /
                         (den[i] + w_f[i]);
        scores[i] = score(clip_rank(u), side);
        if (w_f[i] > 0.0) {
          num_f += w_f[i] * smooth_cdf((y - data.response(i)) / h0, spec);
          den_f += w_f[i];
        }
      }
      result.p_values[k] = conformal_p_value(scores, score(clip_rank(num_f / den_f), side));
    }
  } else {
    const auto base = fit_model(estimator, data);
    parallel_for(cand.size(), options.threads, [&](std::size_t k) {
      const Dataset augmented = data.with(x_f, cand[k]);
      const auto model = fit_model(estimator, augmented, base.get());
      std::vector<double> scores(n);
      for (std::size_t i = 0; i < n; ++i) {
        scores[i] = score(clip_rank(model->at(augmented.row(i))->cdf(augmented.response(i))), side);
      }
      const double own = score(clip_rank(model->at(x_f)->cdf(cand[k])), side);
      result.p_values[k] = conformal_p_value(scores, own);
    });
  }
  result.interval = hull(cand, result.p_values, alpha, side);
  const auto best = std::max_element(result.p_values.begin(), result.p_values.end());
  result.interval.center = cand[static_cast<std::size_t>(best - result.p_values.begin())];
  return result;
}

// ---------------------------------------------------------------------------

MfbResult mfb_interval(const Dataset& data, std::span<const double> x_f, double alpha,
                       const EstimatorSpec& estimator, const MfbOptions& options, Side side) {
  require_alpha(alpha);
  if (options.B < 100) throw std::domain_error("mfb: B must be at least 100");
  const std::size_t n = data.size();
  if (n < 2) throw std::domain_error("mfb: need n >= 2");

  const auto model = fit_model(estimator, data);
  const auto law_f = model->at(x_f);
  const double center = point_predict(*law_f, options.predictor);

  std::vector<double> ranks;
  if (options.variant != Variant::limit) {
    const auto variant =
        options.variant == Variant::predictive ? RankVariant::delete_one : RankVariant::plugin;
    ranks = pit_ranks(estimator, data, variant).u;
  }
  std::vector<std::unique_ptr<ConditionalLaw>> design_laws(n);
  for (std::size_t j = 0; j < n; ++j) design_laws[j] = model->at(data.row(j));
  // Coarse quantile tables give each inversion a close starting point.
  constexpr std::size_t kGuessLevels = 33;
  std::vector<double> guess_p(kGuessLevels);
  for (std::size_t l = 0; l < kGuessLevels; ++l) {
    guess_p[l] = clip_rank(static_cast<double>(l) / static_cast<double>(kGuessLevels - 1));
  }
  std::vector<double> guess_q(n * kGuessLevels);
  for (std::size_t j = 0; j < n; ++j) {
    design_laws[j]->quantiles(guess_p,
                              std::span<double>(guess_q).subspan(j * kGuessLevels, kGuessLevels));
  }
  auto invert = [&](std::size_t j, double u) {
    const double pos = u * static_cast<double>(kGuessLevels - 1);
    const auto l = std::min<std::size_t>(static_cast<std::size_t>(pos), kGuessLevels - 2);
    const double frac = std::clamp(pos - static_cast<double>(l), 0.0, 1.0);
    const double* q = guess_q.data() + j * kGuessLevels;
    return design_laws[j]->quantile_near(u, q[l] + frac * (q[l + 1] - q[l]));
  };

  struct Replicate {
    double future = 0.0;
    double refit = 0.0;
    int redraws = 0;
    bool ok = false;
  };
  std::vector<Replicate> reps(options.B);
  parallel_for(options.B, options.threads, [&](std::size_t b) {
    std::vector<std::size_t> rows(n);
    std::vector<double> y_star(n);
    Replicate& rep = reps[b];
    for (int attempt = 0; attempt <= kMfbMaxRedraws; ++attempt) {
      Rng resample = make_stream(options.seed, b, 2 * static_cast<std::uint64_t>(attempt));
      Rng future = make_stream(options.seed, b, 2 * static_cast<std::uint64_t>(attempt) + 1);
      for (std::size_t i = 0; i < n; ++i) {
        rows[i] = options.scheme == Scheme::random_regressor ? uniform_index(resample, n) : i;
      }
      for (std::size_t i = 0; i < n; ++i) {
        const double u = options.variant == Variant::limit ? clip_rank(uniform01(resample))
                                                           : ranks[uniform_index(resample, n)];
        y_star[i] = invert(rows[i], u);
      }
      rep.future = law_f->quantile(uniform01(future));
      try {
        const Dataset boot = data.gather(rows).with_responses(y_star);
        const auto refit = fit_model(estimator, boot, model.get());
        rep.refit = point_predict(*refit, x_f, options.predictor);
        rep.ok = true;
        rep.redraws = attempt;
        return;
      } catch (const OutOfSupportError&) {
        rep.redraws = attempt;
      }
    }
  });

  MfbResult result;
  RootSample& sample = result.sample;
  sample.center = center;
  sample.B = options.B;
  sample.scheme = options.scheme;
  sample.variant = options.variant;
  std::size_t first_failed = options.B;
  for (std::size_t b = 0; b < options.B; ++b) {
    const auto& rep = reps[b];
    sample.redraws += static_cast<std::size_t>(rep.redraws);
    if (!rep.ok) {
      ++sample.failed;
      first_failed = std::min(first_failed, b);
      continue;
    }
    sample.roots.push_back(rep.future - rep.refit);
    sample.future_draws.push_back(rep.future);
    sample.refit_predictions.push_back(rep.refit);
  }
  if (static_cast<double>(sample.failed) > kMfbFailureShare * static_cast<double>(options.B)) {
    throw BootstrapError("mfb: " + std::to_string(sample.failed) + " of " +
                         std::to_string(options.B) +
                         " replicates had no kernel mass at x_f after " +
                         std::to_string(kMfbMaxRedraws) + " redraws (first failing replicate " +
                         std::to_string(first_failed) + ", " + std::to_string(sample.redraws) +
                         " redraws in total)");
  }

  PredictionInterval& out = result.interval;
  out.method = Method::mfb;
  out.level = 1.0 - alpha;
  out.side = side;
  out.center = center;
  switch (side) {
    case Side::two:
      out.lower = center + empirical_quantile(sample.roots, alpha / 2.0);
      out.upper = center + empirical_quantile(sample.roots, 1.0 - alpha / 2.0);
      break;
    case Side::lower:
      out.upper = center + empirical_quantile(sample.roots, 1.0 - alpha);
      break;
    case Side::upper:
      out.lower = center + empirical_quantile(sample.roots, alpha);
      break;
  }
  return result;
}

// ---------------------------------------------------------------------------

PredictionInterval baseline_t_interval(std::span<const double> y, double alpha) {
  require_alpha(alpha);
  const std::size_t n = y.size();
  if (n < 2) throw std::domain_error("baseline_t_interval: need n >= 2");
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : y) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  const double t = t_quantile(alpha / 2.0, static_cast<int>(n - 1));
  const double half = -t * sd * std::sqrt(1.0 + 1.0 / static_cast<double>(n));
  PredictionInterval out;
  out.method = Method::t_iid;
  out.level = 1.0 - alpha;
  out.lower = mean - half;
  out.upper = mean + half;
  out.center = mean;
  return out;
}

PredictionInterval baseline_ls_interval(const Dataset& data, std::span<const double> x_f,
                                        double alpha) {
  require_alpha(alpha);
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto p = static_cast<Eigen::Index>(data.dim() + 1);
  if (n <= p) throw std::domain_error("baseline_ls_interval: need n > d + 1");
  if (static_cast<Eigen::Index>(x_f.size()) + 1 != p) {
    throw std::domain_error("baseline_ls_interval: covariate has wrong dimension");
  }
  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = data.row(static_cast<std::size_t>(i));
    x(i, 0) = 1.0;
    for (Eigen::Index s = 1; s < p; ++s) x(i, s) = row[static_cast<std::size_t>(s - 1)];
    y(i) = data.response(static_cast<std::size_t>(i));
  }
  const Eigen::MatrixXd gram = x.transpose() * x;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(gram);
  const auto sv = svd.singularValues();
  if (!(sv(p - 1) > 0.0) || sv(0) / sv(p - 1) >= 1e12) {
    throw FitError("baseline_ls_interval: singular design (condition number of X'X >= 1e12)");
  }
  const Eigen::LDLT<Eigen::MatrixXd> solver(gram);
  const Eigen::VectorXd beta = solver.solve(x.transpose() * y);
  const double rss = (y - x * beta).squaredNorm();
  const int df = static_cast<int>(n - p);
  const double sigma = std::sqrt(rss / df);
  Eigen::VectorXd xf(p);
  xf(0) = 1.0;
  for (Eigen::Index s = 1; s < p; ++s) xf(s) = x_f[static_cast<std::size_t>(s - 1)];
  const double leverage = xf.dot(solver.solve(xf));
  const double center = xf.dot(beta);
  const double half = -t_quantile(alpha / 2.0, df) * sigma * std::sqrt(1.0 + leverage);
  PredictionInterval out;
  out.method = Method::t_ls;
  out.level = 1.0 - alpha;
  out.lower = center - half;
  out.upper = center + half;
  out.center = center;
  return out;
}

// ---------------------------------------------------------------------------

std::string MethodSpec::label() const {
  std::string out(to_string(method));
  if (method == Method::qe || method == Method::cp || method == Method::mfb) {
    out += '-';
    out += to_string(estimator.kind);
  }
  return out;
}

PredictionInterval build_interval(const MethodSpec& spec, const Dataset& data,
                                  std::span<const double> x_f, double alpha, Side side,
                                  std::uint64_t seed) {
  require_alpha(alpha);
  if ((spec.method == Method::t_iid || spec.method == Method::t_ls) && side != Side::two) {
    throw std::domain_error("Gaussian baselines are two-sided only");
  }
  switch (spec.method) {
    case Method::t_iid: return baseline_t_interval(data.responses(), alpha);
    case Method::t_ls: return baseline_ls_interval(data, x_f, alpha);
    default: break;
  }
  const EstimatorSpec resolved = resolve_estimator(spec.estimator, data);
  switch (spec.method) {
    case Method::qe: return qe_interval(*fit_model(resolved, data), x_f, alpha, side);
    case Method::cp: return cp_interval(data, x_f, alpha, resolved, side, spec.cp).interval;
    case Method::mfb: {
      MfbOptions options = spec.mfb;
      options.seed = seed;
      return mfb_interval(data, x_f, alpha, resolved, options, side).interval;
    }
    default: break;
  }
  throw std::logic_error("build_interval: unknown method");
}

}  // namespace mfpi
