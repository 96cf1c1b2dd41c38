#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <stdexcept>

#include "mfpi/conjecture.hpp"
#include "mfpi/errors.hpp"
#include "mfpi/experiments.hpp"
#include "mfpi/parallel.hpp"
#include "mfpi/stat_kernels.hpp"

namespace mfpi {
namespace {

constexpr std::int64_t kSecondsPerDay = 86400;

int parse_int(std::string_view text, std::string_view whole) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw DataError("malformed timestamp: " + std::string(whole));
  }
  return value;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  const std::int64_t q = a / b;
  return (a % b != 0 && (a < 0) != (b < 0)) ? q - 1 : q;
}

}  // namespace

std::int64_t parse_iso8601(std::string_view text) {
  const std::string_view whole = text;
  if (!text.empty() && text.back() == 'Z') text.remove_suffix(1);
  if (text.size() < 10 || text[4] != '-' || text[7] != '-') {
    throw DataError("malformed timestamp: " + std::string(whole));
  }
  const int year = parse_int(text.substr(0, 4), whole);
  const int month = parse_int(text.substr(5, 2), whole);
  const int day = parse_int(text.substr(8, 2), whole);
  const std::chrono::year_month_day ymd{std::chrono::year{year},
                                        std::chrono::month{static_cast<unsigned>(month)},
                                        std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok()) throw DataError("invalid calendar date: " + std::string(whole));
  std::int64_t seconds = std::chrono::sys_days(ymd).time_since_epoch().count() * kSecondsPerDay;
  if (text.size() == 10) return seconds;
  if ((text[10] != 'T' && text[10] != ' ') || text.size() < 16 || text[13] != ':') {
    throw DataError("malformed timestamp: " + std::string(whole));
  }
  const int hour = parse_int(text.substr(11, 2), whole);
  const int minute = parse_int(text.substr(14, 2), whole);
  int second = 0;
  if (text.size() > 16) {
    if (text[16] != ':' || text.size() != 19) throw DataError("malformed timestamp: " + std::string(whole));
    second = parse_int(text.substr(17, 2), whole);
  }
  if (hour > 23 || minute > 59 || second > 60) {
    throw DataError("time of day out of range: " + std::string(whole));
  }
  return seconds + hour * 3600 + minute * 60 + second;
}

ReturnsSeries load_returns_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  const auto header = trim(line);
  bool prices = false;
  if (header == "timestamp,price") {
    prices = true;
  } else if (header != "timestamp,log_return") {
    throw DataError(path.string() + ": header must be timestamp,price or timestamp,log_return");
  }
  std::vector<std::int64_t> stamps;
  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto row = trim(line);
    if (row.empty()) continue;
    const auto comma = row.find(',');
    if (comma == std::string_view::npos) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected two columns");
    }
    const auto value_text = trim(row.substr(comma + 1));
    double value = 0.0;
    const auto [ptr, ec] =
        std::from_chars(value_text.data(), value_text.data() + value_text.size(), value);
    if (ec != std::errc() || ptr != value_text.data() + value_text.size() || !std::isfinite(value)) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad numeric value");
    }
    if (prices && !(value > 0.0)) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": prices must be positive");
    }
    const auto stamp = parse_iso8601(trim(row.substr(0, comma)));
    if (!stamps.empty() && stamp <= stamps.back()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": timestamps must be strictly increasing");
    }
    stamps.push_back(stamp);
    values.push_back(value);
  }

  ReturnsSeries series;
  series.symbol = path.stem().string();
  const std::size_t first = prices ? 1 : 0;
  for (std::size_t i = first; i < values.size(); ++i) {
    series.timestamps.push_back(stamps[i]);
    series.returns.push_back(prices ? std::log(values[i] / values[i - 1]) : values[i]);
  }
  const bool intraday = std::any_of(stamps.begin(), stamps.end(),
                                    [](std::int64_t s) { return s % kSecondsPerDay != 0; });
  if (intraday) {
    for (auto s : series.timestamps) series.session.push_back(floor_div(s, kSecondsPerDay));
  }
  if (stamps.size() >= 2) {
    std::int64_t step = stamps[1] - stamps[0];
    for (std::size_t i = 2; i < stamps.size(); ++i) step = std::min(step, stamps[i] - stamps[i - 1]);
    series.bar_interval = std::to_string(step) + "s";
  }
  return series;
}

ReturnsSeries trim_sessions(const ReturnsSeries& series) {
  if (!series.has_sessions()) return series;
  ReturnsSeries out;
  out.symbol = series.symbol;
  out.bar_interval = series.bar_interval;
  const std::size_t n = series.returns.size();
  std::size_t begin = 0;
  while (begin < n) {
    std::size_t end = begin;
    while (end < n && series.session[end] == series.session[begin]) ++end;
    if (end - begin > 2 * kSessionTrimBars) {
      for (std::size_t i = begin + kSessionTrimBars; i < end - kSessionTrimBars; ++i) {
        out.timestamps.push_back(series.timestamps[i]);
        out.returns.push_back(series.returns[i]);
        out.session.push_back(series.session[i]);
      }
    }
    begin = end;
  }
  return out;
}

double realized_volatility(std::span<const double> block) {
  double total = 0.0;
  for (double x : block) total += x * x;
  return total;
}

double worst_cumulative_return(std::span<const double> block) {
  if (block.empty()) throw std::domain_error("worst_cumulative_return: empty block");
  double running = 0.0;
  double worst = std::numeric_limits<double>::infinity();
  for (double x : block) {
    running += x;
    worst = std::min(worst, running);
  }
  return worst;
}

std::vector<VarPair> build_var_pairs(const ReturnsSeries& series, std::size_t m) {
  if (m < 2) throw std::domain_error("build_var_pairs: m must be at least 2");
  const ReturnsSeries trimmed = trim_sessions(series);
  const auto& x = trimmed.returns;
  if (x.size() < 4 * m) {
    throw std::domain_error("series too short: need at least 4m = " + std::to_string(4 * m) +
                            " returns" + (series.has_sessions() ? " after session trimming" : "") +
                            ", got " + std::to_string(x.size()));
  }
  std::vector<VarPair> pairs;
  for (std::size_t k = 0; (2 * k + 2) * m <= x.size(); ++k) {
    VarPair pair;
    pair.k = k;
    pair.start = 2 * k * m;
    const std::span<const double> all(x);
    pair.V = realized_volatility(all.subspan(pair.start, m));
    pair.T = worst_cumulative_return(all.subspan(pair.start + m, m));
    pairs.push_back(pair);
  }
  return pairs;
}

// ---------------------------------------------------------------------------

double hetero_scale(const HeteroReturnsConfig& cfg, std::size_t t) {
  return cfg.scale *
         (1.0 + cfg.amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / cfg.period));
}

namespace {

// t_5 has variance 5/3.
double unit_t5(Rng& rng) { return t_quantile(uniform01(rng), 5) * std::sqrt(3.0 / 5.0); }

}  // namespace

ReturnsSeries gen_hetero_returns(const HeteroReturnsConfig& cfg) {
  if (!(cfg.amplitude >= 0.0 && cfg.amplitude < 1.0) || !(cfg.scale > 0.0) || !(cfg.period > 0.0)) {
    throw std::domain_error("gen_hetero_returns: need scale > 0, period > 0, 0 <= amplitude < 1");
  }
  ReturnsSeries series;
  series.symbol = "synthetic";
  series.bar_interval = "60s";
  Rng rng = make_stream(cfg.seed, 0);
  for (std::size_t t = 0; t < cfg.length; ++t) {
    series.timestamps.push_back(static_cast<std::int64_t>(60 * t));
    series.returns.push_back(hetero_scale(cfg, t) * unit_t5(rng));
  }
  return series;
}

OracleBound hetero_oracle(const HeteroReturnsConfig& cfg, std::span<const VarPair> pairs,
                          std::size_t m, std::size_t paths) {
  struct Cache {
    std::mutex mutex;
    std::map<std::size_t, std::vector<double>> samples;
  };
  auto cache = std::make_shared<Cache>();
  std::vector<std::size_t> starts;
  for (const auto& p : pairs) starts.push_back(p.start);
  return [cfg, m, paths, cache, starts](std::size_t pair_index, double alpha) {
    const std::vector<double>* sample = nullptr;
    {
      std::lock_guard lock(cache->mutex);
      auto it = cache->samples.find(pair_index);
      if (it != cache->samples.end()) sample = &it->second;
    }
    if (!sample) {
      const std::size_t first = starts.at(pair_index) + m;
      Rng rng = make_stream(cfg.seed, 0x6f7261636c65ULL, pair_index);
      std::vector<double> draws(paths);
      std::vector<double> block(m);
      for (auto& d : draws) {
        for (std::size_t i = 0; i < m; ++i) block[i] = hetero_scale(cfg, first + i) * unit_t5(rng);
        d = worst_cumulative_return(block);
      }
      std::sort(draws.begin(), draws.end());
      std::lock_guard lock(cache->mutex);
      sample = &cache->samples.emplace(pair_index, std::move(draws)).first->second;
    }
    return empirical_quantile(*sample, alpha);
  };
}

// ---------------------------------------------------------------------------

const VarRow& VarBacktestResult::row(double alpha, std::string_view method) const {
  for (const auto& r : rows) {
    if (r.alpha == alpha && r.method == method) return r;
  }
  throw std::out_of_range("no backtest row for " + std::string(method));
}

VarBacktestResult var_backtest(std::span<const VarPair> pairs, const VarBacktestConfig& cfg,
                               const OracleBound& oracle, const RunOptions& run) {
  if (cfg.window < 2) throw std::domain_error("var_backtest: window must be at least 2");
  if (pairs.size() < cfg.window + 1) {
    throw std::domain_error("var_backtest: insufficient pairs: need at least window + 1 = " +
                            std::to_string(cfg.window + 1) + ", got " +
                            std::to_string(pairs.size()));
  }
  if (cfg.alphas.empty() || cfg.methods.empty()) {
    throw std::domain_error("var_backtest: need at least one alpha and one method");
  }
  for (double a : cfg.alphas) {
    if (!(a > 0.0 && a < 1.0)) throw std::domain_error("alpha must be in (0,1)");
  }
  for (const auto& name : cfg.methods) {
    if (name != "QE" && name != "MFB-L1" && name != "MFB-L2" && name != "CP" && name != "oracle") {
      throw std::domain_error("var_backtest: unknown method " + name);
    }
    if (name == "oracle" && !oracle) throw std::domain_error("var_backtest: oracle bound not supplied");
  }

  const std::size_t n_alpha = cfg.alphas.size();
  const std::size_t n_methods = cfg.methods.size();
  const std::size_t tests = pairs.size() - cfg.window;
  // Per test point, per method, per alpha: VaR bound, or nullopt when skipped.
  std::vector<std::vector<std::optional<double>>> bounds(
      tests, std::vector<std::optional<double>>(n_methods * n_alpha));

  parallel_for(tests, run.threads, [&](std::size_t s) {
    const std::size_t t = cfg.window + s;
    std::vector<double> v, tt;
    for (std::size_t i = t - cfg.window; i < t; ++i) {
      v.push_back(pairs[i].V);
      tt.push_back(pairs[i].T);
    }
    const Dataset train = Dataset::univariate(std::move(v), std::move(tt));
    const std::vector<double> x_f{pairs[t].V};
    std::optional<EstimatorSpec> resolved;
    try {
      resolved = resolve_estimator(cfg.estimator, train);
    } catch (const std::runtime_error&) {
    }
    for (std::size_t j = 0; j < n_methods; ++j) {
      const std::string& name = cfg.methods[j];
      auto& out = bounds[s];
      if (name == "oracle") {
        for (std::size_t a = 0; a < n_alpha; ++a) out[j * n_alpha + a] = oracle(t, cfg.alphas[a]);
        continue;
      }
      if (!resolved) continue;
      try {
        if (name == "QE") {
          const auto law = fit_model(*resolved, train)->at(x_f);
          for (std::size_t a = 0; a < n_alpha; ++a) out[j * n_alpha + a] = law->quantile(cfg.alphas[a]);
        } else if (name == "CP") {
          for (std::size_t a = 0; a < n_alpha; ++a) {
            try {
              out[j * n_alpha + a] =
                  cp_interval(train, x_f, cfg.alphas[a], *resolved, Side::upper).interval.lower;
            } catch (const std::domain_error&) {
              // Too few pairs for this alpha: no candidate can be rejected.
            }
          }
        } else {
          MfbOptions options;
          options.predictor = name == "MFB-L1" ? Functional::median : Functional::mean;
          options.B = cfg.B;
          options.seed = derive_seed(cfg.seed, t, j);
          const auto result = mfb_interval(train, x_f, cfg.alphas.front(), *resolved, options, Side::upper);
          for (std::size_t a = 0; a < n_alpha; ++a) {
            out[j * n_alpha + a] =
                result.sample.center + empirical_quantile(result.sample.roots, cfg.alphas[a]);
          }
        }
      } catch (const std::runtime_error&) {
        // Out-of-support covariate or bootstrap failure: this test point is skipped.
      }
    }
  });

  VarBacktestResult result;
  result.config = cfg;
  result.pairs = pairs.size();
  for (std::size_t j = 0; j < n_methods; ++j) {
    for (std::size_t a = 0; a < n_alpha; ++a) {
      VarRow row;
      row.alpha = cfg.alphas[a];
      row.method = cfg.methods[j];
      for (std::size_t s = 0; s < tests; ++s) {
        const auto& bound = bounds[s][j * n_alpha + a];
        if (!bound) {
          ++row.skipped;
          continue;
        }
        PredictionInterval interval;
        interval.lower = *bound;
        interval.side = Side::upper;
        interval.level = 1.0 - row.alpha;
        const double realized = pairs[cfg.window + s].T;
        ++row.tests;
        if (!decide(interval, NullSpec{NullKind::at_most, realized}, row.alpha).reject) ++row.accepts;
      }
      row.acceptance_rate = row.tests ? static_cast<double>(row.accepts) / static_cast<double>(row.tests)
                                      : std::numeric_limits<double>::quiet_NaN();
      result.rows.push_back(row);
    }
  }
  return result;
}

nlohmann::json var_config_to_json(const VarBacktestConfig& cfg) {
  nlohmann::json j = {
      {"m", cfg.m},
      {"alphas", cfg.alphas},
      {"window", cfg.window},
      {"methods", cfg.methods},
      {"estimator", std::string(to_string(cfg.estimator.kind))},
      {"B", cfg.B},
      {"seed", cfg.seed},
  };
  if (cfg.estimator.h) j["h"] = *cfg.estimator.h;
  if (cfg.estimator.h0) j["h0"] = *cfg.estimator.h0;
  return j;
}

nlohmann::json var_report_to_json(const VarBacktestResult& result) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : result.rows) {
    nlohmann::json row = {
        {"alpha", r.alpha},
        {"method", r.method},
        {"tests", r.tests},
        {"accepts", r.accepts},
        {"skipped", r.skipped},
        {"acceptance_rate", nullptr},
    };
    if (r.tests) row["acceptance_rate"] = r.acceptance_rate;
    rows.push_back(row);
  }
  return {
      {"config", var_config_to_json(result.config)},
      {"pairs", result.pairs},
      {"session_trimming", result.trimmed},
      {"rows", rows},
      {"seed", result.config.seed},
      {"version", MFPI_VERSION},
  };
}

}  // namespace mfpi
