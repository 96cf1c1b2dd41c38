// Acceptance run: one PASS/FAIL line per criterion.
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mfpi/cli.hpp"
#include "mfpi/conjecture.hpp"
#include "mfpi/experiments.hpp"
#include "mfpi/parallel.hpp"
#include "mfpi/quantile_regression.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace mfpi;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

unsigned g_threads = 1;

SyntheticConfig desk(std::size_t n, EstimatorKind estimator, std::vector<Method> methods) {
  SyntheticConfig cfg = SyntheticConfig::desk();
  cfg.n = n;
  cfg.estimator = estimator;
  cfg.methods = std::move(methods);
  cfg.seed = 7;
  return cfg;
}

const CoverageReport& desk_kernel_400() {
  static const CoverageReport report =
      estimate_cvp(desk(400, EstimatorKind::kernel, {Method::qe, Method::mfb, Method::cp}),
                   {g_threads, false});
  return report;
}

double mc_se(const MethodCoverage& m) { return std::sqrt(m.cvp_var / static_cast<double>(m.cvp.size())); }

Outcome criterion1() {
  const auto& r = desk_kernel_400();
  const double qe = r.method("QE-kernel").cvp_mean;
  const double mfb = r.method("MFB-kernel").cvp_mean;
  const auto in = [](double v) { return v >= 0.93 && v <= 0.96; };
  return {in(qe) && in(mfb), fmt("n=400 QE=%.4f MFB=%.4f (band [0.93, 0.96])", qe, mfb)};
}

Outcome criterion2() {
  const auto r = estimate_cvp(desk(50, EstimatorKind::kernel, {Method::qe, Method::mfb}),
                              {g_threads, false});
  const double qe = r.method("QE-kernel").cvp_mean;
  const double mfb = r.method("MFB-kernel").cvp_mean;
  return {mfb - qe > -0.005, fmt("n=50 QE=%.4f MFB=%.4f diff=%+.4f (need > -0.005)", qe, mfb, mfb - qe)};
}

Outcome criterion3() {
  const auto r = estimate_cvp(desk(50, EstimatorKind::qr, {Method::qe, Method::cp}), {g_threads, false});
  const auto& qe = r.method("QE-qr");
  const auto& cp = r.method("CP-qr");
  const double ratio = cp.mean_length / qe.mean_length;
  return {cp.cvp_mean > 0.97 && ratio > 1.2,
          fmt("n=50 CP=%.4f (need > 0.97, SE %.4f) length ratio CP/QE=%.3f (need > 1.2)", cp.cvp_mean,
              mc_se(cp), ratio)};
}

Outcome criterion4() {
  const auto& r = desk_kernel_400();
  const double cp = r.method("CP-kernel").cvp_mean;
  const double mfb = r.method("MFB-kernel").cvp_mean;
  return {cp >= 0.89 && cp <= 0.95 && cp <= mfb,
          fmt("n=400 CP=%.4f (band [0.89, 0.95]) MFB=%.4f", cp, mfb)};
}

Outcome criterion5() {
  const int reps = 100000;
  const std::size_t n = 5;
  Rng rng = make_stream(5, 0);
  std::normal_distribution<double> normal;
  std::vector<double> y(n);
  int covered = 0;
  for (int r = 0; r < reps; ++r) {
    for (auto& v : y) v = normal(rng);
    const auto pi = baseline_t_interval(y, 0.05);
    if (pi.contains(normal(rng))) ++covered;
  }
  const double rate = static_cast<double>(covered) / reps;
  return {std::abs(rate - 0.95) <= 0.004, fmt("coverage=%.4f over %d reps (need 0.950 +- 0.004)", rate, reps)};
}

Outcome criterion6() {
  const int reps = 500;
  const double alpha = 0.05;
  std::vector<int> hit(reps, 0);
  std::vector<int> empty(reps, 0);
  parallel_for(reps, g_threads, [&](std::size_t r) {
    const Dataset data = gen_synthetic(50, 0.2, derive_seed(6, r));
    Rng rng = make_stream(6, r, 1);
    const double x_f = uniform01(rng);
    const double y_f = draw_synthetic_response(x_f, 0.2, rng);
    const std::vector<double> xf{x_f};
    const EstimatorSpec resolved = resolve_estimator({}, data);
    CpOptions options;
    options.mode = CpMode::exact;
    try {
      hit[r] = cp_interval(data, xf, alpha, resolved, Side::two, options).interval.contains(y_f);
    } catch (const std::runtime_error&) {
      empty[r] = 1;
    }
  });
  int covered = 0, failures = 0;
  for (int r = 0; r < reps; ++r) {
    covered += hit[r];
    failures += empty[r];
  }
  const double rate = static_cast<double>(covered) / reps;
  const double bound = 1.0 - alpha - 2.0 * std::sqrt(alpha * (1 - alpha) / reps);
  return {rate >= bound, fmt("marginal coverage=%.4f over %d joint draws (need >= %.4f; %d failed builds)",
                             rate, reps, bound, failures)};
}

double t5_tail(double u) { return 1.0 - oracle::t5_cdf(u); }

Outcome criterion7() {
  const double step = 1e-3;
  const long points = std::lround(60.0 / step);
  double worst = INFINITY;
  for (double sigma : {0.05, 0.1}) {
    for (double u : {3.0, 4.0, 5.0}) {
      double total = 0.0;
      for (long i = 0; i <= points; ++i) {
        const double z = -30.0 + step * static_cast<double>(i);
        const double w = (i == 0 || i == points) ? 0.5 : 1.0;
        total += w * t5_tail(u - z) * oracle::normal_density(z / sigma) / sigma;
      }
      const double margin = total * step - t5_tail(u);
      worst = std::min(worst, margin);
    }
  }
  return {worst > 1e-6, fmt("smallest margin over u in {3,4,5}, sigma in {0.05,0.1}: %.3e (need > 1e-6)", worst)};
}

Outcome criterion8() {
  SyntheticConfig cfg = SyntheticConfig::desk();
  cfg.n = 50;
  cfg.K = 200;
  cfg.M = 1000;
  cfg.estimator = EstimatorKind::oracle;
  cfg.methods = {Method::qe};
  cfg.seed = 8;
  const auto report = estimate_cvp(cfg, {g_threads, false});
  const auto& averaged = report.methods.front();

  // Pooled: every trial draws its own dataset and future response.
  const std::size_t trials = cfg.K * 200;
  const MethodSpec spec = coverage_method_spec(cfg, Method::qe);
  const std::vector<double> xf{cfg.x_f};
  std::vector<char> hit(trials, 0);
  parallel_for(trials, g_threads, [&](std::size_t t) {
    const Dataset d = gen_synthetic(cfg.n, cfg.sigma, derive_seed(88, t));
    Rng rng = make_stream(88, t, 1);
    const auto pi = build_interval(spec, d, xf, cfg.alpha, Side::two, t);
    hit[t] = pi.contains(draw_synthetic_response(cfg.x_f, cfg.sigma, rng));
  });
  std::size_t covered = 0;
  for (char h : hit) covered += h;
  const double pooled = static_cast<double>(covered) / static_cast<double>(trials);
  const double se = std::sqrt(averaged.cvp_var / static_cast<double>(cfg.K) +
                              pooled * (1 - pooled) / static_cast<double>(trials));
  const double gap = std::abs(pooled - averaged.cvp_mean);
  return {gap <= 2.0 * se, fmt("pooled=%.4f dataset-averaged=%.4f gap=%.4f (need <= %.4f)", pooled,
                               averaged.cvp_mean, gap, 2.0 * se)};
}

Outcome criterion9() {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> sizes(3, 6);
  std::uniform_int_distribution<int> xs(-2, 2);
  std::uniform_int_distribution<int> ys(-83, 83);
  std::uniform_int_distribution<int> taus(1, 9);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const std::size_t n = static_cast<std::size_t>(sizes(rng));
    std::vector<double> x(n), y(n);
    do {
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = xs(rng);
        // Multiples of 0.012 keep every two-point line on the 1e-3 search lattice.
        y[i] = 0.012 * ys(rng);
      }
    } while (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; }));
    const double tau = 0.1 * taus(rng);
    const auto fit = solve_quantile_regression(Dataset::univariate(x, y), tau);
    const double grid = oracle::qr_grid_minimum(x, y, tau);
    worst = std::max(worst, std::abs(fit.objective - grid));
  }
  return {worst <= 1e-3, fmt("20 instances, largest |solver - grid| = %.2e (need <= 1e-3)", worst)};
}

Outcome criterion10() {
  // (a) Oracle calibration.
  HeteroReturnsConfig hc;
  hc.length = 40000;
  hc.seed = 10;
  const std::size_t m = 10;
  const auto series = gen_hetero_returns(hc);
  const auto pairs = build_var_pairs(series, m);
  VarBacktestConfig oc;
  oc.m = m;
  oc.window = 34;
  oc.methods = {"oracle"};
  const auto calib = var_backtest(pairs, oc, hetero_oracle(hc, pairs, m), {g_threads, false});
  bool calibrated = true;
  std::string detail = "oracle";
  for (const auto& row : calib.rows) {
    const double p = 1.0 - row.alpha;
    const double se = std::sqrt(p * (1 - p) / static_cast<double>(row.tests));
    calibrated = calibrated && std::abs(row.acceptance_rate - p) <= 3.0 * se;
    detail += fmt(" a=%.2f:%.4f(+-%.4f)", row.alpha, row.acceptance_rate, 3.0 * se);
  }

  // (b) MFB-L1 against QE over seeded runs.
  int wins = 0;
  const int runs = 20;
  for (int s = 1; s <= runs; ++s) {
    HeteroReturnsConfig rc;
    rc.seed = static_cast<std::uint64_t>(s);
    const auto run_pairs = build_var_pairs(gen_hetero_returns(rc), m);
    VarBacktestConfig vc;
    vc.m = m;
    vc.window = 34;
    vc.alphas = {0.05};
    vc.methods = {"QE", "MFB-L1"};
    vc.seed = static_cast<std::uint64_t>(s);
    const auto result = var_backtest(run_pairs, vc, {}, {g_threads, false});
    if (result.row(0.05, "MFB-L1").acceptance_rate >= result.row(0.05, "QE").acceptance_rate) ++wins;
  }
  const bool ordered = wins >= 12;
  detail += fmt("; MFB-L1 >= QE in %d/%d runs (need >= 12)", wins, runs);
  return {calibrated && ordered, detail};
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "mfpi");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return cli::main_entry(static_cast<int>(argv.size()), argv.data(), out, err);
}

Outcome criterion11() {
  TempDir dir;
  const auto data = dir.path() / "data.csv";
  write_dataset_csv(gen_synthetic(120, 0.2, 11), data);
  const std::vector<std::vector<std::string>> commands{
      {"simulate-coverage", "--n", "60", "--K", "8", "--M", "200", "--B", "200", "--seed", "11"},
      {"simulate-coverage", "--n", "40", "--K", "6", "--M", "100", "--estimator", "qr", "--seed", "11"},
      {"sweep", "--n-list", "40,60", "--K", "4", "--M", "100", "--B", "100", "--seed", "11"},
      {"var-backtest", "--synthetic", "3000", "--methods", "QE,MFB-L1,MFB-L2,CP,oracle", "--B", "100",
       "--seed", "11"},
      {"predict", "--data", data.string(), "--xf", "0.4", "--method", "mfb", "--B", "300", "--seed", "11"},
      {"predict", "--data", data.string(), "--xf", "0.4", "--method", "cp", "--estimator", "qr"},
      {"conjecture", "--data", data.string(), "--xf", "0.4", "--method", "mfb", "--null", "at-least",
       "--y0", "1.2", "--B", "200"},
  };
  int identical = 0;
  std::string broken;
  for (std::size_t c = 0; c < commands.size(); ++c) {
    std::vector<std::string> files;
    for (const char* threads : {"1", "3", "1"}) {
      const auto out = dir.path() / ("out_" + std::to_string(c) + "_" + std::to_string(files.size()));
      auto args = commands[c];
      args.insert(args.end(), {"--threads", threads, "--out", out.string()});
      if (run_cli(args) != 0) {
        files.push_back("<exit failure>" + std::to_string(files.size()));
        continue;
      }
      files.push_back(slurp(out));
    }
    if (files[0] == files[1] && files[1] == files[2] && !files[0].empty()) {
      ++identical;
    } else {
      broken += " " + commands[c][0];
    }
  }
  const int total = static_cast<int>(commands.size());
  return {identical == total,
          fmt("%d/%d pipelines byte-identical across thread counts 1/3/1", identical, total) +
              (broken.empty() ? "" : " (differs:" + broken + ")")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  unsigned threads = 0;
  std::vector<int> expect_fail;
  std::vector<int> only;
  app.add_option("--threads", threads, "Worker threads; 0 uses every core");
  app.add_option("--expect-fail", expect_fail, "Criteria known to be unattainable")->delimiter(',');
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  g_threads = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;

  const std::vector<std::function<Outcome()>> criteria{
      criterion1, criterion2, criterion3, criterion4,  criterion5, criterion6,
      criterion7, criterion8, criterion9, criterion10, criterion11};
  const std::set<int> expected(expect_fail.begin(), expect_fail.end());
  const std::set<int> selected(only.begin(), only.end());
  int unexpected = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(id)) continue;
    const auto started = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    const bool known = !o.pass && expected.count(id);
    if (!o.pass && !known) ++unexpected;
    std::printf("criterion %d: %s%s  %s  [%.0fs]\n", id, o.pass ? "PASS" : "FAIL",
                known ? " (expected)" : "", o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return unexpected == 0 ? 0 : 1;
}
