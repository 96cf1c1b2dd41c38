#include "mfpi/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <exception>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "mfpi/conjecture.hpp"
#include "mfpi/dataset.hpp"
#include "mfpi/experiments.hpp"
#include "mfpi/pi_methods.hpp"

namespace mfpi::cli {
namespace {

void add_common(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--seed", cfg.seed, "Base random seed");
  cmd->add_option("--threads", cfg.threads, "Worker threads (results do not depend on it)")
      ->check(CLI::Range(1u, 1024u));
  cmd->add_option("--out", cfg.out, "Output file");
}

void add_interval_options(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--data", cfg.data, "Dataset CSV (x1..xd,y)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--xf", cfg.xf, "Future covariate (comma separated for d > 1)")
      ->required()
      ->delimiter(',');
  cmd->add_option("--alpha", cfg.alpha, "Miscoverage level");
  cmd->add_option("--method", cfg.method, "qe | cp | mfb | t-iid | t-ls");
  cmd->add_option("--estimator", cfg.estimator, "kernel | qr");
  cmd->add_option("--h", cfg.h, "Covariate bandwidth (default: KS selection)");
  cmd->add_option("--h0", cfg.h0, "Response bandwidth (default: KS selection)");
  cmd->add_option("--weight-kernel", cfg.weight_kernel, "epanechnikov | gaussian-truncated");
  cmd->add_option("--cdf-kernel", cfg.cdf_kernel, "gaussian-cdf | integrated-epanechnikov | step");
  cmd->add_option("--predictor", cfg.predictor, "MFB point predictor: mean | median");
  cmd->add_option("--scheme", cfg.scheme, "MFB scheme: random-regressor | fixed-regressor");
  cmd->add_option("--variant", cfg.variant, "MFB variant: standard | limit | predictive");
  cmd->add_option("--B", cfg.B, "Bootstrap replicates");
  cmd->add_option("--cp-mode", cfg.cp_mode, "auto | exact | rank-approx");
}

void add_coverage_options(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--profile", cfg.profile, "desk | paper");
  cmd->add_option("--alpha", cfg.alpha, "Miscoverage level");
  cmd->add_option("--sigma", cfg.sigma, "Noise scale of the synthetic model");
  cmd->add_option("--xf", cfg.xf, "Future covariate")->expected(1);
  cmd->add_option("--K", cfg.K, "Datasets (overrides the profile)");
  cmd->add_option("--M", cfg.M, "Future draws per dataset (overrides the profile)");
  cmd->add_option("--B", cfg.B, "Bootstrap replicates (overrides the profile)");
  cmd->add_option("--methods", cfg.methods, "Comma-separated methods")->delimiter(',');
  cmd->add_option("--predictor", cfg.predictor, "MFB point predictor: mean | median");
  cmd->add_option("--variant", cfg.variant, "MFB variant: standard | limit | predictive");
  cmd->add_option("--cp-mode", cfg.cp_mode, "auto | exact | rank-approx");
  cmd->add_flag("--record-runtime", cfg.record_runtime, "Store wall-clock time in the report");
}

// Throws CLI::ValidationError with a one-line reason.
void validate(const RunConfig& cfg) {
  auto fail = [](const std::string& msg) { throw CLI::ValidationError(msg); };
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) fail("alpha must be in (0,1)");
  for (double a : cfg.alphas) {
    if (!(a > 0.0 && a < 1.0)) fail("alpha must be in (0,1)");
  }
  if (cfg.B && *cfg.B < 100) fail("B must be at least 100");
  if (cfg.h && !(*cfg.h > 0.0)) fail("h must be positive");
  if (cfg.h0 && !(*cfg.h0 > 0.0)) fail("h0 must be positive");
  try {
    if (cfg.command == "predict" || cfg.command == "conjecture") {
      parse_method(cfg.method);
      parse_estimator_kind(cfg.estimator);
      if (cfg.estimator == "oracle") fail("estimator must be kernel or qr");
      parse_side(cfg.side);
      parse_weight_kind(cfg.weight_kernel);
      parse_cdf_kind(cfg.cdf_kernel);
      parse_functional(cfg.predictor);
      parse_scheme(cfg.scheme);
      parse_variant(cfg.variant);
      parse_cp_mode(cfg.cp_mode);
      parse_null_kind(cfg.null_kind);
    }
    if (cfg.command == "simulate-coverage" || cfg.command == "sweep") {
      const Profile profile = parse_profile(cfg.profile);
      if (profile == Profile::custom) fail("profile must be desk or paper");
      for (const auto& m : cfg.methods) {
        const Method method = parse_method(m);
        if (method == Method::t_iid || method == Method::t_ls) fail("coverage study supports qe, cp, mfb");
      }
      for (const auto& e : cfg.estimators) parse_estimator_kind(e);
      parse_functional(cfg.predictor);
      parse_variant(cfg.variant);
      parse_cp_mode(cfg.cp_mode);
      if (cfg.xf.size() > 1) fail("xf must be a single value");
      if (!cfg.xf.empty() && !(cfg.xf[0] > 0.0 && cfg.xf[0] < 1.0)) fail("xf must be in (0,1)");
      if (cfg.n < 1) fail("n must be positive");
      if (cfg.n_list.empty()) fail("n-list must not be empty");
      if (!(cfg.sigma > 0.0)) fail("sigma must be positive");
    }
    if (cfg.command == "var-backtest") {
      if (cfg.returns.empty() == (cfg.synthetic_length == 0)) {
        fail("give exactly one of --returns or --synthetic");
      }
      if (cfg.m < 2) fail("m must be at least 2");
      for (const auto& m : cfg.var_methods) {
        if (m != "QE" && m != "MFB-L1" && m != "MFB-L2" && m != "CP" && m != "oracle") {
          fail("unknown backtest method " + m);
        }
        if (m == "oracle" && cfg.synthetic_length == 0) fail("oracle method needs --synthetic");
      }
    }
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
}

std::string format_value(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

std::string format_interval(const PredictionInterval& pi) {
  return "[" + format_value(pi.lower) + ", " + format_value(pi.upper) + "]";
}

MethodSpec method_spec(const RunConfig& cfg) {
  MethodSpec spec;
  spec.method = parse_method(cfg.method);
  spec.estimator.kind = parse_estimator_kind(cfg.estimator);
  spec.estimator.kernel.weight = parse_weight_kind(cfg.weight_kernel);
  spec.estimator.kernel.cdf = parse_cdf_kind(cfg.cdf_kernel);
  spec.estimator.h = cfg.h;
  spec.estimator.h0 = cfg.h0;
  spec.cp.mode = parse_cp_mode(cfg.cp_mode);
  spec.cp.threads = cfg.threads;
  spec.mfb.predictor = parse_functional(cfg.predictor);
  spec.mfb.scheme = parse_scheme(cfg.scheme);
  spec.mfb.variant = parse_variant(cfg.variant);
  spec.mfb.B = cfg.B.value_or(1000);
  spec.mfb.threads = cfg.threads;
  return spec;
}

nlohmann::json endpoint(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

nlohmann::json interval_json(const PredictionInterval& pi) {
  nlohmann::json j = {
      {"lower", endpoint(pi.lower)},
      {"upper", endpoint(pi.upper)},
      {"level", pi.level},
      {"method", std::string(to_string(pi.method))},
      {"side", std::string(to_string(pi.side))},
      {"center", nullptr},
  };
  if (pi.center) j["center"] = *pi.center;
  return j;
}

nlohmann::json request_json(const RunConfig& cfg) {
  nlohmann::json j = {
      {"data", cfg.data},
      {"xf", cfg.xf},
      {"alpha", cfg.alpha},
      {"method", cfg.method},
      {"estimator", cfg.estimator},
      {"weight_kernel", cfg.weight_kernel},
      {"cdf_kernel", cfg.cdf_kernel},
      {"predictor", cfg.predictor},
      {"scheme", cfg.scheme},
      {"variant", cfg.variant},
      {"B", cfg.B.value_or(1000)},
      {"cp_mode", cfg.cp_mode},
      {"seed", cfg.seed},
  };
  if (cfg.h) j["h"] = *cfg.h;
  if (cfg.h0) j["h0"] = *cfg.h0;
  return j;
}

void emit(const RunConfig& cfg, const nlohmann::json& j) {
  if (!cfg.out.empty()) write_file_atomic(cfg.out, j.dump(2) + "\n");
}

int run_predict(const RunConfig& cfg, std::ostream& out) {
  const Dataset data = load_dataset_csv(cfg.data);
  const auto interval =
      build_interval(method_spec(cfg), data, cfg.xf, cfg.alpha, parse_side(cfg.side), cfg.seed);
  nlohmann::json j = {{"command", "predict"},
                      {"request", request_json(cfg)},
                      {"side", cfg.side},
                      {"interval", interval_json(interval)},
                      {"version", MFPI_VERSION}};
  emit(cfg, j);
  out << format_interval(interval) << "\n";
  return kExitOk;
}

int run_conjecture(const RunConfig& cfg, std::ostream& out) {
  const Dataset data = load_dataset_csv(cfg.data);
  const NullSpec null{parse_null_kind(cfg.null_kind), cfg.y0};
  const auto decision = test_conjecture(data, cfg.xf, cfg.alpha, null, method_spec(cfg), cfg.seed);
  nlohmann::json j = {{"command", "conjecture"},
                      {"request", request_json(cfg)},
                      {"null", {{"kind", cfg.null_kind}, {"y0", cfg.y0}}},
                      {"reject", decision.reject},
                      {"interval", interval_json(decision.interval_used)},
                      {"version", MFPI_VERSION}};
  emit(cfg, j);
  out << (decision.reject ? "reject" : "accept") << " " << format_interval(decision.interval_used)
      << "\n";
  return kExitOk;
}

SyntheticConfig synthetic_config(const RunConfig& cfg) {
  SyntheticConfig sc = SyntheticConfig::for_profile(parse_profile(cfg.profile));
  if (cfg.K || cfg.M || cfg.B) sc.profile = Profile::custom;
  if (cfg.K) sc.K = *cfg.K;
  if (cfg.M) sc.M = *cfg.M;
  if (cfg.B) sc.B = *cfg.B;
  sc.n = cfg.n;
  sc.sigma = cfg.sigma;
  sc.alpha = cfg.alpha;
  if (!cfg.xf.empty()) sc.x_f = cfg.xf[0];
  sc.estimator = parse_estimator_kind(cfg.estimators.front());
  sc.methods.clear();
  for (const auto& m : cfg.methods) sc.methods.push_back(parse_method(m));
  sc.seed = cfg.seed;
  sc.predictor = parse_functional(cfg.predictor);
  sc.variant = parse_variant(cfg.variant);
  sc.cp_mode = parse_cp_mode(cfg.cp_mode);
  return sc;
}

int run_coverage(const RunConfig& cfg, std::ostream& out) {
  const auto report = estimate_cvp(synthetic_config(cfg), {cfg.threads, cfg.record_runtime});
  const std::string path = cfg.out.empty() ? "coverage_report.json" : cfg.out;
  write_file_atomic(path, report_to_json(report).dump(2) + "\n");
  out << path;
  for (const auto& m : report.methods) out << " " << m.name << "=" << format_value(m.cvp_mean);
  out << "\n";
  return kExitOk;
}

int run_sweep(const RunConfig& cfg, std::ostream& out) {
  std::vector<EstimatorKind> kinds;
  for (const auto& e : cfg.estimators) kinds.push_back(parse_estimator_kind(e));
  const auto reports =
      sweep_sample_sizes(synthetic_config(cfg), cfg.n_list, kinds, {cfg.threads, cfg.record_runtime});
  const std::string path = cfg.out.empty() ? "sweep.csv" : cfg.out;
  write_file_atomic(path, figure_csv(reports));
  if (!cfg.json_dir.empty()) {
    std::filesystem::create_directories(cfg.json_dir);
    for (const auto& r : reports) {
      const auto name = "coverage_n" + std::to_string(r.config.n) + "_" +
                        std::string(to_string(r.config.estimator)) + ".json";
      write_file_atomic(std::filesystem::path(cfg.json_dir) / name, report_to_json(r).dump(2) + "\n");
    }
  }
  out << path << " (" << reports.size() << " reports)\n";
  return kExitOk;
}

int run_var(const RunConfig& cfg, std::ostream& out) {
  ReturnsSeries series;
  HeteroReturnsConfig hetero;
  if (!cfg.returns.empty()) {
    series = load_returns_csv(cfg.returns);
  } else {
    hetero.length = cfg.synthetic_length;
    hetero.seed = cfg.seed;
    series = gen_hetero_returns(hetero);
  }
  const auto pairs = build_var_pairs(series, cfg.m);
  VarBacktestConfig vc;
  vc.m = cfg.m;
  vc.alphas = cfg.alphas;
  vc.window = cfg.window;
  vc.methods = cfg.var_methods;
  vc.B = cfg.B.value_or(500);
  vc.seed = cfg.seed;
  OracleBound oracle;
  if (cfg.synthetic_length > 0) oracle = hetero_oracle(hetero, pairs, cfg.m);
  auto result = var_backtest(pairs, vc, oracle, {cfg.threads, false});
  result.trimmed = series.has_sessions();
  const std::string path = cfg.out.empty() ? "var_backtest.json" : cfg.out;
  write_file_atomic(path, var_report_to_json(result).dump(2) + "\n");
  out << path;
  for (const auto& r : result.rows) {
    out << " " << r.method << "@" << format_value(r.alpha) << "="
        << (r.tests ? format_value(r.acceptance_rate) : std::string("n/a"));
  }
  out << "\n";
  return kExitOk;
}

}  // namespace

ParseResult parse_args(int argc, const char* const* argv) {
  RunConfig cfg;
  CLI::App app{"Prediction intervals for model-free regression"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.set_version_flag("--version", MFPI_VERSION);
  app.require_subcommand(1);

  auto* predict = app.add_subcommand("predict", "Prediction interval at one covariate");
  add_interval_options(predict, cfg);
  predict->add_option("--side", cfg.side, "two | lower | upper");
  add_common(predict, cfg);

  auto* conj = app.add_subcommand("conjecture", "Test a conjecture about the future response");
  add_interval_options(conj, cfg);
  conj->add_option("--null", cfg.null_kind, "point | at-least | at-most");
  conj->add_option("--y0", cfg.y0, "Conjectured value")->required();
  add_common(conj, cfg);

  auto* cov = app.add_subcommand("simulate-coverage", "Coverage study on the synthetic model");
  add_coverage_options(cov, cfg);
  cov->add_option("--n", cfg.n, "Sample size");
  cov->add_option("--estimator", cfg.estimators.front(), "kernel | qr | oracle");
  add_common(cov, cfg);

  auto* sweep = app.add_subcommand("sweep", "Coverage over a list of sample sizes");
  add_coverage_options(sweep, cfg);
  sweep->add_option("--n-list", cfg.n_list, "Comma-separated sample sizes")->delimiter(',');
  sweep->add_option("--estimators", cfg.estimators, "Comma-separated estimators")->delimiter(',');
  sweep->add_option("--json-dir", cfg.json_dir, "Also write one JSON report per row here");
  add_common(sweep, cfg);

  auto* var = app.add_subcommand("var-backtest", "Rolling VaR backtest on returns");
  var->add_option("--returns", cfg.returns, "Returns CSV")->check(CLI::ExistingFile);
  var->add_option("--synthetic", cfg.synthetic_length, "Generate this many synthetic returns");
  var->add_option("--m", cfg.m, "Block length in bars");
  var->add_option("--alphas", cfg.alphas, "Comma-separated levels")->delimiter(',');
  var->add_option("--window", cfg.window, "Training pairs per prediction")->check(CLI::Range(2u, 100000u));
  var->add_option("--methods", cfg.var_methods, "QE,MFB-L1,MFB-L2,CP,oracle")->delimiter(',');
  var->add_option("--B", cfg.B, "Bootstrap replicates");
  add_common(var, cfg);

  ParseResult result;
  try {
    app.parse(argc, argv);
    for (auto* sub : {predict, conj, cov, sweep, var}) {
      if (sub->parsed()) cfg.command = sub->get_name();
    }
    validate(cfg);
  } catch (const CLI::CallForHelp&) {
    result.message = app.help();
    return result;
  } catch (const CLI::CallForAllHelp&) {
    result.message = app.help("", CLI::AppFormatMode::All);
    return result;
  } catch (const CLI::CallForVersion&) {
    result.message = std::string(MFPI_VERSION) + "\n";
    return result;
  } catch (const CLI::ParseError& e) {
    result.exit_code = kExitUsage;
    std::string msg = e.what();
    if (const auto nl = msg.find('\n'); nl != std::string::npos) msg.resize(nl);
    result.message = msg;
    return result;
  }
  result.config = cfg;
  return result;
}

int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    if (cfg.command == "predict") return run_predict(cfg, out);
    if (cfg.command == "conjecture") return run_conjecture(cfg, out);
    if (cfg.command == "simulate-coverage") return run_coverage(cfg, out);
    if (cfg.command == "sweep") return run_sweep(cfg, out);
    if (cfg.command == "var-backtest") return run_var(cfg, out);
    err << "error: unknown command " << cfg.command << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  const auto parsed = parse_args(argc, argv);
  if (!parsed.config) {
    if (parsed.exit_code == kExitOk) {
      out << parsed.message;
    } else {
      err << "error: " << parsed.message << "\n";
    }
    return parsed.exit_code;
  }
  return run(*parsed.config, out, err);
}

}  // namespace mfpi::cli
