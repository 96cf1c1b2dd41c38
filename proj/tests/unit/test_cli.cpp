#include <doctest.h>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfpi/cli.hpp"
#include "temp_dir.hpp"

using namespace mfpi::cli;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "mfpi");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = main_entry(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string constant_csv(int rows) {
  std::string s = "x1,y\n";
  for (int i = 0; i < rows; ++i) s += std::to_string(0.1 * i) + ",2.5\n";
  return s;
}

}  // namespace

TEST_CASE("argument parsing") {
  TempDir dir;
  const auto data = (dir.path() / "data.csv").string();
  write_text(data, constant_csv(5));
  const char* argv[] = {"mfpi", "predict", "--data", data.c_str(), "--xf", "0.2,0.7",
                        "--alpha", "0.1", "--method", "mfb", "--B", "200", "--threads", "2"};
  const auto parsed = parse_args(14, argv);
  REQUIRE(parsed.config.has_value());
  const auto& cfg = *parsed.config;
  CHECK(cfg.command == "predict");
  CHECK(cfg.xf == std::vector<double>{0.2, 0.7});
  CHECK(cfg.alpha == 0.1);
  CHECK(cfg.method == "mfb");
  CHECK(*cfg.B == 200);
  CHECK(cfg.threads == 2);
  CHECK(cfg.side == "two");

  const char* sweep[] = {"mfpi", "sweep", "--n-list", "50,100", "--estimators", "qr"};
  const auto s = parse_args(6, sweep);
  REQUIRE(s.config.has_value());
  CHECK(s.config->n_list == std::vector<std::size_t>{50, 100});
  CHECK(s.config->estimators == std::vector<std::string>{"qr"});
  CHECK(s.config->profile == "desk");
}

TEST_CASE("usage errors exit with code 2") {
  auto r = invoke({"simulate-coverage", "--alpha", "1.5"});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("alpha must be in (0,1)") != std::string::npos);
  CHECK(invoke({}).code == kExitUsage);
  CHECK(invoke({"frobnicate"}).code == kExitUsage);
  CHECK(invoke({"simulate-coverage", "--methods", "qe,t-iid"}).code == kExitUsage);
  CHECK(invoke({"simulate-coverage", "--B", "10"}).code == kExitUsage);
  CHECK(invoke({"var-backtest"}).code == kExitUsage);
  CHECK(invoke({"var-backtest", "--synthetic", "100", "--methods", "GARCH"}).code == kExitUsage);
  CHECK(invoke({"predict", "--xf", "0.5"}).code == kExitUsage);
}

TEST_CASE("help and version exit with code 0") {
  const auto help = invoke({"--help"});
  CHECK(help.code == kExitOk);
  CHECK(help.out.find("var-backtest") != std::string::npos);
  const auto version = invoke({"--version"});
  CHECK(version.code == kExitOk);
  CHECK(version.out == std::string(MFPI_VERSION) + "\n");
}

TEST_CASE("degenerate responses give a point interval") {
  TempDir dir;
  const auto data = dir.path() / "flat.csv";
  write_text(data, constant_csv(20));
  for (const std::string method : {"qe", "cp", "mfb"}) {
    const auto r = invoke({"predict", "--data", data.string(), "--xf", "0.5", "--method", method,
                           "--B", "100"});
    CHECK(r.code == kExitOk);
    CHECK(r.out == "[2.5, 2.5]\n");
  }
}

TEST_CASE("runtime failures exit with code 1") {
  TempDir dir;
  const auto returns = dir.path() / "r.csv";
  write_text(returns, "timestamp,log_return\n2024-01-02,0.01\n2024-01-03,0.02\n2024-01-04,-0.01\n");
  const auto r = invoke({"var-backtest", "--returns", returns.string(), "--m", "30"});
  CHECK(r.code == kExitRuntime);
  CHECK(r.err.find("need at least 4m = 120 returns") != std::string::npos);

  const auto bad = dir.path() / "bad.csv";
  write_text(bad, "x1,y\n0.1,abc\n");
  CHECK(invoke({"predict", "--data", bad.string(), "--xf", "0.5"}).code == kExitRuntime);
}

TEST_CASE("predict echoes its request") {
  TempDir dir;
  const auto data = dir.path() / "d.csv";
  std::string csv = "x1,y\n";
  for (int i = 0; i < 60; ++i) csv += std::to_string(i / 60.0) + "," + std::to_string((i * 37 % 60) / 30.0) + "\n";
  write_text(data, csv);
  const auto out = dir.path() / "pi.json";
  const auto r = invoke({"predict", "--data", data.string(), "--xf", "0.5", "--h", "0.3", "--h0",
                         "0.2", "--method", "cp", "--seed", "9", "--out", out.string()});
  REQUIRE(r.code == kExitOk);
  const auto j = nlohmann::json::parse(slurp(out));
  CHECK(j.at("command") == "predict");
  CHECK(j.at("request").at("method") == "cp");
  CHECK(j.at("request").at("h") == 0.3);
  CHECK(j.at("request").at("h0") == 0.2);
  CHECK(j.at("request").at("seed") == 9);
  CHECK(j.at("request").at("xf") == std::vector<double>{0.5});
  CHECK(j.at("interval").at("method") == "CP");
  CHECK(j.at("version") == MFPI_VERSION);

  const auto c = invoke({"conjecture", "--data", data.string(), "--xf", "0.5", "--null", "at-least",
                         "--y0", "100"});
  CHECK(c.code == kExitOk);
  CHECK(c.out.rfind("reject [", 0) == 0);
}

TEST_CASE("sweep output is reproducible") {
  TempDir dir;
  const auto a = dir.path() / "a.csv";
  const auto b = dir.path() / "b.csv";
  const std::vector<std::string> common{"sweep", "--n-list", "30,40", "--K", "3", "--M", "50",
                                        "--B", "100", "--seed", "4", "--json-dir",
                                        (dir.path() / "json").string()};
  auto args = common;
  args.insert(args.end(), {"--out", a.string()});
  REQUIRE(invoke(args).code == kExitOk);
  args = common;
  args.insert(args.end(), {"--out", b.string(), "--threads", "2"});
  REQUIRE(invoke(args).code == kExitOk);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a).rfind("n,estimator,method,coverage_mean,coverage_var_scaled,mean_length\n", 0) == 0);
  CHECK(std::filesystem::exists(dir.path() / "json" / "coverage_n40_qr.json"));
}

TEST_CASE("coverage command writes a report") {
  TempDir dir;
  const auto path = dir.path() / "cov.json";
  const auto r = invoke({"simulate-coverage", "--n", "40", "--K", "2", "--M", "20", "--methods",
                         "qe", "--out", path.string()});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.rfind(path.string() + " QE-kernel=", 0) == 0);
  const auto j = nlohmann::json::parse(slurp(path));
  CHECK(j.at("profile") == "custom");
  CHECK(j.at("config").at("K") == 2);
  CHECK(j.at("runtime_s").is_null());
}
