#include <doctest.h>

#include <cmath>
#include <fstream>
#include <vector>

#include "mfpi/errors.hpp"
#include "mfpi/experiments.hpp"
#include "temp_dir.hpp"

using namespace mfpi;

namespace {

ReturnsSeries plain_series(std::vector<double> returns) {
  ReturnsSeries s;
  for (std::size_t i = 0; i < returns.size(); ++i) s.timestamps.push_back(static_cast<std::int64_t>(i));
  s.returns = std::move(returns);
  return s;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_CASE("block statistics") {
  const std::vector<double> block{0.01, -0.02, 0.03};
  CHECK(realized_volatility(block) == doctest::Approx(0.0014));
  CHECK(worst_cumulative_return(block) == doctest::Approx(-0.01));
  CHECK(worst_cumulative_return(std::vector<double>{0.02, 0.01}) == doctest::Approx(0.02));
  CHECK(realized_volatility(std::vector<double>{}) == 0.0);
  CHECK_THROWS_AS(worst_cumulative_return(std::vector<double>{}), std::domain_error);
}

TEST_CASE("pairs from a series of exactly 4m returns") {
  const std::size_t m = 3;
  std::vector<double> x(4 * m);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.001 * static_cast<double>(i + 1);
  const auto pairs = build_var_pairs(plain_series(x), m);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].start == 0);
  CHECK(pairs[1].start == 2 * m);
  CHECK(pairs[0].V == doctest::Approx(1e-6 * (1 + 4 + 9)));
  CHECK(pairs[0].T == doctest::Approx(0.004));
  CHECK(pairs[1].V == doctest::Approx(1e-6 * (49 + 64 + 81)));
  CHECK(pairs[1].T == doctest::Approx(0.010));
}

TEST_CASE("pairs occupy disjoint blocks") {
  HeteroReturnsConfig hc;
  hc.length = 1003;
  const auto series = gen_hetero_returns(hc);
  for (std::size_t m : {2, 5, 10, 17}) {
    const auto pairs = build_var_pairs(series, m);
    CHECK(pairs.size() == series.returns.size() / (2 * m));
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      CHECK(pairs[k].k == k);
      CHECK(pairs[k].start == 2 * k * m);
      CHECK(pairs[k].start + 2 * m <= series.returns.size());
      if (k > 0) CHECK(pairs[k - 1].start + 2 * m <= pairs[k].start);
      const std::span<const double> all(series.returns);
      CHECK(pairs[k].V == realized_volatility(all.subspan(pairs[k].start, m)));
      CHECK(pairs[k].T == worst_cumulative_return(all.subspan(pairs[k].start + m, m)));
    }
  }
}

TEST_CASE("pair construction preconditions") {
  CHECK_THROWS_AS(build_var_pairs(plain_series(std::vector<double>(11, 0.0)), 3), std::domain_error);
  CHECK_THROWS_AS(build_var_pairs(plain_series(std::vector<double>(100, 0.0)), 1), std::domain_error);
  CHECK_NOTHROW(build_var_pairs(plain_series(std::vector<double>(12, 0.0)), 3));
}

TEST_CASE("constant returns are always accepted") {
  const auto pairs = build_var_pairs(plain_series(std::vector<double>(400, 0.001)), 5);
  VarBacktestConfig cfg;
  cfg.m = 5;
  cfg.window = 20;
  cfg.B = 100;
  const auto result = var_backtest(pairs, cfg);
  CHECK(result.pairs == 40);
  CHECK(result.rows.size() == cfg.alphas.size() * cfg.methods.size());
  for (const auto& row : result.rows) {
    CHECK(row.skipped + row.tests == 20);
    CHECK(row.accepts == row.tests);
    if (row.tests) CHECK(row.acceptance_rate == 1.0);
  }
}

TEST_CASE("oracle bound is calibrated") {
  HeteroReturnsConfig hc;
  hc.length = 40000;
  hc.seed = 5;
  const std::size_t m = 10;
  const auto series = gen_hetero_returns(hc);
  const auto pairs = build_var_pairs(series, m);
  VarBacktestConfig cfg;
  cfg.m = m;
  cfg.window = 2;
  cfg.methods = {"oracle"};
  cfg.alphas = {0.05, 0.1};
  const auto result = var_backtest(pairs, cfg, hetero_oracle(hc, pairs, m));
  for (const auto& row : result.rows) {
    REQUIRE(row.tests == pairs.size() - 2);
    const double p = 1.0 - row.alpha;
    const double se = std::sqrt(p * (1 - p) / static_cast<double>(row.tests));
    CHECK(std::abs(row.acceptance_rate - p) <= 3.0 * se);
  }
}

TEST_CASE("hetero generator scale path") {
  HeteroReturnsConfig hc;
  CHECK(hetero_scale(hc, 0) == doctest::Approx(0.01));
  CHECK(hetero_scale(hc, 300) == doctest::Approx(0.016));
  CHECK(hetero_scale(hc, 900) == doctest::Approx(0.004));
  hc.amplitude = 1.0;
  CHECK_THROWS_AS(gen_hetero_returns(hc), std::domain_error);
}

TEST_CASE("backtest preconditions") {
  const auto pairs = build_var_pairs(plain_series(std::vector<double>(40, 0.001)), 2);
  VarBacktestConfig cfg;
  cfg.window = 10;
  CHECK_THROWS_WITH_AS(var_backtest(pairs, cfg), doctest::Contains("insufficient pairs"),
                       std::domain_error);
  cfg.window = 5;
  cfg.methods = {"oracle"};
  CHECK_THROWS_AS(var_backtest(pairs, cfg), std::domain_error);
  cfg.methods = {"GARCH"};
  CHECK_THROWS_AS(var_backtest(pairs, cfg), std::domain_error);
  cfg.methods = {"QE"};
  cfg.alphas = {1.0};
  CHECK_THROWS_AS(var_backtest(pairs, cfg), std::domain_error);
}

TEST_CASE("timestamps") {
  CHECK(parse_iso8601("1970-01-01") == 0);
  CHECK(parse_iso8601("1970-01-02T00:00:01Z") == 86401);
  CHECK(parse_iso8601("2024-02-29 09:30") == 1709199000);
  CHECK(parse_iso8601("2024-02-29T09:30:15") == 1709199015);
  CHECK_THROWS_AS(parse_iso8601("2023-02-29"), DataError);
  CHECK_THROWS_AS(parse_iso8601("2024-01-01T25:00"), DataError);
  CHECK_THROWS_AS(parse_iso8601("yesterday"), DataError);
}

TEST_CASE("loading prices and log returns") {
  TempDir dir;
  const auto prices = dir.path() / "ABC.csv";
  write_text(prices, "timestamp,price\n2024-01-02,100\n2024-01-03,110\n2024-01-04,99\n");
  const auto a = load_returns_csv(prices);
  REQUIRE(a.returns.size() == 2);
  CHECK(a.returns[0] == doctest::Approx(std::log(1.1)));
  CHECK(a.returns[1] == doctest::Approx(std::log(99.0 / 110.0)));
  CHECK_FALSE(a.has_sessions());
  CHECK(a.symbol == "ABC");
  CHECK(a.bar_interval == "86400s");

  const auto logs = dir.path() / "r.csv";
  write_text(logs, "timestamp,log_return\n2024-01-02T09:30,0.01\n2024-01-02T09:31,-0.02\r\n"
                   "2024-01-03T09:30,0.005\n");
  const auto b = load_returns_csv(logs);
  REQUIRE(b.returns.size() == 3);
  CHECK(b.returns[1] == -0.02);
  REQUIRE(b.has_sessions());
  CHECK(b.session[0] == b.session[1]);
  CHECK(b.session[1] + 1 == b.session[2]);
  CHECK(b.bar_interval == "60s");

  const auto bad = dir.path() / "bad.csv";
  write_text(bad, "time,price\n");
  CHECK_THROWS_AS(load_returns_csv(bad), DataError);
  write_text(bad, "timestamp,price\n2024-01-02,100\n2024-01-03,-1\n");
  CHECK_THROWS_AS(load_returns_csv(bad), DataError);
  write_text(bad, "timestamp,price\n2024-01-03,100\n2024-01-02,101\n");
  CHECK_THROWS_AS(load_returns_csv(bad), DataError);
  write_text(bad, "timestamp,log_return\n2024-01-03,abc\n");
  CHECK_THROWS_AS(load_returns_csv(bad), DataError);
  CHECK_THROWS_AS(load_returns_csv(dir.path() / "none.csv"), DataError);
}

TEST_CASE("session trimming") {
  ReturnsSeries s;
  // Two sessions of 14 bars and one of 10 bars.
  const std::vector<std::size_t> lengths{14, 10, 14};
  std::int64_t day = 0;
  double value = 0.0;
  for (std::size_t len : lengths) {
    for (std::size_t i = 0; i < len; ++i) {
      s.timestamps.push_back(day * 86400 + 34200 + 60 * static_cast<std::int64_t>(i));
      s.returns.push_back(value += 1.0);
      s.session.push_back(day);
    }
    ++day;
  }
  const auto t = trim_sessions(s);
  REQUIRE(t.returns.size() == 8);
  CHECK(t.returns.front() == 6.0);
  CHECK(t.returns[3] == 9.0);
  CHECK(t.returns[4] == 30.0);
  CHECK(t.session.back() == 2);
  CHECK(trim_sessions(plain_series({1.0, 2.0})).returns.size() == 2);
}

TEST_CASE("backtest report JSON") {
  const auto pairs = build_var_pairs(plain_series(std::vector<double>(200, 0.001)), 5);
  VarBacktestConfig cfg;
  cfg.m = 5;
  cfg.window = 15;
  cfg.methods = {"QE"};
  cfg.alphas = {0.05};
  const auto j = nlohmann::json::parse(var_report_to_json(var_backtest(pairs, cfg)).dump());
  CHECK(j.at("pairs") == 20);
  CHECK(j.at("config").at("m") == 5);
  CHECK(j.at("config").at("window") == 15);
  CHECK(j.at("version") == MFPI_VERSION);
  const auto& row = j.at("rows").at(0);
  CHECK(row.at("method") == "QE");
  CHECK(row.at("tests").get<std::size_t>() + row.at("skipped").get<std::size_t>() == 5);
}
