#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "mfpi/dataset.hpp"
#include "mfpi/errors.hpp"
#include "temp_dir.hpp"

using namespace mfpi;

TEST_CASE("dataset shape checks") {
  CHECK_THROWS_AS(Dataset({1.0, 2.0}, {1.0}, 1), std::domain_error);
  CHECK_THROWS_AS(Dataset({}, {}, 1), std::domain_error);
  CHECK_THROWS_AS(Dataset({1.0}, {NAN}, 1), std::domain_error);
  CHECK_THROWS_AS(Dataset({INFINITY}, {1.0}, 1), std::domain_error);
  const Dataset d({1, 2, 3, 4}, {5, 6}, 2);
  CHECK(d.size() == 2);
  CHECK(d.dim() == 2);
  CHECK(d.row(1)[0] == 3);
  CHECK(d.row(1)[1] == 4);
}

TEST_CASE("dataset row operations") {
  const Dataset d = Dataset::univariate({0.1, 0.2, 0.3}, {1, 2, 3});
  const Dataset less = d.without(1);
  CHECK(less.size() == 2);
  CHECK(less.response(1) == 3);
  const std::vector<double> x{0.9};
  const Dataset more = d.with(x, 7.0);
  CHECK(more.size() == 4);
  CHECK(more.row(3)[0] == 0.9);
  CHECK(more.response(3) == 7.0);
  const std::vector<std::size_t> rows{2, 2, 0};
  const Dataset g = d.gather(rows);
  CHECK(g.response(0) == 3);
  CHECK(g.response(1) == 3);
  CHECK(g.response(2) == 1);
  CHECK(d.response_min() == 1);
  CHECK(d.response_max() == 3);
  CHECK(d.covariate_range() == doctest::Approx(0.2));
}

TEST_CASE("dataset CSV round trip and rejection") {
  TempDir dir;
  const Dataset d({0.5, 1.5, -2.25, 3.0}, {0.125, -7.5}, 2);
  const auto path = dir.path() / "d.csv";
  write_dataset_csv(d, path);
  const Dataset back = load_dataset_csv(path);
  CHECK(back.size() == 2);
  CHECK(back.dim() == 2);
  CHECK(back.row(1)[0] == -2.25);
  CHECK(back.response(1) == -7.5);

  const auto ragged = dir.path() / "ragged.csv";
  std::ofstream(ragged) << "x,y\n1,2\n3\n";
  CHECK_THROWS_AS(load_dataset_csv(ragged), DataError);
  const auto nan = dir.path() / "nan.csv";
  std::ofstream(nan) << "x,y\n1,nan\n";
  CHECK_THROWS_AS(load_dataset_csv(nan), DataError);
  CHECK_THROWS_AS(load_dataset_csv(dir.path() / "missing.csv"), DataError);
}
