#include "mfpi/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "mfpi/errors.hpp"

namespace mfpi {

Dataset::Dataset(std::vector<double> covariates, std::vector<double> responses, std::size_t dim)
    : x_(std::move(covariates)), y_(std::move(responses)), dim_(dim) {
  if (dim_ == 0) throw std::domain_error("dataset: covariate dimension must be >= 1");
  if (y_.empty()) throw std::domain_error("dataset: no observations");
  if (x_.size() != y_.size() * dim_) {
    throw std::domain_error("dataset: covariate rows do not match response count");
  }
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(x_.begin(), x_.end(), finite) || !std::all_of(y_.begin(), y_.end(), finite)) {
    throw std::domain_error("dataset: non-finite entry");
  }
}

Dataset Dataset::univariate(std::vector<double> x, std::vector<double> y) {
  return Dataset(std::move(x), std::move(y), 1);
}

Dataset Dataset::without(std::size_t i) const {
  std::vector<double> x;
  std::vector<double> y;
  x.reserve(x_.size() - dim_);
  y.reserve(y_.size() - 1);
  for (std::size_t r = 0; r < size(); ++r) {
    if (r == i) continue;
    auto xr = row(r);
    x.insert(x.end(), xr.begin(), xr.end());
    y.push_back(y_[r]);
  }
  return Dataset(std::move(x), std::move(y), dim_);
}

Dataset Dataset::with(std::span<const double> x, double y) const {
  if (x.size() != dim_) throw std::domain_error("dataset: appended row has wrong dimension");
  std::vector<double> xs = x_;
  xs.insert(xs.end(), x.begin(), x.end());
  std::vector<double> ys = y_;
  ys.push_back(y);
  return Dataset(std::move(xs), std::move(ys), dim_);
}

Dataset Dataset::gather(std::span<const std::size_t> rows) const {
  std::vector<double> x;
  std::vector<double> y;
  x.reserve(rows.size() * dim_);
  y.reserve(rows.size());
  for (std::size_t r : rows) {
    auto xr = row(r);
    x.insert(x.end(), xr.begin(), xr.end());
    y.push_back(y_[r]);
  }
  return Dataset(std::move(x), std::move(y), dim_);
}

Dataset Dataset::with_responses(std::vector<double> y) const {
  return Dataset(x_, std::move(y), dim_);
}

double Dataset::response_min() const { return *std::min_element(y_.begin(), y_.end()); }
double Dataset::response_max() const { return *std::max_element(y_.begin(), y_.end()); }

double Dataset::covariate_range() const {
  double widest = 0.0;
  for (std::size_t s = 0; s < dim_; ++s) {
    double lo = x_[s];
    double hi = x_[s];
    for (std::size_t r = 1; r < size(); ++r) {
      lo = std::min(lo, x_[r * dim_ + s]);
      hi = std::max(hi, x_[r * dim_ + s]);
    }
    widest = std::max(widest, hi - lo);
  }
  return widest;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_number(std::string_view text, std::size_t line_no) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw DataError("line " + std::to_string(line_no) + ": not a number: '" + std::string(text) + "'");
  }
  if (!std::isfinite(value)) {
    throw DataError("line " + std::to_string(line_no) + ": non-finite value");
  }
  return value;
}

}  // namespace

Dataset load_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("dataset is empty: " + path.string());
  const std::size_t columns = split_csv_line(line).size();
  if (columns < 2) throw DataError("dataset header needs at least x1,y columns");
  std::vector<double> x;
  std::vector<double> y;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != columns) {
      throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(columns) +
                      " fields, got " + std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c + 1 < columns; ++c) x.push_back(parse_number(fields[c], line_no));
    y.push_back(parse_number(fields.back(), line_no));
  }
  if (y.empty()) throw DataError("dataset has no rows: " + path.string());
  return Dataset(std::move(x), std::move(y), columns - 1);
}

void write_dataset_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset: " + path.string());
  for (std::size_t s = 0; s < data.dim(); ++s) out << 'x' << (s + 1) << ',';
  out << "y\n";
  out.precision(17);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.row(i)) out << v << ',';
    out << data.response(i) << '\n';
  }
}

}  // namespace mfpi
