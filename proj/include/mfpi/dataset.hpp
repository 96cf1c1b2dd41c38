#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace mfpi {

/// n paired observations (covariate row in R^d, scalar response). Rows are
/// stored contiguously; the object is immutable once built.
class Dataset {
 public:
  Dataset() = default;
  /// `covariates` is row-major n x dim. Throws std::domain_error on shape
  /// mismatch, empty input, or non-finite entries.
  Dataset(std::vector<double> covariates, std::vector<double> responses, std::size_t dim);

  /// Single-covariate convenience constructor.
  static Dataset univariate(std::vector<double> x, std::vector<double> y);

  std::size_t size() const { return y_.size(); }
  std::size_t dim() const { return dim_; }

  std::span<const double> row(std::size_t i) const {
    return {x_.data() + i * dim_, dim_};
  }
  double response(std::size_t i) const { return y_[i]; }
  std::span<const double> responses() const { return y_; }
  std::span<const double> covariates() const { return x_; }

  /// Copy with row i removed.
  Dataset without(std::size_t i) const;
  /// Copy with one extra row appended.
  Dataset with(std::span<const double> x, double y) const;
  /// Rows gathered by index (repeats allowed).
  Dataset gather(std::span<const std::size_t> rows) const;
  /// Same covariates, new responses.
  Dataset with_responses(std::vector<double> y) const;

  double response_min() const;
  double response_max() const;
  /// Largest coordinate-wise covariate range.
  double covariate_range() const;

 private:
  std::vector<double> x_;
  std::vector<double> y_;
  std::size_t dim_ = 0;
};

/// Reads `x1,...,xd,y` with a header row. Rejects NaN/inf and ragged rows.
Dataset load_dataset_csv(const std::filesystem::path& path);

void write_dataset_csv(const Dataset& data, const std::filesystem::path& path);

}  // namespace mfpi
