#pragma once

#include <stdexcept>
#include <string>

namespace mfpi {

// Domain errors (invalid probabilities, bandwidths, empty inputs) are reported
// as std::domain_error. The classes below cover runtime failures that carry
// their own diagnostics.

/// Kernel weights vanish at the requested covariate.
class OutOfSupportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Quantile-regression solver did not reach its objective tolerance.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No bandwidth pair on the grid produced a usable model.
class SelectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CpEmptyError : public std::runtime_error {
 public:
  CpEmptyError() : std::runtime_error("CP acceptance region empty; enlarge grid") {}
};

/// Too many bootstrap replicates could not be refitted at the future covariate.
class BootstrapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed CSV input.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mfpi
