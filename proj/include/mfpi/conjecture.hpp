#pragma once

#include <cstdint>
#include <span>
#include <string_view>

#include "mfpi/dataset.hpp"
#include "mfpi/pi_methods.hpp"

namespace mfpi {

/// point: {y0}. at_least: [y0, inf). at_most: (-inf, y0].
enum class NullKind { point, at_least, at_most };

std::string_view to_string(NullKind kind);
NullKind parse_null_kind(std::string_view name);

struct NullSpec {
  NullKind kind = NullKind::point;
  double y0 = 0.0;
};

struct Decision {
  bool reject = false;
  PredictionInterval interval_used;
  double alpha = 0.05;
  Method method = Method::qe;
};

/// Interval side that tests a null: two-sided for a point, (-inf, c] for
/// at-least, [c, inf) for at-most.
Side side_for(NullKind kind);

/// Rejects when the null set misses the interval. Endpoints count as accepted.
Decision decide(const PredictionInterval& interval, const NullSpec& null, double alpha);

Decision test_conjecture(const Dataset& data, std::span<const double> x_f, double alpha,
                         const NullSpec& null, const MethodSpec& method, std::uint64_t seed);

/// Share of decisions that do not reject.
double acceptance_rate(std::span<const Decision> decisions);

}  // namespace mfpi
