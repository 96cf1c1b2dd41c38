#include "mfpi/conjecture.hpp"

#include <stdexcept>
#include <string>

namespace mfpi {

std::string_view to_string(NullKind kind) {
  switch (kind) {
    case NullKind::point: return "point";
    case NullKind::at_least: return "at-least";
    case NullKind::at_most: return "at-most";
  }
  return "?";
}

NullKind parse_null_kind(std::string_view name) {
  if (name == "point") return NullKind::point;
  if (name == "at-least" || name == "at_least") return NullKind::at_least;
  if (name == "at-most" || name == "at_most") return NullKind::at_most;
  throw std::invalid_argument("unknown null kind: " + std::string(name));
}

Side side_for(NullKind kind) {
  switch (kind) {
    case NullKind::point: return Side::two;
    case NullKind::at_least: return Side::lower;
    case NullKind::at_most: return Side::upper;
  }
  return Side::two;
}

Decision decide(const PredictionInterval& interval, const NullSpec& null, double alpha) {
  Decision d;
  d.interval_used = interval;
  d.alpha = alpha;
  d.method = interval.method;
  switch (null.kind) {
    case NullKind::point: d.reject = !interval.contains(null.y0); break;
    case NullKind::at_least: d.reject = null.y0 > interval.upper; break;
    case NullKind::at_most: d.reject = null.y0 < interval.lower; break;
  }
  return d;
}

Decision test_conjecture(const Dataset& data, std::span<const double> x_f, double alpha,
                         const NullSpec& null, const MethodSpec& method, std::uint64_t seed) {
  const auto interval = build_interval(method, data, x_f, alpha, side_for(null.kind), seed);
  return decide(interval, null, alpha);
}

double acceptance_rate(std::span<const Decision> decisions) {
  if (decisions.empty()) throw std::domain_error("acceptance_rate: no decisions");
  std::size_t accepted = 0;
  for (const auto& d : decisions) accepted += d.reject ? 0 : 1;
  return static_cast<double>(accepted) / static_cast<double>(decisions.size());
}

}  // namespace mfpi
