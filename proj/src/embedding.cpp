#include "cper/embedding.hpp"

#include <algorithm>
#include <cmath>

#include "cper/detail/compensated_sum.hpp"
#include "cper/errors.hpp"

namespace cper {

namespace {

void check(const std::vector<double>& values) {
  if (values.empty()) throw InvalidInput("embedding must have dimension >= 1");
  for (double v : values) {
    if (!std::isfinite(v)) throw InvalidInput("embedding component is not finite");
  }
}

double max_abs(std::span<const double> values) {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::fabs(v));
  return m;
}

}  // namespace

Embedding::Embedding(std::vector<double> values) : values_(std::move(values)) {
  check(values_);
}

Embedding::Embedding(std::initializer_list<double> values) : values_(values) {
  check(values_);
}

double norm(const Embedding& v) {
  // Scale by the largest magnitude so tiny or huge components neither
  // underflow nor overflow when squared.
  const double scale = max_abs(v.values());
  if (scale == 0.0) return 0.0;
  detail::CompensatedSum sum;
  for (double x : v.values()) {
    const double s = x / scale;
    sum.add(s * s);
  }
  return scale * std::sqrt(sum.value());
}

bool is_degenerate(const Embedding& v) { return max_abs(v.values()) == 0.0; }

}  // namespace cper
