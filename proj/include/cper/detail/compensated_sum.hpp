#pragma once

#include <cmath>

namespace cper::detail {

// Neumaier's variant of Kahan summation.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x)) {
      compensation_ += (sum_ - t) + x;
    } else {
      compensation_ += (x - t) + sum_;
    }
    sum_ = t;
  }

  // Adds a * b including the rounding error of the product (via fma).
  void add_product(double a, double b) {
    const double p = a * b;
    add(p);
    compensation_ += std::fma(a, b, -p);
  }

  double value() const { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

}  // namespace cper::detail
