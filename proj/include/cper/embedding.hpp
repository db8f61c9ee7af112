#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace cper {

// Fixed-dimension real vector for one text span. Always non-empty and finite.
class Embedding {
 public:
  Embedding() = delete;
  explicit Embedding(std::vector<double> values);
  Embedding(std::initializer_list<double> values);

  std::size_t dimension() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const Embedding&, const Embedding&) = default;

 private:
  std::vector<double> values_;
};

// Euclidean norm with compensated accumulation.
double norm(const Embedding& v);

// True when the norm is too small for a meaningful cosine.
bool is_degenerate(const Embedding& v);

}  // namespace cper
