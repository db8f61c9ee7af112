#include "cper/gap_math.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cper/detail/compensated_sum.hpp"
#include "cper/errors.hpp"

namespace cper::gap {

namespace {

void require_same_dimension(const Embedding& a, const Embedding& b) {
  if (a.dimension() != b.dimension()) {
    throw InvalidInput("dimension mismatch: " + std::to_string(a.dimension()) + " vs " +
                       std::to_string(b.dimension()));
  }
}

double dot(const Embedding& a, const Embedding& b) {
  detail::CompensatedSum sum;
  for (std::size_t k = 0; k < a.dimension(); ++k) sum.add_product(a[k], b[k]);
  return sum.value();
}

}  // namespace

void GapParams::validate() const {
  if (!std::isfinite(alpha) || alpha < 0.0) throw InvalidInput("alpha must be finite and >= 0");
  if (!std::isfinite(beta) || beta < 0.0) throw InvalidInput("beta must be finite and >= 0");
}

double cosine_similarity(const Embedding& a, const Embedding& b, DegeneratePolicy policy) {
  require_same_dimension(a, b);
  if (is_degenerate(a) || is_degenerate(b)) {
    if (policy == DegeneratePolicy::kNeutral) return 0.0;
    throw DegenerateVector("cosine similarity of a zero-norm vector");
  }
  // Normalize first so the dot product cannot overflow.
  const double na = norm(a);
  const double nb = norm(b);
  detail::CompensatedSum sum;
  for (std::size_t k = 0; k < a.dimension(); ++k) sum.add_product(a[k] / na, b[k] / nb);
  return std::clamp(sum.value(), -1.0, 1.0);
}

double uncertainty(std::span<const Embedding> samples, DegeneratePolicy policy) {
  if (samples.size() < 2) throw InvalidInput("uncertainty needs at least two samples");
  for (const auto& e : samples) require_same_dimension(samples.front(), e);

  detail::CompensatedSum total;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t j = i + 1; j < samples.size(); ++j) {
      total.add(1.0 - cosine_similarity(samples[i], samples[j], policy));
    }
  }
  const double n = static_cast<double>(samples.size());
  return std::clamp(total.value() / (n * (n - 1.0)), 0.0, 1.0);
}

std::vector<double> attention_weights(std::span<const Embedding> history,
                                      const Embedding& current, DegeneratePolicy policy) {
  if (history.empty()) throw EmptyHistory("attention over an empty persona history");

  std::vector<double> scores;
  scores.reserve(history.size());
  for (const auto& p : history) scores.push_back(cosine_similarity(p, current, policy));

  // Scores live in [-1, 1]; shifting by the max only guards against
  // exp() precision loss and leaves the softmax unchanged.
  const double shift = *std::max_element(scores.begin(), scores.end());
  detail::CompensatedSum denominator;
  for (auto& s : scores) {
    s = std::exp(s - shift);
    denominator.add(s);
  }
  const double z = denominator.value();
  for (auto& s : scores) s /= z;
  return scores;
}

Embedding attended_persona(std::span<const Embedding> history, std::span<const double> weights) {
  if (history.size() != weights.size()) {
    throw InvalidInput("history and weights differ in length");
  }
  if (history.empty()) throw EmptyHistory("attended persona of an empty history");
  for (const auto& p : history) require_same_dimension(history.front(), p);

  std::vector<double> out(history.front().dimension());
  for (std::size_t k = 0; k < out.size(); ++k) {
    detail::CompensatedSum sum;
    for (std::size_t i = 0; i < history.size(); ++i) sum.add_product(weights[i], history[i][k]);
    out[k] = sum.value();
  }
  return Embedding(std::move(out));
}

double wcmi(const Embedding& current, const Embedding& attended, DegeneratePolicy policy) {
  return cosine_similarity(current, attended, policy);
}

double knowledge_gap(double u, double wcmi_value, const GapParams& params) {
  params.validate();
  if (!(u >= 0.0 && u <= 1.0)) throw InvalidInput("uncertainty outside [0, 1]");
  if (!(wcmi_value >= -1.0 && wcmi_value <= 1.0)) throw InvalidInput("wcmi outside [-1, 1]");
  return 1.0 + (params.alpha * u - params.beta * wcmi_value);
}

GapScore score_turn(std::span<const Embedding> samples, std::span<const Embedding> prior_personas,
                    const Embedding& current_persona, const GapParams& params,
                    DegeneratePolicy policy) {
  GapScore s;
  s.uncertainty = uncertainty(samples, policy);
  if (!prior_personas.empty()) {
    s.attention = attention_weights(prior_personas, current_persona, policy);
    s.wcmi = wcmi(current_persona, attended_persona(prior_personas, s.attention), policy);
  }
  s.knowledge_gap = knowledge_gap(s.uncertainty, s.wcmi.value_or(0.0), params);
  return s;
}

}  // namespace cper::gap
