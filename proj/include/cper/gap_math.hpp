#pragma once

// Persona knowledge-gap scoring.
//
// Everything here is a pure function over immutable inputs. Cosine-based
// quantities raise DegenerateVector on zero-norm inputs unless the caller
// asks for DegeneratePolicy::kNeutral, in which case the offending cosine is
// taken as 0.

#include <optional>
#include <span>
#include <vector>

#include "cper/embedding.hpp"

namespace cper::gap {

// Weights of the uncertainty (alpha) and alignment (beta) terms.
struct GapParams {
  double alpha = 0.5;
  double beta = 0.5;

  // Throws InvalidInput unless both are finite and nonnegative.
  void validate() const;

  friend bool operator==(const GapParams&, const GapParams&) = default;
};

enum class DegeneratePolicy { kThrow, kNeutral };

// (a.b) / (|a||b|), clamped to [-1, 1].
double cosine_similarity(const Embedding& a, const Embedding& b,
                         DegeneratePolicy policy = DegeneratePolicy::kThrow);

// Spread of n >= 2 sample embeddings:
//
//   u = 1/(n(n-1)) * sum_{i<j} (1 - cos(e_i, e_j))
//
// The sum runs over unordered pairs while the denominator counts ordered
// ones, so u is half the mean pairwise dissimilarity and lies in [0, 1].
double uncertainty(std::span<const Embedding> samples,
                   DegeneratePolicy policy = DegeneratePolicy::kThrow);

// Softmax over cos(history_i, current), in history order.
// Throws EmptyHistory when history is empty.
std::vector<double> attention_weights(
    std::span<const Embedding> history, const Embedding& current,
    DegeneratePolicy policy = DegeneratePolicy::kThrow);

// sum_i weights_i * history_i, accumulated per component with compensation.
Embedding attended_persona(std::span<const Embedding> history,
                           std::span<const double> weights);

// Alignment of the current persona with the attended history vector.
double wcmi(const Embedding& current, const Embedding& attended,
            DegeneratePolicy policy = DegeneratePolicy::kThrow);

// 1 + (alpha * u - beta * wcmi), in [1 - beta, 1 + alpha + beta].
double knowledge_gap(double u, double wcmi_value, const GapParams& params);

// Full per-turn score. `prior_personas` are the persona embeddings of earlier
// turns; when empty, wcmi is absent and the alignment term drops out.
struct GapScore {
  double uncertainty = 0.0;
  std::optional<double> wcmi;
  double knowledge_gap = 1.0;
  std::vector<double> attention;
};

GapScore score_turn(std::span<const Embedding> samples,
                    std::span<const Embedding> prior_personas,
                    const Embedding& current_persona, const GapParams& params,
                    DegeneratePolicy policy = DegeneratePolicy::kThrow);

}  // namespace cper::gap
