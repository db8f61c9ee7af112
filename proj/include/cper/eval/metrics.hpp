#pragma once

// Sentence-level lexical overlap metrics.
//
// Tokenization: ASCII-lowercase, delete every ASCII punctuation character,
// split on whitespace.

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cper::eval {

std::vector<std::string> tokenize(std::string_view text);

// LCS-based F-measure, (1 + b^2) P R / (R + b^2 P), with b = 1.2 weighting
// recall. 0 when either side has no tokens.
double rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference,
               double beta = 1.2);
double rouge_l(std::string_view candidate, std::string_view reference);

// Sentence BLEU: clipped n-gram precisions for n = 1..4 combined by a uniform
// geometric mean, times the brevity penalty. Orders with no candidate n-grams
// (candidate shorter than n tokens) are left out of the mean; a zero match
// count is replaced by epsilon. 0 for an empty candidate or reference.
inline constexpr double kBleuEpsilon = 1e-9;
double bleu(std::span<const std::string> candidate, std::span<const std::string> reference);
double bleu(std::string_view candidate, std::string_view reference);

}  // namespace cper::eval
