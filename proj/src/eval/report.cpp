#include "cper/eval/report.hpp"

#include <map>
#include <set>
#include <sstream>

#include "cper/text.hpp"

namespace cper::eval {

using nlohmann::json;

namespace {

std::size_t slot(StrategyKind kind) { return static_cast<std::size_t>(kind); }

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string cell(const std::optional<double>& v, bool percent) {
  if (!v) return "n/a";
  return percent ? fixed(*v * 100.0, 2) + "%" : fixed(*v, 4);
}

}  // namespace

EvalReport build_report(std::span<const JudgeVerdict> verdicts,
                        std::span<const LexicalScore> lexical) {
  EvalReport report;
  for (auto kind : kAllStrategies) report.rows[slot(kind)].strategy = kind;
  report.verdicts = verdicts.size();

  std::set<std::pair<std::string, std::size_t>> turns;
  std::map<std::string, std::array<std::size_t, 5>> per_dialogue;
  for (const auto& v : verdicts) {
    turns.emplace(v.dialogue_id, v.turn);
    auto& counts = per_dialogue[v.dialogue_id];
    if (!v.best) {
      ++report.abstentions;
      continue;
    }
    ++report.rows[slot(*v.best)].wins;
    ++counts[slot(*v.best)];
  }
  for (const auto& s : lexical) turns.emplace(s.dialogue_id, s.turn);

  std::set<std::string> dialogues;
  for (const auto& [id, turn] : turns) dialogues.insert(id);
  report.dialogues = dialogues.size();
  report.turns = turns.size();

  const std::size_t decided = report.verdicts - report.abstentions;
  report.abstention_only = decided == 0;
  if (!report.abstention_only) {
    std::size_t counted_dialogues = 0;
    std::array<double, 5> share_sum{};
    for (const auto& [id, counts] : per_dialogue) {
      std::size_t total = 0;
      for (auto c : counts) total += c;
      if (total == 0) continue;
      ++counted_dialogues;
      for (std::size_t k = 0; k < 5; ++k) {
        share_sum[k] += static_cast<double>(counts[k]) / static_cast<double>(total);
      }
    }
    for (std::size_t k = 0; k < 5; ++k) {
      auto& row = report.rows[k];
      row.turn_rate = static_cast<double>(row.wins) / static_cast<double>(decided);
      row.dialogue_rate = share_sum[k] / static_cast<double>(counted_dialogues);
    }
  }

  std::array<double, 5> bleu_sum{}, rouge_sum{};
  for (const auto& s : lexical) {
    auto& row = report.rows[slot(s.strategy)];
    ++row.scored_turns;
    bleu_sum[slot(s.strategy)] += s.bleu;
    rouge_sum[slot(s.strategy)] += s.rouge_l;
  }
  for (std::size_t k = 0; k < 5; ++k) {
    auto& row = report.rows[k];
    if (row.scored_turns == 0) continue;
    row.mean_bleu = bleu_sum[k] / static_cast<double>(row.scored_turns);
    row.mean_rouge_l = rouge_sum[k] / static_cast<double>(row.scored_turns);
  }
  return report;
}

json to_json(const EvalReport& report) {
  json rows = json::array();
  for (const auto& row : report.rows) {
    rows.push_back({{"strategy", to_string(row.strategy)},
                    {"wins", row.wins},
                    {"turn_rate", optional_number(row.turn_rate)},
                    {"dialogue_rate", optional_number(row.dialogue_rate)},
                    {"mean_bleu", optional_number(row.mean_bleu)},
                    {"mean_rouge_l", optional_number(row.mean_rouge_l)},
                    {"scored_turns", row.scored_turns}});
  }
  return {{"strategies", rows},
          {"verdicts", report.verdicts},
          {"abstentions", report.abstentions},
          {"dialogues", report.dialogues},
          {"turns", report.turns},
          {"abstention_only", report.abstention_only}};
}

std::string to_table(const EvalReport& report) {
  const std::vector<std::string> header{"strategy", "wins", "pref/turn", "pref/dialogue",
                                        "BLEU", "ROUGE-L"};
  std::vector<std::vector<std::string>> rows{header};
  for (const auto& row : report.rows) {
    rows.push_back({std::string(to_string(row.strategy)), std::to_string(row.wins),
                    cell(row.turn_rate, true), cell(row.dialogue_rate, true),
                    cell(row.mean_bleu, false), cell(row.mean_rouge_l, false)});
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::ostringstream out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < rows[i].size(); ++c) {
      const auto& text = rows[i][c];
      const auto pad = std::string(width[c] - text.size(), ' ');
      if (c) out << "  ";
      // Names left-aligned, numbers right-aligned.
      out << (c == 0 ? text + pad : pad + text);
    }
    out << '\n';
    if (i == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w;
      out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
    }
  }
  out << "dialogues: " << report.dialogues << "  turns: " << report.turns
      << "  verdicts: " << report.verdicts << "  abstentions: " << report.abstentions;
  if (report.abstention_only) out << "  (abstentions only; no preference rates)";
  out << '\n';
  return out.str();
}

}  // namespace cper::eval
