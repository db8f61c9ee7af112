#include "cper/run_log.hpp"

#include <cmath>
#include <limits>

#include "cper/errors.hpp"
#include "cper/serialization.hpp"

namespace cper {

using nlohmann::json;

RunLog::RunLog(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.emplace(path, std::ios::trunc);
  if (!*out_) throw InvalidInput("cannot open run log " + path.string());
}

void RunLog::append(const json& record) {
  auto line = record.dump();
  std::lock_guard lock(mutex_);
  if (out_) {
    *out_ << line << '\n';
    out_->flush();
  } else {
    lines_.push_back(std::move(line));
  }
}

std::vector<std::string> RunLog::lines() const {
  std::lock_guard lock(mutex_);
  return lines_;
}

json turn_record(const ConversationState& state, const TurnResult& result) {
  json record = result;
  record["conversation"] = state.id;
  record["params"] = state.config.params;
  record["uncertainty_source"] = state.config.uncertainty_source;
  return record;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<Embedding> embeddings(const json& record, const char* key, std::size_t line) {
  if (!record.contains(key) || !record[key].is_array()) {
    throw InvalidInput("run log line " + std::to_string(line) + " has no logged embeddings (" +
                       key + "); it was not written by the pipeline's run log");
  }
  return record[key].get<std::vector<Embedding>>();
}

}  // namespace

RescoreReport rescore_run_log(std::istream& in, double tolerance) {
  RescoreReport report;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json record = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (record.is_discarded() || !record.is_object()) {
      throw InvalidInput("run log line " + std::to_string(line) + " is not a JSON object");
    }
    const auto samples = embeddings(record, "uncertainty_embeddings", line);
    const auto prior = embeddings(record, "prior_persona_embeddings", line);
    if (!record.contains("persona") || !record["persona"].contains("embedding")) {
      throw InvalidInput("run log line " + std::to_string(line) + " has no persona embedding");
    }
    const auto current = record["persona"]["embedding"].get<Embedding>();
    const auto params = record.at("params").get<gap::GapParams>();
    const auto logged = record.at("diagnostics").get<TurnDiagnostics>();

    const auto score =
        gap::score_turn(samples, prior, current, params, gap::DegeneratePolicy::kNeutral);

    std::vector<std::pair<std::string, double>> deviations{
        {"uncertainty", std::abs(score.uncertainty - logged.uncertainty)},
        {"knowledge_gap", std::abs(score.knowledge_gap - logged.knowledge_gap)},
    };
    if (score.wcmi.has_value() != logged.wcmi.has_value()) {
      deviations.emplace_back("wcmi", kInf);
    } else if (score.wcmi) {
      deviations.emplace_back("wcmi", std::abs(*score.wcmi - *logged.wcmi));
    }
    if (score.attention.size() != logged.attention.size()) {
      deviations.emplace_back("attention", kInf);
    } else {
      double worst = 0.0;
      for (std::size_t i = 0; i < score.attention.size(); ++i) {
        worst = std::max(worst, std::abs(score.attention[i] - logged.attention[i]));
      }
      deviations.emplace_back("attention", worst);
    }

    ++report.records;
    for (const auto& [field, dev] : deviations) {
      // NaN in a tampered log counts as an infinite deviation.
      const double d = std::isnan(dev) ? kInf : dev;
      if (d > report.max_deviation) {
        report.max_deviation = d;
        report.worst = "line " + std::to_string(line) + ": " + field;
      }
      if (d > tolerance) {
        report.mismatches.push_back("line " + std::to_string(line) + ": " + field +
                                    " deviates by " + std::to_string(d));
      }
    }
  }
  return report;
}

RescoreReport rescore_run_log(const std::filesystem::path& path, double tolerance) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read run log " + path.string());
  return rescore_run_log(in, tolerance);
}

}  // namespace cper
