#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cper/pipeline.hpp"

namespace cper {

// Line-delimited JSON sink with one record per completed turn. Writes go to a
// file (truncated on open, parent directories created) or, when constructed
// without a path, to an in-memory buffer.
class RunLog {
 public:
  RunLog() = default;
  explicit RunLog(const std::filesystem::path& path);

  void append(const nlohmann::json& record);

  // Lines written so far (in-memory mode only).
  std::vector<std::string> lines() const;

 private:
  mutable std::mutex mutex_;
  std::optional<std::ofstream> out_;
  std::vector<std::string> lines_;
};

// Everything needed to recompute the turn's gap diagnostics offline.
nlohmann::json turn_record(const ConversationState& state, const TurnResult& result);

struct RescoreReport {
  std::size_t records = 0;
  double max_deviation = 0.0;
  std::string worst;                  // "line N: field" of max_deviation
  std::vector<std::string> mismatches;  // records deviating beyond tolerance
};

// Recomputes uncertainty, attention, WCMI and knowledge gap from the logged
// embeddings of every record and compares them with the logged diagnostics.
// Throws InvalidInput when a record lacks embeddings or is not JSON.
RescoreReport rescore_run_log(std::istream& in, double tolerance = 1e-9);
RescoreReport rescore_run_log(const std::filesystem::path& path, double tolerance = 1e-9);

}  // namespace cper
