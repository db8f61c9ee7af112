#include "cper/eval/replay.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "cper/errors.hpp"
#include "cper/eval/metrics.hpp"
#include "cper/run_log.hpp"
#include "cper/serialization.hpp"
#include "cper/text.hpp"

namespace cper::eval {

using nlohmann::json;

namespace {

// Runs fn(i) for i in [0, n) on up to `workers` threads. The first exception
// is rethrown after all workers stop.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  const auto threads = std::min(n, std::max<std::size_t>(1, workers));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
}

StrategyKind strategy_from(const std::string& name) {
  const auto kind = parse_strategy(name);
  if (!kind) throw InvalidInput("unknown strategy '" + name + "' in responses file");
  return *kind;
}

}  // namespace

json to_json(const ResponsesFile& file) {
  json strategies = json::array();
  for (auto s : file.strategies) strategies.push_back(to_string(s));
  json dialogues = json::array();
  for (const auto& d : file.dialogues) {
    json turns = json::array();
    for (const auto& t : d.turns) {
      json responses = json::object();
      for (const auto& [kind, text] : t.responses) responses[std::string(to_string(kind))] = text;
      turns.push_back({{"turn", t.turn},
                       {"user_input", t.user_input},
                       {"history", t.history},
                       {"reference", t.reference ? json(*t.reference) : json(nullptr)},
                       {"responses", responses}});
    }
    json errors = json::object();
    for (const auto& [kind, what] : d.errors) errors[std::string(to_string(kind))] = what;
    dialogues.push_back({{"id", d.id},
                         {"domain", to_string(d.domain)},
                         {"turns", turns},
                         {"errors", errors}});
  }
  return {{"seed", file.seed}, {"strategies", strategies}, {"dialogues", dialogues}};
}

ResponsesFile responses_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("dialogues") || !doc["dialogues"].is_array()) {
    throw InvalidInput("responses file must be an object with a dialogues array");
  }
  ResponsesFile file;
  file.seed = doc.value("seed", std::uint64_t{0});
  if (doc.contains("strategies")) {
    for (const auto& s : doc["strategies"]) file.strategies.push_back(strategy_from(s.get<std::string>()));
  }
  for (const auto& d : doc["dialogues"]) {
    DialogueResponses out;
    out.id = d.at("id").get<std::string>();
    out.domain = parse_domain(d.value("domain", std::string("generic")));
    for (const auto& t : d.at("turns")) {
      TurnRecord rec;
      rec.turn = t.at("turn").get<std::size_t>();
      rec.user_input = t.at("user_input").get<std::string>();
      if (t.contains("history")) rec.history = t["history"].get<std::vector<ChatMessage>>();
      if (t.contains("reference") && t["reference"].is_string()) {
        rec.reference = t["reference"].get<std::string>();
      }
      for (const auto& [name, text] : t.at("responses").items()) {
        rec.responses[strategy_from(name)] = text.get<std::string>();
      }
      out.turns.push_back(std::move(rec));
    }
    if (d.contains("errors")) {
      for (const auto& [name, what] : d["errors"].items()) {
        out.errors[strategy_from(name)] = what.get<std::string>();
      }
    }
    file.dialogues.push_back(std::move(out));
  }
  return file;
}

ReplayOutput replay(std::span<const DialogueTranscript> transcripts, const Backends& backends,
                    const ReplayConfig& config) {
  if (config.strategies.empty()) throw InvalidInput("no strategies selected");
  ReplayOutput out;
  out.responses.seed = config.seed;
  out.responses.strategies = config.strategies;
  out.responses.dialogues.resize(transcripts.size());
  std::vector<std::vector<std::string>> logs(transcripts.size());

  parallel_for(transcripts.size(), config.workers, [&](std::size_t i) {
    const auto& t = transcripts[i];
    auto& d = out.responses.dialogues[i];
    d.id = t.id;
    d.domain = t.domain;
    for (std::size_t k = 0; k < t.user_turn_count(); ++k) {
      TurnRecord rec;
      rec.turn = k;
      rec.user_input = t.user_turn(k).text;
      rec.history = t.history_before(k);
      if (const auto* ref = t.reference_after(k)) rec.reference = ref->text;
      d.turns.push_back(std::move(rec));
    }
    auto log = std::make_shared<RunLog>();
    for (auto kind : config.strategies) {
      const auto run = run_strategy(kind, t, backends, config.strategy,
                                    kind == StrategyKind::kCper ? log : nullptr);
      for (const auto& r : run.responses) d.turns[r.turn].responses[kind] = r.text;
      if (run.error) d.errors[kind] = *run.error;
    }
    logs[i] = log->lines();
  });

  for (std::size_t i = 0; i < transcripts.size(); ++i) {
    out.run_log.insert(out.run_log.end(), logs[i].begin(), logs[i].end());
    if (!out.responses.dialogues[i].errors.empty()) ++out.failed_dialogues;
  }
  return out;
}

EvalOutput evaluate(const ResponsesFile& responses, ChatModel& judge, const EvalConfig& config) {
  std::vector<std::string> gaps;
  for (const auto& d : responses.dialogues) {
    for (const auto& t : d.turns) {
      for (auto kind : kAllStrategies) {
        if (!t.responses.contains(kind)) {
          gaps.push_back(d.id + " turn " + std::to_string(t.turn) + ": " +
                         std::string(to_string(kind)));
        }
      }
    }
  }
  if (!gaps.empty()) {
    std::string what = std::to_string(gaps.size()) + " missing strategy responses";
    what += gaps.size() > 5 ? " (first: " + gaps.front() + ")" : ": " + join(gaps, "; ");
    throw ValidationError(what, std::move(gaps));
  }

  std::vector<std::vector<JudgeVerdict>> verdicts(responses.dialogues.size());
  parallel_for(responses.dialogues.size(), config.workers, [&](std::size_t i) {
    const auto& d = responses.dialogues[i];
    for (const auto& t : d.turns) {
      JudgeRequest req{d.id, t.turn, d.domain, t.history, t.user_input, t.responses};
      verdicts[i].push_back(judge_ab(req, judge, config.judge));
    }
  });

  EvalOutput out;
  for (auto& v : verdicts) {
    out.verdicts.insert(out.verdicts.end(), std::make_move_iterator(v.begin()),
                        std::make_move_iterator(v.end()));
  }
  for (const auto& d : responses.dialogues) {
    for (const auto& t : d.turns) {
      if (!t.reference) continue;
      const auto ref = tokenize(*t.reference);
      if (ref.empty()) continue;
      for (const auto& [kind, text] : t.responses) {
        const auto cand = tokenize(text);
        out.lexical.push_back({d.id, t.turn, kind, bleu(cand, ref), rouge_l(cand, ref)});
      }
    }
  }
  out.report = build_report(out.verdicts, out.lexical);
  return out;
}

}  // namespace cper::eval
