#include <gtest/gtest.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <filesystem>
#include <set>
#include <sstream>

#include "cper/errors.hpp"
#include "cper/eval/judge.hpp"
#include "cper/eval/replay.hpp"
#include "cper/eval/report.hpp"
#include "cper/eval/strategies.hpp"
#include "cper/mock_backend.hpp"
#include "cper/run_log.hpp"
#include "cper/text.hpp"

namespace cper::eval {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

const fs::path kTranscripts = fs::path(CPER_FIXTURES_DIR) / "transcripts";

DialogueTranscript two_turn_dialogue() {
  return normalize("t", Domain::kMovies,
                   {{Speaker::kUser, "I like slow science fiction"},
                    {Speaker::kAssistant, "REFERENCE-ZERO"},
                    {Speaker::kUser, "Something for tonight?"},
                    {Speaker::kAssistant, "REFERENCE-ONE"}});
}

Backends mock_backends(std::uint64_t seed) {
  return {std::make_shared<MockChatBackend>(seed), std::make_shared<MockEmbeddingBackend>(seed)};
}

// Every call fails as an unreachable provider would.
class DownModel : public ChatModel {
 public:
  std::string name() const override { return "down"; }

 protected:
  std::string do_complete(std::span<const ChatMessage>, const GenerationConfig&,
                          std::size_t) override {
    throw BackendUnavailable("provider down");
  }
};

// Strategies -----------------------------------------------------------------

TEST(Strategies, NamesRoundTripAndAliases) {
  for (auto k : kAllStrategies) EXPECT_EQ(parse_strategy(to_string(k)), k);
  EXPECT_EQ(parse_strategy("CoT"), StrategyKind::kChainOfThought);
  EXPECT_EQ(parse_strategy("0S"), StrategyKind::kZeroShot);
  EXPECT_EQ(parse_strategy("rot"), StrategyKind::kRationaleOfThought);
  EXPECT_EQ(parse_strategy("SR"), StrategyKind::kSelfRefine);
  EXPECT_FALSE(parse_strategy("gpt"));
  EXPECT_EQ(parse_strategy_list("all").size(), 5u);
  EXPECT_EQ(parse_strategy_list("cper, cot"),
            (std::vector<StrategyKind>{StrategyKind::kCper, StrategyKind::kChainOfThought}));
  EXPECT_THROW(parse_strategy_list("cper,nope"), InvalidInput);
}

TEST(Strategies, SingleCallBaselines) {
  const auto d = two_turn_dialogue();
  for (auto kind : {StrategyKind::kZeroShot, StrategyKind::kChainOfThought,
                    StrategyKind::kRationaleOfThought}) {
    auto b = mock_backends(1);
    const auto run = run_strategy(kind, d, b, {});
    ASSERT_EQ(run.responses.size(), 2u) << to_string(kind);
    EXPECT_FALSE(run.error);
    EXPECT_EQ(std::static_pointer_cast<MockChatBackend>(b.chat)->call_count(), 2u);
    for (const auto& r : run.responses) EXPECT_FALSE(r.text.empty());
  }
}

TEST(Strategies, SelfRefineMakesOnePlusTwoCallsPerIteration) {
  const auto d = two_turn_dialogue();
  for (int iterations : {1, 2, 3}) {
    auto b = mock_backends(1);
    StrategyConfig cfg;
    cfg.refine_iterations = iterations;
    const auto run = run_strategy(StrategyKind::kSelfRefine, d, b, cfg);
    ASSERT_EQ(run.responses.size(), 2u);
    EXPECT_EQ(std::static_pointer_cast<MockChatBackend>(b.chat)->call_count(),
              2u * static_cast<std::size_t>(1 + 2 * iterations));
  }
  StrategyConfig bad;
  bad.refine_iterations = 0;
  auto b = mock_backends(1);
  EXPECT_THROW(run_strategy(StrategyKind::kSelfRefine, d, b, bad), InvalidInput);
}

TEST(Strategies, BaselinesAreTeacherForced) {
  const auto d = two_turn_dialogue();
  auto b = mock_backends(1);
  auto chat = std::static_pointer_cast<MockChatBackend>(b.chat);
  run_strategy(StrategyKind::kZeroShot, d, b, {});
  const auto prompts = chat->prompts();
  ASSERT_EQ(prompts.size(), 2u);
  EXPECT_FALSE(contains(prompts[0], "REFERENCE-ZERO"));
  EXPECT_TRUE(contains(prompts[1], "REFERENCE-ZERO"));
  EXPECT_TRUE(contains(prompts[1], "I like slow science fiction"));
}

TEST(Strategies, CperMatchesDirectPipelineWithTeacherForcing) {
  const auto d = two_turn_dialogue();
  auto b = mock_backends(9);
  const auto run = run_strategy(StrategyKind::kCper, d, b, {});
  ASSERT_EQ(run.responses.size(), 2u);

  auto direct = mock_backends(9);
  Pipeline pipeline(direct.chat, direct.embedder);
  ConversationState state;
  state.id = d.id;
  const auto r0 = pipeline.run_turn(state, d.user_turn(0).text);
  state.chat_history.back().content = "REFERENCE-ZERO";
  const auto r1 = pipeline.run_turn(state, d.user_turn(1).text);
  EXPECT_EQ(run.responses[0].text, r0.final_response);
  EXPECT_EQ(run.responses[1].text, r1.final_response);

  // The turn-1 prompts saw the reference reply, not the generated one.
  bool saw_reference = false;
  for (const auto& p : std::static_pointer_cast<MockChatBackend>(b.chat)->prompts()) {
    saw_reference = saw_reference || contains(p, "REFERENCE-ZERO");
    EXPECT_FALSE(contains(p, r0.final_response) && contains(p, "Something for tonight?"));
  }
  EXPECT_TRUE(saw_reference);
}

TEST(Strategies, BackendFailureIsRecordedNotThrown) {
  const auto d = two_turn_dialogue();
  Backends b{std::make_shared<DownModel>(), std::make_shared<MockEmbeddingBackend>(0)};
  for (auto kind : kAllStrategies) {
    const auto run = run_strategy(kind, d, b, {});
    EXPECT_TRUE(run.error) << to_string(kind);
    EXPECT_TRUE(run.responses.empty());
  }
}

// Judge ----------------------------------------------------------------------

JudgeRequest full_request(std::string id = "d", std::size_t turn = 0) {
  JudgeRequest r;
  r.dialogue_id = std::move(id);
  r.turn = turn;
  r.user_input = "What should I watch?";
  for (auto k : kAllStrategies) r.responses[k] = "RESPONSE-" + std::string(to_string(k));
  return r;
}

TEST(Judge, OptionOrderIsASeededPermutation) {
  const auto a = option_order(5, "dialogue", 3);
  EXPECT_EQ(a, option_order(5, "dialogue", 3));
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, std::vector<StrategyKind>(kAllStrategies.begin(), kAllStrategies.end()));

  std::set<std::vector<StrategyKind>> seen;
  for (std::size_t t = 0; t < 200; ++t) seen.insert(option_order(5, "dialogue", t));
  EXPECT_GT(seen.size(), 60u);
  EXPECT_NE(option_order(5, "dialogue", 3), option_order(6, "dialogue", 3));
}

TEST(Judge, ResolveChoice) {
  const std::vector<StrategyKind> order{StrategyKind::kCper, StrategyKind::kZeroShot,
                                        StrategyKind::kSelfRefine, StrategyKind::kChainOfThought,
                                        StrategyKind::kRationaleOfThought};
  EXPECT_EQ(resolve_choice("option 1", order), StrategyKind::kCper);
  EXPECT_EQ(resolve_choice("Option 3.", order), StrategyKind::kSelfRefine);
  EXPECT_EQ(resolve_choice(" 5 ", order), StrategyKind::kRationaleOfThought);
  EXPECT_EQ(resolve_choice("2)", order), StrategyKind::kZeroShot);
  EXPECT_EQ(resolve_choice("CoT response", order), StrategyKind::kChainOfThought);
  EXPECT_EQ(resolve_choice("cper", order), StrategyKind::kCper);
  EXPECT_FALSE(resolve_choice("option 6", order));
  EXPECT_FALSE(resolve_choice("0", order));
  EXPECT_FALSE(resolve_choice("none of them", order));
  EXPECT_FALSE(resolve_choice("", order));
}

TEST(Judge, PromptIsBlind) {
  const auto req = full_request();
  const auto order = option_order(0, req.dialogue_id, req.turn);
  const auto prompt = judge_prompt(req, order, {});
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto line = "option " + std::to_string(k + 1) + " : RESPONSE-" + std::string(to_string(order[k]));
    EXPECT_TRUE(contains(prompt, line)) << line;
  }
  for (const char* label : {"zero-shot", "chain-of-thought", "self-refine", "rationale-of-thought"}) {
    // Labels appear only inside the response bodies used here.
    const auto body = std::string("RESPONSE-") + label;
    std::string stripped = prompt;
    for (auto pos = stripped.find(body); pos != std::string::npos; pos = stripped.find(body)) {
      stripped.erase(pos, body.size());
    }
    EXPECT_FALSE(contains(stripped, label)) << label;
  }
  auto support = req;
  support.domain = Domain::kSupport;
  EXPECT_NE(judge_prompt(support, order, {}), prompt);
}

TEST(Judge, VerdictMapsBackThroughOrder) {
  auto chat = std::make_shared<MockChatBackend>(0);
  chat->set_interceptor([](PromptKind, std::string_view, std::size_t) -> std::optional<std::string> {
    return R"({"Thought_process": "weighing", "best_response": "Option 4"})";
  });
  const auto v = judge_ab(full_request("x", 7), *chat, {});
  ASSERT_TRUE(v.best);
  EXPECT_EQ(*v.best, v.order[3]);
  EXPECT_EQ(v.thought_process, "weighing");
  EXPECT_EQ(v.raw_choice, "Option 4");
  const auto j = to_json(v);
  EXPECT_EQ(j["best"], to_string(*v.best));
  EXPECT_EQ(j["order"].size(), 5u);
}

TEST(Judge, UnparseableVerdictAbstains) {
  auto chat = std::make_shared<MockChatBackend>(0);
  chat->set_interceptor([](PromptKind, std::string_view, std::size_t) -> std::optional<std::string> {
    return "They are all fine really.";
  });
  const auto v = judge_ab(full_request(), *chat, {});
  EXPECT_FALSE(v.best);
  EXPECT_EQ(v.raw_choice, "They are all fine really.");
}

TEST(Judge, MissingStrategyIsRejected) {
  auto req = full_request();
  req.responses.erase(StrategyKind::kSelfRefine);
  MockChatBackend chat(0);
  try {
    judge_ab(req, chat, {});
    FAIL() << "expected InvalidInput";
  } catch (const InvalidInput& e) {
    EXPECT_TRUE(contains(e.what(), "self-refine"));
  }
}

// Report ---------------------------------------------------------------------

JudgeVerdict verdict(std::string id, std::size_t turn, std::optional<StrategyKind> best) {
  JudgeVerdict v;
  v.dialogue_id = std::move(id);
  v.turn = turn;
  v.best = best;
  return v;
}

TEST(Report, HandComputedRates) {
  const std::vector<JudgeVerdict> verdicts{
      verdict("d1", 0, StrategyKind::kCper), verdict("d1", 1, StrategyKind::kCper),
      verdict("d1", 2, StrategyKind::kZeroShot), verdict("d2", 0, StrategyKind::kChainOfThought),
      verdict("d2", 1, std::nullopt)};
  const std::vector<LexicalScore> lexical{{"d1", 0, StrategyKind::kCper, 0.2, 0.4},
                                          {"d1", 1, StrategyKind::kCper, 0.4, 0.6}};
  const auto r = build_report(verdicts, lexical);
  EXPECT_EQ(r.verdicts, 5u);
  EXPECT_EQ(r.abstentions, 1u);
  EXPECT_EQ(r.dialogues, 2u);
  EXPECT_EQ(r.turns, 5u);
  const auto& cper = r.rows[static_cast<std::size_t>(StrategyKind::kCper)];
  EXPECT_EQ(cper.wins, 2u);
  EXPECT_DOUBLE_EQ(*cper.turn_rate, 0.5);
  EXPECT_DOUBLE_EQ(*cper.dialogue_rate, (2.0 / 3.0) / 2.0);
  EXPECT_DOUBLE_EQ(*cper.mean_bleu, 0.3);
  EXPECT_DOUBLE_EQ(*cper.mean_rouge_l, 0.5);
  const auto& cot = r.rows[static_cast<std::size_t>(StrategyKind::kChainOfThought)];
  EXPECT_DOUBLE_EQ(*cot.dialogue_rate, 0.5);
  EXPECT_FALSE(cot.mean_bleu);

  double turn_sum = 0.0, dialogue_sum = 0.0;
  for (const auto& row : r.rows) {
    turn_sum += *row.turn_rate;
    dialogue_sum += *row.dialogue_rate;
  }
  EXPECT_NEAR(turn_sum, 1.0, 1e-12);
  EXPECT_NEAR(dialogue_sum, 1.0, 1e-12);
}

TEST(Report, AbstentionOnly) {
  const std::vector<JudgeVerdict> verdicts{verdict("d", 0, std::nullopt), verdict("d", 1, std::nullopt)};
  const auto r = build_report(verdicts, {});
  EXPECT_TRUE(r.abstention_only);
  for (const auto& row : r.rows) EXPECT_FALSE(row.turn_rate);
  const auto table = to_table(r);
  EXPECT_TRUE(contains(table, "abstentions only"));
  EXPECT_TRUE(contains(table, "n/a"));
  EXPECT_TRUE(to_json(r)["strategies"][0]["turn_rate"].is_null());
}

TEST(Report, TableListsEveryStrategy) {
  const auto r = build_report(std::vector{verdict("d", 0, StrategyKind::kSelfRefine)}, {});
  const auto table = to_table(r);
  for (auto k : kAllStrategies) EXPECT_TRUE(contains(table, to_string(k)));
  EXPECT_TRUE(contains(table, "100.00%"));
}

// Replay and evaluate --------------------------------------------------------

std::vector<DialogueTranscript> desk_dialogues() {
  return load_normalized(kTranscripts / "desk_ten.json").dialogues;
}

TEST(Replay, OutputIndependentOfWorkerCount) {
  const auto dialogues = desk_dialogues();
  ReplayConfig one;
  one.workers = 1;
  ReplayConfig many;
  many.workers = 8;
  const auto a = replay(dialogues, mock_backends(3), one);
  const auto b = replay(dialogues, mock_backends(3), many);
  EXPECT_EQ(to_json(a.responses).dump(), to_json(b.responses).dump());
  EXPECT_EQ(a.run_log, b.run_log);
  EXPECT_EQ(a.failed_dialogues, 0u);

  std::size_t turns = 0;
  for (const auto& d : a.responses.dialogues) {
    for (const auto& t : d.turns) EXPECT_EQ(t.responses.size(), 5u);
    turns += d.turns.size();
  }
  EXPECT_EQ(a.run_log.size(), turns);

  std::string joined;
  for (const auto& line : a.run_log) joined += line + "\n";
  std::istringstream in(joined);
  const auto rescored = rescore_run_log(in);
  EXPECT_EQ(rescored.records, turns);
  EXPECT_LT(rescored.max_deviation, 1e-9);
}

TEST(Replay, ResponsesFileRoundTrip) {
  const auto dialogues = load_esconv(kTranscripts / "esconv_sample.json").dialogues;
  const auto out = replay(dialogues, mock_backends(1), {});
  const auto doc = to_json(out.responses);
  EXPECT_EQ(to_json(responses_from_json(doc)), doc);
  EXPECT_EQ(doc["dialogues"][0]["turns"][0]["reference"],
            "So the reorganization has you worried about your position.\nHave they told you anything concrete?");
  EXPECT_THROW(responses_from_json(json::array()), InvalidInput);
}

TEST(Replay, BackendFailureCountsDialogues) {
  const auto dialogues = load_ccpem(kTranscripts / "ccpem_sample.json").dialogues;
  Backends down{std::make_shared<DownModel>(), std::make_shared<MockEmbeddingBackend>(0)};
  const auto out = replay(dialogues, down, {});
  EXPECT_EQ(out.failed_dialogues, 2u);
  EXPECT_EQ(out.responses.dialogues[0].errors.size(), 5u);
}

TEST(Evaluate, MissingStrategiesAreListed) {
  const auto dialogues = load_ccpem(kTranscripts / "ccpem_sample.json").dialogues;
  ReplayConfig cfg;
  cfg.strategies = {StrategyKind::kCper, StrategyKind::kZeroShot, StrategyKind::kChainOfThought,
                    StrategyKind::kSelfRefine};
  const auto out = replay(dialogues, mock_backends(1), cfg);
  MockChatBackend judge(0);
  try {
    evaluate(out.responses, judge, {});
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.fields().size(), 6u);
    EXPECT_EQ(e.fields()[0], "CCPE-8e113 turn 0: rationale-of-thought");
  }
}

TEST(Evaluate, DeskScaleReportRatesSumToOne) {
  const auto out = replay(desk_dialogues(), mock_backends(2), {});
  MockChatBackend judge(0);
  const auto result = evaluate(out.responses, judge, {});
  EXPECT_EQ(result.report.dialogues, 10u);
  EXPECT_EQ(result.report.verdicts, result.report.turns);
  EXPECT_EQ(result.lexical.size(), 5u * result.report.turns);
  double sum = 0.0;
  for (const auto& row : result.report.rows) sum += row.turn_rate.value();
  EXPECT_NEAR(sum, 1.0, 1e-12);

  // Same responses and seed: identical verdicts.
  MockChatBackend again(0);
  const auto second = evaluate(out.responses, again, {});
  EXPECT_EQ(to_json(second.report), to_json(result.report));
}

}  // namespace
}  // namespace cper::eval
