// Acceptance gate: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "cper/errors.hpp"
#include "cper/eval/metrics.hpp"
#include "cper/eval/replay.hpp"
#include "cper/gap_math.hpp"
#include "cper/mock_backend.hpp"
#include "cper/pipeline.hpp"
#include "cper/run_log.hpp"
#include "cper/structured_output.hpp"
#include "cper/text.hpp"
#include "gap_oracle.hpp"
#include "lexical_oracle.hpp"

namespace {

using namespace cper;
using nlohmann::json;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

const fs::path kFixtures = CPER_FIXTURES_DIR;

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects the first few failure reasons of one criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures_;
    if (failures_ <= 3) reasons_ += (reasons_.empty() ? "" : "; ") + what;
  }
  Outcome done(const std::string& summary) const {
    if (failures_ == 0) return {true, summary};
    return {false, std::to_string(failures_) + " violations: " + reasons_ + " | " + summary};
  }

 private:
  std::size_t failures_ = 0;
  std::string reasons_;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string sci(double v) {
  std::ostringstream s;
  s.precision(2);
  s << std::scientific << v;
  return s.str();
}

oracle::Vec random_vec(std::mt19937_64& rng, std::size_t d) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (;;) {
    oracle::Vec v(d);
    for (auto& x : v) x = u(rng);
    if (std::sqrt(oracle::dot(v, v)) > 1e-3) return v;
  }
}

std::vector<Embedding> embed_all(const std::vector<oracle::Vec>& vs) {
  std::vector<Embedding> out;
  for (const auto& v : vs) out.emplace_back(v);
  return out;
}

struct GapInstance {
  std::vector<oracle::Vec> samples;
  std::vector<oracle::Vec> prior;
  oracle::Vec current;
  double alpha;
  double beta;
};

// n in [2,6], d in [2,8], 0..6 prior personas, weights in [0,1]. Every tenth
// instance is adversarial: antipodal samples and a current persona opposite
// to the whole history.
std::vector<GapInstance> gap_instances(std::size_t count) {
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> weight(0.0, 1.0);
  std::vector<GapInstance> out;
  for (std::size_t i = 0; i < count; ++i) {
    GapInstance g;
    const std::size_t n = 2 + rng() % 5;
    const std::size_t d = 2 + rng() % 7;
    const std::size_t h = rng() % 7;
    g.alpha = weight(rng);
    g.beta = weight(rng);
    if (i % 10 == 9) {
      const auto axis = random_vec(rng, d);
      oracle::Vec neg(axis);
      for (auto& x : neg) x = -x;
      for (std::size_t k = 0; k < n; ++k) g.samples.push_back(k % 2 ? neg : axis);
      for (std::size_t k = 0; k < std::max<std::size_t>(h, 1); ++k) g.prior.push_back(axis);
      g.current = neg;
    } else {
      for (std::size_t k = 0; k < n; ++k) g.samples.push_back(random_vec(rng, d));
      for (std::size_t k = 0; k < h; ++k) g.prior.push_back(random_vec(rng, d));
      g.current = random_vec(rng, d);
    }
    out.push_back(std::move(g));
  }
  return out;
}

// Criteria -------------------------------------------------------------------

Outcome gap_oracle_suite() {
  const auto start = Clock::now();
  const auto instances = gap_instances(1000);
  Check c;
  double worst = 0.0;
  auto near = [&](double a, double b, const char* what) {
    const double diff = std::abs(a - b);
    worst = std::max(worst, diff);
    c.expect(diff <= 1e-9, std::string(what) + " off by " + sci(diff));
  };
  for (const auto& g : instances) {
    const auto samples = embed_all(g.samples);
    const auto prior = embed_all(g.prior);
    const Embedding current(g.current);
    const gap::GapParams params{g.alpha, g.beta};
    const auto got = gap::score_turn(samples, prior, current, params);
    const auto want = oracle::score(g.samples, g.prior, g.current, g.alpha, g.beta);
    near(got.uncertainty, want.u, "uncertainty");
    near(got.knowledge_gap, want.kg, "knowledge gap");
    c.expect(got.wcmi.has_value() == want.wcmi.has_value(), "wcmi presence");
    if (got.wcmi && want.wcmi) near(*got.wcmi, *want.wcmi, "wcmi");
    c.expect(got.attention.size() == want.weights.size(), "attention length");
    for (std::size_t k = 0; k < std::min(got.attention.size(), want.weights.size()); ++k) {
      near(got.attention[k], want.weights[k], "attention weight");
    }
    if (!g.prior.empty()) {
      const auto attended = gap::attended_persona(prior, got.attention);
      const auto expected = oracle::attended(g.prior, want.weights);
      for (std::size_t k = 0; k < expected.size(); ++k) near(attended[k], expected[k], "attended persona");
    }
  }
  const double elapsed = seconds_since(start);
  c.expect(elapsed < 5.0, "runtime " + std::to_string(elapsed) + " s");
  return c.done(std::to_string(instances.size()) + " instances, max |diff| " + sci(worst) + ", " +
                fixed(elapsed, 3) + " s");
}

Outcome bounds_suite() {
  const auto instances = gap_instances(1000);
  Check c;
  for (const auto& g : instances) {
    const auto got = gap::score_turn(embed_all(g.samples), embed_all(g.prior), Embedding(g.current),
                                     {g.alpha, g.beta});
    c.expect(got.uncertainty >= 0.0 && got.uncertainty <= 1.0, "u out of [0,1]");
    if (!got.attention.empty()) {
      double sum = 0.0;
      for (double w : got.attention) {
        c.expect(w >= 0.0, "negative weight");
        sum += w;
      }
      c.expect(std::abs(sum - 1.0) <= 1e-12, "weights sum " + std::to_string(sum));
    }
    if (got.wcmi) c.expect(*got.wcmi >= -1.0 && *got.wcmi <= 1.0, "wcmi out of [-1,1]");
    const double excess = std::max(1.0 - g.beta - got.knowledge_gap, got.knowledge_gap - (1.0 + g.alpha + g.beta));
    // Bounds are compared with rounding slack: the bound itself is a rounded sum.
    c.expect(excess <= 1e-12, "KG out of [1-beta, 1+alpha+beta] by " + sci(excess));
  }
  return c.done(std::to_string(instances.size()) + " instances, zero violations");
}

Outcome scale_invariance() {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> log_scale(-3.0, 3.0);
  Check c;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 2 + rng() % 7;
    const std::size_t h = 1 + rng() % 6;
    std::vector<oracle::Vec> history;
    for (std::size_t k = 0; k < h; ++k) history.push_back(random_vec(rng, d));
    auto current = random_vec(rng, d);
    const auto base = gap::attention_weights(embed_all(history), Embedding(current));

    // Rescale one history vector, or the current persona.
    const std::size_t target = rng() % (h + 1);
    const double factor = std::pow(10.0, log_scale(rng));
    auto& v = target == h ? current : history[target];
    for (auto& x : v) x *= factor;
    const auto scaled = gap::attention_weights(embed_all(history), Embedding(current));

    for (std::size_t k = 0; k < h; ++k) {
      worst = std::max(worst, std::abs(base[k] - scaled[k]));
      c.expect(std::abs(base[k] - scaled[k]) <= 1e-9, "weight moved");
    }
    const auto argmax = [](const std::vector<double>& w) {
      return std::max_element(w.begin(), w.end()) - w.begin();
    };
    c.expect(argmax(base) == argmax(scaled), "argmax changed");
  }
  return c.done("100 cases, max weight change " + sci(worst));
}

std::vector<std::string> thirteen_turns() {
  const auto report = eval::load_normalized(kFixtures / "transcripts" / "desk_ten.json");
  for (const auto& d : report.dialogues) {
    if (d.user_turn_count() == 13) {
      std::vector<std::string> turns;
      for (std::size_t k = 0; k < 13; ++k) turns.push_back(d.user_turn(k).text);
      return turns;
    }
  }
  throw InvalidInput("desk fixture lacks a 13-turn dialogue");
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

Outcome pipeline_determinism(const fs::path& work) {
  const auto start = Clock::now();
  const auto turns = thirteen_turns();
  std::vector<fs::path> logs;
  for (int run = 0; run < 2; ++run) {
    const auto path = work / ("determinism_" + std::to_string(run) + ".jsonl");
    auto log = std::make_shared<RunLog>(path);
    Pipeline pipeline(std::make_shared<MockChatBackend>(21), std::make_shared<MockEmbeddingBackend>(21), log);
    ConversationState state;
    state.id = "determinism";
    const auto outcome = pipeline.run_dialogue(state, turns);
    if (outcome.error || outcome.results.size() != 13) return {false, "dialogue did not complete"};
    logs.push_back(path);
  }
  Check c;
  const auto a = slurp(logs[0]);
  c.expect(!a.empty() && a == slurp(logs[1]), "run logs differ");
  const auto rescored = rescore_run_log(logs[0]);
  c.expect(rescored.records == 13, "rescored " + std::to_string(rescored.records) + " records");
  c.expect(rescored.max_deviation < 1e-9, "max deviation " + sci(rescored.max_deviation));
  const double elapsed = seconds_since(start);
  c.expect(elapsed < 10.0, "runtime " + std::to_string(elapsed) + " s");
  return c.done("13 turns x 2 runs byte-identical (" + std::to_string(a.size()) + " bytes), rescore max deviation " +
                sci(rescored.max_deviation) + ", " + fixed(elapsed, 3) + " s");
}

Outcome pipeline_structure() {
  const auto turns = thirteen_turns();
  Check c;
  std::size_t runs = 0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    for (double alpha : {0.0, 0.5, 0.9}) {
      for (std::size_t t = 1; t <= turns.size(); t += 4) {
        Pipeline pipeline(std::make_shared<MockChatBackend>(seed), std::make_shared<MockEmbeddingBackend>(seed));
        ConversationState state;
        state.config.params = {alpha, 0.5};
        const auto outcome = pipeline.run_dialogue(state, std::span(turns).first(t));
        ++runs;
        c.expect(!outcome.error, "dialogue failed");
        c.expect(state.persona_history.size() == t, "|P_history| != T");
        c.expect(state.diagnostics.size() == t, "|diagnostics| != T");
        c.expect(state.chat_history.size() == 2 * t, "|C_history| != 2T");
        const auto& first = state.diagnostics.front();
        c.expect(!first.wcmi, "first-turn wcmi present");
        c.expect(first.knowledge_gap == 1.0 + alpha * first.uncertainty, "first-turn KG != 1 + alpha*u");
      }
    }
  }
  return c.done(std::to_string(runs) + " mock runs of 1..13 turns");
}

Outcome parser_fixtures() {
  spdlog::set_level(spdlog::level::err);
  std::ifstream in(kFixtures / "parser" / "cases.json");
  const auto cases = json::parse(in);
  Check c;
  std::size_t valid = 0, invalid = 0;
  std::set<std::string> tiers;
  for (const auto& k : cases) {
    const auto name = k["name"].get<std::string>();
    const auto parsed = parse_structured_output(k["text"].get<std::string>());
    if (!k["valid"].get<bool>()) {
      ++invalid;
      c.expect(!parsed, name + " parsed");
      continue;
    }
    ++valid;
    c.expect(parsed && parsed->value == k["value"], name + " value");
    c.expect(parsed && parsed->repairs == k["repairs"].get<std::vector<std::string>>(), name + " repairs");
    if (parsed) tiers.insert(parsed->repairs.begin(), parsed->repairs.end());
  }
  for (const char* tier : {"code-fence", "surrounding-text", "single-quotes"}) {
    c.expect(tiers.count(tier) == 1, std::string("tier not exercised: ") + tier);
  }

  // Each malformed reply, fed to each stage, must take that stage's fallback
  // and still finish the turn.
  std::size_t fallbacks = 0;
  for (const auto& k : cases) {
    if (k["valid"].get<bool>()) continue;
    const auto text = k["text"].get<std::string>();
    for (auto stage : {PromptKind::kGenerate, PromptKind::kFeedback, PromptKind::kSelect, PromptKind::kRefine}) {
      auto chat = std::make_shared<MockChatBackend>(3);
      chat->set_interceptor([stage, text](PromptKind kind, std::string_view, std::size_t)
                                -> std::optional<std::string> {
        if (kind == stage) return text;
        return std::nullopt;
      });
      Pipeline pipeline(chat, std::make_shared<MockEmbeddingBackend>(3));
      ConversationState state;
      // Two turns so the selection stage has more than one candidate.
      try {
        pipeline.run_turn(state, "I like quiet documentaries about nature");
        const auto r = pipeline.run_turn(state, "My brother only watches action films");
        c.expect(!r.final_response.empty(), k["name"].get<std::string>() + ": empty response");
        c.expect(!r.warnings.empty(), k["name"].get<std::string>() + ": no fallback warning");
        ++fallbacks;
      } catch (const std::exception& e) {
        c.expect(false, k["name"].get<std::string>() + ": " + e.what());
      }
    }
  }
  spdlog::set_level(spdlog::level::warn);
  return c.done(std::to_string(valid) + " repairable + " + std::to_string(invalid) + " malformed fixtures, " +
                std::to_string(fallbacks) + " stage fallbacks exercised");
}

Outcome lexical_oracles() {
  spdlog::set_level(spdlog::level::err);
  Check c;
  double worst = 0.0;
  std::size_t pairs = 0, identical = 0;
  for (const auto& [cand, ref] : oracle::lexical_suite()) {
    ++pairs;
    const double b = eval::bleu(cand, ref);
    const double r = eval::rouge_l(cand, ref);
    worst = std::max({worst, std::abs(b - oracle::bleu(cand, ref)), std::abs(r - oracle::rouge_l(cand, ref))});
    c.expect(std::abs(b - oracle::bleu(cand, ref)) <= 1e-9, "bleu mismatch");
    c.expect(std::abs(r - oracle::rouge_l(cand, ref)) <= 1e-9, "rouge-l mismatch");
    if (cand == ref && !cand.empty()) {
      ++identical;
      c.expect(b == 1.0 && r == 1.0, "identical pair not exactly 1.0");
    }
  }
  for (const char* s : {"I love old science fiction movies.", "Have they told you anything concrete?"}) {
    ++identical;
    c.expect(eval::bleu(s, s) == 1.0 && eval::rouge_l(s, s) == 1.0, "identical sentence not exactly 1.0");
  }
  spdlog::set_level(spdlog::level::warn);
  return c.done(std::to_string(pairs) + " pairs (<= 12 tokens), max |diff| " + sci(worst) + ", " +
                std::to_string(identical) + " identical cases exactly 1.0");
}

Outcome judge_blinding() {
  eval::ResponsesFile file;
  for (int d = 0; d < 100; ++d) {
    eval::DialogueResponses dialogue;
    dialogue.id = "blind-" + std::to_string(d);
    dialogue.domain = d % 2 ? eval::Domain::kSupport : eval::Domain::kMovies;
    for (std::size_t t = 0; t < 6; ++t) {
      eval::TurnRecord rec;
      rec.turn = t;
      rec.user_input = "turn " + std::to_string(t);
      for (auto k : eval::kAllStrategies) rec.responses[k] = "same reply";
      dialogue.turns.push_back(std::move(rec));
    }
    file.dialogues.push_back(std::move(dialogue));
  }
  MockChatBackend judge(0, MockChatBackend::JudgePolicy::kFirstOption);
  eval::EvalConfig config;
  config.judge.seed = 2024;
  const auto result = eval::evaluate(file, judge, config);
  const double n = static_cast<double>(result.report.verdicts);
  const double sigma = std::sqrt(n * 0.2 * 0.8);
  Check c;
  c.expect(result.report.verdicts >= 500, "only " + std::to_string(result.report.verdicts) + " turns");
  c.expect(result.report.abstentions == 0, "abstentions");
  std::string counts;
  for (const auto& row : result.report.rows) {
    const double dev = std::abs(static_cast<double>(row.wins) - 0.2 * n);
    c.expect(dev <= 3.0 * sigma, std::string(eval::to_string(row.strategy)) + " off by " + fixed(dev / sigma, 2) + " sigma");
    counts += (counts.empty() ? "" : " ") + std::to_string(row.wins);
  }
  return c.done(std::to_string(result.report.verdicts) + " turns, wins [" + counts + "], 3 sigma = " +
                fixed(3.0 * sigma, 1));
}

Outcome desk_scale_e2e() {
  const auto start = Clock::now();
  const auto report = eval::load_normalized(kFixtures / "transcripts" / "desk_ten.json");
  Check c;
  c.expect(report.dialogues.size() == 10, "fixture dialogue count");
  for (const auto& d : report.dialogues) {
    c.expect(d.user_turn_count() >= 5 && d.user_turn_count() <= 13, d.id + " turn count");
  }
  const Backends backends{std::make_shared<MockChatBackend>(5), std::make_shared<MockEmbeddingBackend>(5)};
  const auto replayed = eval::replay(report.dialogues, backends, {});
  c.expect(replayed.failed_dialogues == 0, "backend failures");
  MockChatBackend judge(0);
  const auto result = eval::evaluate(replayed.responses, judge, {});
  double turn_sum = 0.0, dialogue_sum = 0.0;
  for (const auto& row : result.report.rows) {
    c.expect(row.turn_rate && row.dialogue_rate && row.mean_bleu && row.mean_rouge_l, "missing column");
    turn_sum += row.turn_rate.value_or(0.0);
    dialogue_sum += row.dialogue_rate.value_or(0.0);
  }
  c.expect(std::abs(turn_sum - 1.0) <= 1e-12, "per-turn rates sum " + std::to_string(turn_sum));
  c.expect(std::abs(dialogue_sum - 1.0) <= 1e-12, "per-dialogue rates sum " + std::to_string(dialogue_sum));
  c.expect(result.report.dialogues == 10, "report dialogue count");
  const double elapsed = seconds_since(start);
  c.expect(elapsed < 60.0, "runtime " + std::to_string(elapsed) + " s");
  std::cout << eval::to_table(result.report);
  return c.done("10 dialogues, " + std::to_string(result.report.turns) + " turns x 5 strategies, rates sum to 1, " +
                fixed(elapsed, 3) + " s");
}

// Service durability -----------------------------------------------------------

class ServeProcess {
 public:
  ServeProcess(const fs::path& data_dir) {
    int fds[2];
    if (::pipe(fds) != 0) throw Error("pipe failed");
    pid_ = ::fork();
    if (pid_ < 0) throw Error("fork failed");
    if (pid_ == 0) {
      ::dup2(fds[1], STDOUT_FILENO);
      ::close(fds[0]);
      ::close(fds[1]);
      const std::string data = data_dir.string();
      ::execl(CPER_CLI_PATH, CPER_CLI_PATH, "serve", "--backend", "mock", "--seed", "17", "--port", "0",
              "--data-dir", data.c_str(), "--log-level", "error", static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(fds[1]);
    out_ = fds[0];
    port_ = read_port();
  }
  ~ServeProcess() { kill(); }

  int port() const { return port_; }

  void kill() {
    if (pid_ <= 0) return;
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
    ::close(out_);
    pid_ = -1;
  }

 private:
  int read_port() {
    std::string line;
    const auto deadline = Clock::now() + std::chrono::seconds(10);
    while (Clock::now() < deadline) {
      pollfd p{out_, POLLIN, 0};
      if (::poll(&p, 1, 100) <= 0) continue;
      char ch;
      if (::read(out_, &ch, 1) != 1) break;
      if (ch == '\n') {
        const auto colon = line.rfind(':');
        if (colon != std::string::npos) return std::stoi(line.substr(colon + 1));
        line.clear();
      } else {
        line += ch;
      }
    }
    throw Error("serve did not report a port");
  }

  pid_t pid_ = -1;
  int out_ = -1;
  int port_ = 0;
};

json post(httplib::Client& client, const std::string& path, const json& body, int* status = nullptr) {
  auto r = client.Post(path, body.dump(), "application/json");
  if (!r) throw Error("request to " + path + " failed");
  if (status) *status = r->status;
  return json::parse(r->body);
}

json get(httplib::Client& client, const std::string& path) {
  auto r = client.Get(path);
  if (!r) throw Error("request to " + path + " failed");
  return json::parse(r->body);
}

Outcome service_durability(const fs::path& work) {
  const auto data = work / "sessions";
  Check c;
  std::string id;
  json acknowledged_state;
  std::size_t acknowledged = 0;
  int rounds = 0;

  // Each round: restart, check nothing acknowledged was lost, post two
  // acknowledged turns, fire one more and SIGKILL while it may be in flight.
  for (int round = 0; round < 4; ++round, ++rounds) {
    ServeProcess serve(data);
    httplib::Client client("127.0.0.1", serve.port());
    client.set_read_timeout(30);
    if (id.empty()) id = post(client, "/api/sessions", json::object())["session_id"];

    const auto session = get(client, "/api/sessions/" + id);
    const std::size_t turns = session.value("turn_count", std::size_t{0});
    c.expect(turns >= acknowledged && turns <= acknowledged + 1,
             "round " + std::to_string(round) + ": " + std::to_string(turns) + " turns after " +
                 std::to_string(acknowledged) + " acknowledged");
    if (acknowledged > 0 && session.contains("turns")) {
      json prefix = session["turns"];
      prefix.erase(prefix.begin() + static_cast<long>(std::min(acknowledged, prefix.size())), prefix.end());
      c.expect(prefix == acknowledged_state, "acknowledged payloads changed across restart");
    }
    acknowledged = turns;
    acknowledged_state = session["turns"];

    for (int k = 0; k < 2; ++k) {
      int status = 0;
      const auto payload = post(client, "/api/sessions/" + id + "/messages",
                                {{"text", "round " + std::to_string(round) + " message " + std::to_string(k)}}, &status);
      c.expect(status == 200, "post failed with " + std::to_string(status));
      if (status == 200) {
        ++acknowledged;
        acknowledged_state.push_back(payload);
      }
    }
    std::jthread in_flight([port = serve.port(), id, round] {
      httplib::Client late("127.0.0.1", port);
      late.Post("/api/sessions/" + id + "/messages", json{{"text", "unacknowledged " + std::to_string(round)}}.dump(),
                "application/json");
    });
    std::this_thread::sleep_for(std::chrono::microseconds(300 * (round + 1)));
    serve.kill();
  }

  // Final restart: the full transcript is intact and identical to what a
  // second restart returns.
  json final_a, final_b;
  {
    ServeProcess serve(data);
    httplib::Client client("127.0.0.1", serve.port());
    final_a = get(client, "/api/sessions/" + id);
  }
  {
    ServeProcess serve(data);
    httplib::Client client("127.0.0.1", serve.port());
    final_b = get(client, "/api/sessions/" + id);

    // Isolation: two sessions driven concurrently match two driven alone.
    const std::string a = post(client, "/api/sessions", json::object())["session_id"];
    const std::string b = post(client, "/api/sessions", json::object())["session_id"];
    auto drive = [&](const std::string& sid, const std::string& tag) {
      httplib::Client own("127.0.0.1", serve.port());
      own.set_read_timeout(30);
      for (int k = 0; k < 5; ++k) {
        post(own, "/api/sessions/" + sid + "/messages", {{"text", tag + " " + std::to_string(k) + " likes jazz"}});
      }
    };
    {
      std::jthread ta(drive, a, "alpha-tag");
      std::jthread tb(drive, b, "beta-tag");
    }
    const std::string solo_a = post(client, "/api/sessions", json::object())["session_id"];
    const std::string solo_b = post(client, "/api/sessions", json::object())["session_id"];
    drive(solo_a, "alpha-tag");
    drive(solo_b, "beta-tag");
    auto state_of = [&](const std::string& sid) {
      auto s = get(client, "/api/sessions/" + sid)["state"];
      s.erase("id");
      return s;
    };
    const auto sa = state_of(a), sb = state_of(b);
    c.expect(!contains(sa.dump(), "beta-tag") && !contains(sb.dump(), "alpha-tag"), "cross-session contamination");
    c.expect(sa == state_of(solo_a), "interleaved session A differs from its solo run");
    c.expect(sb == state_of(solo_b), "interleaved session B differs from its solo run");
  }
  c.expect(final_a.dump() == final_b.dump(), "payload differs across restarts");
  const std::size_t final_turns = final_a.value("turn_count", std::size_t{0});
  c.expect(final_turns >= acknowledged, "lost acknowledged turns");
  c.expect(final_a["state"]["chat_history"].size() == 2 * final_turns, "chat history length");
  return c.done(std::to_string(rounds) + " SIGKILL restarts, " + std::to_string(final_turns) + " turns persisted (" +
                std::to_string(acknowledged) + " acknowledged), isolation holds");
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  const auto work = fs::temp_directory_path() / ("cper_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(work);
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gap-oracle-suite", gap_oracle_suite},
      {"gap-bounds", bounds_suite},
      {"scale-invariance", scale_invariance},
      {"pipeline-determinism", [&] { return pipeline_determinism(work); }},
      {"pipeline-structure", pipeline_structure},
      {"parser-fixtures", parser_fixtures},
      {"lexical-oracles", lexical_oracles},
      {"judge-blinding", judge_blinding},
      {"desk-scale-end-to-end", desk_scale_e2e},
      {"service-durability", [&] { return service_durability(work); }},
  };

  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    if (!o.pass) ++failed;
  }
  fs::remove_all(work);
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size()
            << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
