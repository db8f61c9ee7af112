#include "cper/cli/commands.hpp"

#include <pthread.h>
#include <signal.h>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "cper/backend_factory.hpp"
#include "cper/errors.hpp"
#include "cper/eval/replay.hpp"
#include "cper/pipeline.hpp"
#include "cper/run_log.hpp"
#include "cper/service/server.hpp"
#include "cper/text.hpp"

namespace cper::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Missing or unusable environment (backend configuration, files, sockets).
class EnvironmentError : public Error {
 public:
  using Error::Error;
};

struct SharedFlags {
  std::string backend;
  std::uint64_t seed = 0;
  double alpha = 0.5;
  double beta = 0.5;
  double temperature = 0.7;
  int samples = 5;
  std::string prompts_dir;
  std::string data_dir = "data/sessions";
  std::string output;
  std::string log_level = "warn";
};

void add_shared(CLI::App& app, SharedFlags& f) {
  app.add_option("--backend", f.backend, "Model backend: mock or http (default: $CPER_BACKEND or mock)")
      ->check(CLI::IsMember({"mock", "http"}));
  app.add_option("--seed", f.seed, "Seed for the mock backend and judge blinding")->capture_default_str();
  app.add_option("--alpha", f.alpha, "Uncertainty weight in the knowledge gap")->capture_default_str();
  app.add_option("--beta", f.beta, "Persona-alignment weight in the knowledge gap")->capture_default_str();
  app.add_option("--temperature", f.temperature, "Sampling temperature, 0 to 2")->capture_default_str();
  app.add_option("--samples", f.samples, "Candidate responses per turn (n >= 2)")->capture_default_str();
  app.add_option("--prompts-dir", f.prompts_dir, "Directory of prompt templates overriding the defaults");
  app.add_option("--data-dir", f.data_dir, "Session data directory")->capture_default_str();
  app.add_option("-o,--output", f.output, "Output path (parent directories are created)");
  app.add_option("--log-level", f.log_level, "trace, debug, info, warn, error or off")
      ->capture_default_str()
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));
}

// Flag ranges follow the service's session validation; field names are
// reported as flag names.
service::SessionConfig session_config(const SharedFlags& f, const BackendSettings& settings) {
  service::SessionConfig c{f.alpha, f.beta, f.temperature, f.samples, settings.kind, f.seed};
  try {
    service::validate(c);
  } catch (const ValidationError& e) {
    static const std::map<std::string, std::string> kFlag{{"alpha", "--alpha"},
                                                          {"beta", "--beta"},
                                                          {"temperature", "--temperature"},
                                                          {"sample_count", "--samples"}};
    std::vector<std::string> flags;
    for (const auto& field : e.fields()) flags.push_back(kFlag.count(field) ? kFlag.at(field) : field);
    throw ValidationError("out-of-range flags: " + join(flags, ", "), flags);
  }
  return c;
}

BackendSettings backend_settings(const SharedFlags& f) {
  auto s = settings_from_env();
  if (!f.backend.empty()) s.kind = parse_backend_kind(f.backend);
  s.seed = f.seed;
  return s;
}

Backends connect(const BackendSettings& settings) {
  try {
    return make_backends(settings);
  } catch (const InvalidInput& e) {
    throw EnvironmentError(e.what());
  }
}

PipelineConfig pipeline_config(const SharedFlags& f) {
  PipelineConfig c;
  c.params = {f.alpha, f.beta};
  c.generation.temperature = f.temperature;
  c.generation.sample_count = f.samples;
  c.validate();
  return c;
}

std::optional<fs::path> optional_path(const std::string& p) {
  if (p.empty()) return std::nullopt;
  return fs::path(p);
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

void write_file(const fs::path& path, const std::string& content) {
  ensure_parent(path);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw fs::filesystem_error("cannot open for writing", path, std::make_error_code(std::errc::io_error));
  f << content;
  if (!f.flush()) throw fs::filesystem_error("write failed", path, std::make_error_code(std::errc::io_error));
}

void require_file(const fs::path& path) {
  if (!fs::is_regular_file(path)) {
    throw fs::filesystem_error("input file not found", path, std::make_error_code(std::errc::no_such_file_or_directory));
  }
}

void configure_logging(const std::string& level) {
  auto logger = spdlog::get("cper");
  if (!logger) logger = spdlog::stderr_color_mt("cper");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(level));
}

std::string diagnostics_line(const TurnResult& r) {
  const auto& d = r.diagnostics;
  return "[u=" + fixed(d.uncertainty, 4) + " wcmi=" + (d.wcmi ? fixed(*d.wcmi, 4) : std::string("n/a")) +
         " kg=" + fixed(d.knowledge_gap, 4) + " action=" + std::string(to_string(r.feedback.action)) + "]";
}

// chat ----------------------------------------------------------------------

int cmd_chat(const SharedFlags& f, std::istream& in, std::ostream& out, std::ostream& err) {
  const auto settings = backend_settings(f);
  session_config(f, settings);
  const auto backends = connect(settings);
  std::shared_ptr<RunLog> log;
  if (!f.output.empty()) log = std::make_shared<RunLog>(fs::path(f.output));

  ConversationState state;
  state.id = "chat";
  state.config = pipeline_config(f);
  state.prompts = PromptSet::load(optional_path(f.prompts_dir));
  state.prompts.validate();
  Pipeline pipeline(backends.chat, backends.embedder, log);

  std::string line;
  out << "> " << std::flush;
  while (std::getline(in, line)) {
    if (trim(line).empty()) {
      out << "> " << std::flush;
      continue;
    }
    try {
      const auto r = pipeline.run_turn(state, line);
      out << r.final_response << '\n' << diagnostics_line(r) << '\n';
    } catch (const Error& e) {
      err << "error: " << e.what() << '\n';
    }
    out << "> " << std::flush;
  }
  out << '\n';
  return kExitOk;
}

// replay --------------------------------------------------------------------

struct ReplayFlags {
  std::string dataset = "normalized";
  std::string input;
  std::string strategies = "all";
  std::string run_log;
  std::size_t workers = 4;
  int refine_iterations = 1;
};

int cmd_replay(const SharedFlags& f, const ReplayFlags& r, std::ostream& out, std::ostream& err) {
  const auto settings = backend_settings(f);
  session_config(f, settings);
  const fs::path input(r.input);
  require_file(input);
  const auto report = eval::load_transcripts(eval::parse_dataset_kind(r.dataset), input);
  for (const auto& p : report.problems) err << "skipped: " << p << '\n';
  if (report.dialogues.empty() && report.skipped > 0) {
    err << "error: no loadable dialogue in " << input.string() << '\n';
    return kExitFailure;
  }
  if (report.dialogues.empty()) err << "warning: " << input.string() << " holds no dialogues\n";

  eval::ReplayConfig config;
  config.strategies = eval::parse_strategy_list(r.strategies);
  config.strategy.pipeline = pipeline_config(f);
  config.strategy.refine_iterations = r.refine_iterations;
  config.strategy.prompts_dir = optional_path(f.prompts_dir);
  config.workers = r.workers;
  config.seed = f.seed;
  if (config.strategy.refine_iterations < 1) {
    throw ValidationError("--refine-iterations must be at least 1", {"--refine-iterations"});
  }
  const auto backends = connect(settings);
  const auto result = eval::replay(report.dialogues, backends, config);

  const fs::path output(f.output);
  write_file(output, to_json(result.responses).dump(2) + "\n");
  const fs::path log_path =
      r.run_log.empty() ? fs::path(output).replace_extension(".runlog.jsonl") : fs::path(r.run_log);
  std::string log_text;
  for (const auto& line : result.run_log) log_text += line + "\n";
  write_file(log_path, log_text);

  for (const auto& d : result.responses.dialogues) {
    for (const auto& [kind, what] : d.errors) {
      err << "dialogue " << d.id << ": " << to_string(kind) << " stopped early: " << what << '\n';
    }
  }
  std::size_t turns = 0;
  for (const auto& d : result.responses.dialogues) turns += d.turns.size();
  out << "replayed " << result.responses.dialogues.size() << " dialogues (" << turns << " turns, "
      << config.strategies.size() << " strategies) -> " << output.string() << '\n'
      << "run log -> " << log_path.string() << '\n';
  if (!report.dialogues.empty() && result.failed_dialogues == report.dialogues.size()) {
    err << "error: every dialogue hit a backend failure\n";
    return kExitEnvironment;
  }
  return kExitOk;
}

// eval ----------------------------------------------------------------------

struct EvalFlags {
  std::string responses;
  std::string judge_backend;
  double judge_temperature = 0.0;
  std::size_t workers = 4;
};

int cmd_eval(const SharedFlags& f, const EvalFlags& e, std::ostream& out, std::ostream&) {
  auto settings = backend_settings(f);
  if (!e.judge_backend.empty()) settings.kind = parse_backend_kind(e.judge_backend);
  const fs::path input(e.responses);
  require_file(input);
  json doc;
  {
    std::ifstream in(input);
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& ex) {
      throw InvalidInput(input.string() + " is not valid JSON: " + ex.what());
    }
  }
  const auto responses = eval::responses_from_json(doc);

  eval::EvalConfig config;
  config.judge.seed = f.seed;
  config.judge.generation.temperature = e.judge_temperature;
  config.judge.prompts_dir = optional_path(f.prompts_dir);
  config.workers = e.workers;
  if (e.judge_temperature < 0.0 || e.judge_temperature > 2.0) {
    throw ValidationError("--judge-temperature must be within [0, 2]", {"--judge-temperature"});
  }
  const auto backends = connect(settings);
  const auto result = eval::evaluate(responses, *backends.chat, config);

  out << to_table(result.report);
  if (!f.output.empty()) {
    json verdicts = json::array();
    for (const auto& v : result.verdicts) verdicts.push_back(to_json(v));
    const json doc_out{{"report", to_json(result.report)}, {"verdicts", verdicts}};
    write_file(f.output, doc_out.dump(2) + "\n");
    out << "report -> " << f.output << '\n';
  }
  return kExitOk;
}

// score ---------------------------------------------------------------------

int cmd_score(const std::string& path, double tolerance, std::ostream& out, std::ostream& err) {
  require_file(path);
  const auto report = rescore_run_log(fs::path(path), tolerance);
  if (report.records == 0) {
    err << "warning: " << path << " holds no records; nothing to score\n";
    return kExitOk;
  }
  out << "records: " << report.records << "\nmax deviation: " << report.max_deviation;
  if (!report.worst.empty()) out << " (" << report.worst << ")";
  out << '\n';
  for (const auto& m : report.mismatches) out << "mismatch: " << m << '\n';
  if (!report.mismatches.empty()) {
    err << "error: " << report.mismatches.size() << " records deviate by more than " << tolerance << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

// serve ---------------------------------------------------------------------

struct ServeFlags {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t workers = 8;
};

int cmd_serve(const SharedFlags& f, const ServeFlags& s, std::ostream& out) {
  const auto settings = backend_settings(f);
  service::ServiceConfig config;
  config.data_dir = f.data_dir;
  config.backend = settings;
  config.prompts_dir = optional_path(f.prompts_dir);
  config.defaults = session_config(f, settings);

  // SIGINT/SIGTERM are taken synchronously by a watcher thread.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  service::SessionService sessions(config);
  for (const auto& w : sessions.load_warnings()) spdlog::warn("{}", w);
  service::HttpServer server(sessions, {s.host, s.port, s.workers, 5});
  const int port = server.bind();
  out << "listening on http://" << s.host << ":" << port << std::endl;

  std::jthread watcher([&server, signals](std::stop_token stop) {
    const timespec tick{0, 200'000'000};
    while (!stop.stop_requested()) {
      if (sigtimedwait(&signals, nullptr, &tick) > 0) {
        server.stop();
        return;
      }
    }
  });
  server.run();
  watcher.request_stop();
  watcher.join();
  pthread_sigmask(SIG_UNBLOCK, &signals, nullptr);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Persona knowledge-gap conversation engine", "cper"};
  app.require_subcommand(1);

  SharedFlags shared;
  ReplayFlags replay_flags;
  EvalFlags eval_flags;
  ServeFlags serve_flags;
  std::string score_path;
  double tolerance = 1e-9;

  auto* chat = app.add_subcommand("chat", "Interactive conversation on stdin/stdout");
  add_shared(*chat, shared);

  auto* replay = app.add_subcommand("replay", "Run strategies over a transcript dataset");
  add_shared(*replay, shared);
  replay->add_option("--dataset", replay_flags.dataset, "ccpem, esconv or normalized")
      ->capture_default_str()
      ->check(CLI::IsMember({"ccpem", "esconv", "normalized"}));
  replay->add_option("-i,--input", replay_flags.input, "Transcript file")->required();
  replay->add_option("--strategies", replay_flags.strategies,
                     "Comma-separated strategies or 'all'")
      ->capture_default_str();
  replay->add_option("--run-log", replay_flags.run_log,
                     "Run-log path (default: output path with .runlog.jsonl)");
  replay->add_option("--workers", replay_flags.workers, "Concurrent dialogues")
      ->capture_default_str()
      ->check(CLI::Range(1, 256));
  replay->add_option("--refine-iterations", replay_flags.refine_iterations,
                     "Self-refine feedback/refine rounds")
      ->capture_default_str();
  replay->get_option("--output")->required();

  auto* eval_cmd = app.add_subcommand("eval", "Judge a responses file and report preference rates");
  add_shared(*eval_cmd, shared);
  eval_cmd->add_option("-r,--responses", eval_flags.responses, "Responses file written by replay")
      ->required();
  eval_cmd->add_option("--judge-backend", eval_flags.judge_backend, "Judge backend (default: --backend)")
      ->check(CLI::IsMember({"mock", "http"}));
  eval_cmd->add_option("--judge-temperature", eval_flags.judge_temperature, "Judge sampling temperature")
      ->capture_default_str();
  eval_cmd->add_option("--workers", eval_flags.workers, "Concurrent dialogues")
      ->capture_default_str()
      ->check(CLI::Range(1, 256));

  auto* score = app.add_subcommand("score", "Recompute logged gap diagnostics from logged embeddings");
  add_shared(*score, shared);
  score->add_option("run_log", score_path, "Run-log file")->required();
  score->add_option("--tolerance", tolerance, "Largest accepted absolute deviation")
      ->capture_default_str();

  auto* serve = app.add_subcommand("serve", "Run the HTTP session service");
  add_shared(*serve, shared);
  serve->add_option("--host", serve_flags.host, "Bind address")->capture_default_str();
  serve->add_option("--port", serve_flags.port, "Port (0 picks a free one)")
      ->capture_default_str()
      ->check(CLI::Range(0, 65535));
  serve->add_option("--workers", serve_flags.workers, "Request worker threads")
      ->capture_default_str()
      ->check(CLI::Range(1, 1024));

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitFailure;
  }

  try {
    configure_logging(shared.log_level);
    if (chat->parsed()) return cmd_chat(shared, in, out, err);
    if (replay->parsed()) return cmd_replay(shared, replay_flags, out, err);
    if (eval_cmd->parsed()) return cmd_eval(shared, eval_flags, out, err);
    if (score->parsed()) return cmd_score(score_path, tolerance, out, err);
    if (serve->parsed()) return cmd_serve(shared, serve_flags, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    for (const auto& field : e.fields()) err << "  " << field << '\n';
    return kExitFailure;
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const BackendUnavailable& e) {
    err << "backend unavailable: " << e.what() << '\n';
    return kExitEnvironment;
  } catch (const EnvironmentError& e) {
    err << "error: " << e.what() << '\n';
    return kExitEnvironment;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitEnvironment;
  }
  return kExitFailure;
}

}  // namespace cper::cli
