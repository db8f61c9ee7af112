#include "cper/eval/transcript.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "cper/errors.hpp"
#include "cper/text.hpp"

namespace cper::eval {

using nlohmann::json;

std::string_view to_string(Domain domain) {
  switch (domain) {
    case Domain::kMovies:
      return "movies";
    case Domain::kSupport:
      return "support";
    case Domain::kGeneric:
      return "generic";
  }
  return "generic";
}

Domain parse_domain(std::string_view text) {
  if (text == "movies") return Domain::kMovies;
  if (text == "support") return Domain::kSupport;
  if (text == "generic") return Domain::kGeneric;
  throw InvalidInput("domain must be movies, support or generic, got '" + std::string(text) + "'");
}

std::string_view to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::kCcpem:
      return "ccpem";
    case DatasetKind::kEsconv:
      return "esconv";
    case DatasetKind::kNormalized:
      return "normalized";
  }
  return "normalized";
}

DatasetKind parse_dataset_kind(std::string_view text) {
  if (text == "ccpem") return DatasetKind::kCcpem;
  if (text == "esconv") return DatasetKind::kEsconv;
  if (text == "normalized") return DatasetKind::kNormalized;
  throw InvalidInput("dataset must be ccpem, esconv or normalized, got '" + std::string(text) +
                     "'");
}

std::size_t DialogueTranscript::user_turn_count() const {
  return static_cast<std::size_t>(std::count_if(
      turns.begin(), turns.end(), [](const Turn& t) { return t.speaker == Speaker::kUser; }));
}

namespace {

// Position of the k-th user turn in `turns`.
std::size_t user_position(const std::vector<Turn>& turns, std::size_t k) {
  std::size_t seen = 0;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    if (turns[i].speaker != Speaker::kUser) continue;
    if (seen++ == k) return i;
  }
  throw InvalidInput("dialogue has no user turn " + std::to_string(k));
}

}  // namespace

std::vector<ChatMessage> DialogueTranscript::history_before(std::size_t k) const {
  std::vector<ChatMessage> out;
  for (const auto& c : context) out.push_back({Role::kAssistant, c});
  const auto end = user_position(turns, k);
  for (std::size_t i = 0; i < end; ++i) {
    out.push_back({turns[i].speaker == Speaker::kUser ? Role::kUser : Role::kAssistant,
                   turns[i].text});
  }
  return out;
}

const Turn& DialogueTranscript::user_turn(std::size_t k) const {
  return turns[user_position(turns, k)];
}

const Turn* DialogueTranscript::reference_after(std::size_t k) const {
  const auto i = user_position(turns, k) + 1;
  if (i < turns.size() && turns[i].speaker == Speaker::kAssistant) return &turns[i];
  return nullptr;
}

DialogueTranscript normalize(std::string id, Domain domain, std::vector<Turn> raw, json meta) {
  DialogueTranscript d;
  d.id = std::move(id);
  d.domain = domain;
  d.meta = std::move(meta);
  for (auto& t : raw) {
    t.text = std::string(trim(t.text));
    if (t.text.empty()) continue;
    if (d.turns.empty() && t.speaker == Speaker::kAssistant) {
      d.context.push_back(std::move(t.text));
      continue;
    }
    if (!d.turns.empty() && d.turns.back().speaker == t.speaker) {
      auto& prev = d.turns.back();
      prev.text += "\n" + t.text;
      if (t.meta.contains("strategy")) {
        auto& s = prev.meta["strategy"];
        if (s.is_null()) {
          s = t.meta["strategy"];
        } else if (s != t.meta["strategy"]) {
          if (!s.is_array()) s = json::array({s});
          if (std::find(s.begin(), s.end(), t.meta["strategy"]) == s.end()) {
            s.push_back(t.meta["strategy"]);
          }
        }
      }
      continue;
    }
    d.turns.push_back(std::move(t));
  }
  if (d.turns.empty()) throw InvalidInput("dialogue " + d.id + " has no user turn");
  return d;
}

namespace {

const json& require_array(const json& doc, const char* what) {
  if (!doc.is_array()) throw InvalidInput(std::string(what) + " file must hold a JSON array");
  return doc;
}

std::string string_at(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key) || !obj[key].is_string()) {
    throw InvalidInput(std::string("missing string field '") + key + "'");
  }
  return obj[key].get<std::string>();
}

Speaker speaker_from(std::string_view label, std::string_view user, std::string_view assistant) {
  if (iequals(label, user)) return Speaker::kUser;
  if (iequals(label, assistant)) return Speaker::kAssistant;
  throw InvalidInput("unknown speaker '" + std::string(label) + "'");
}

template <typename ParseOne>
LoadReport parse_records(const json& records, std::string_view kind, ParseOne parse_one) {
  LoadReport report;
  for (std::size_t i = 0; i < records.size(); ++i) {
    try {
      report.dialogues.push_back(parse_one(records[i], i));
    } catch (const std::exception& e) {
      ++report.skipped;
      report.problems.push_back(std::string(kind) + " record " + std::to_string(i) + ": " +
                                e.what());
    }
  }
  return report;
}

}  // namespace

LoadReport parse_ccpem(const json& doc) {
  return parse_records(require_array(doc, "CCPE-M"), "ccpem", [](const json& rec, std::size_t) {
    const auto id = string_at(rec, "conversationId");
    if (!rec.contains("utterances") || !rec["utterances"].is_array()) {
      throw InvalidInput("missing utterances array");
    }
    std::vector<std::pair<long long, Turn>> indexed;
    long long position = 0;
    for (const auto& u : rec["utterances"]) {
      Turn t;
      t.speaker = speaker_from(string_at(u, "speaker"), "USER", "ASSISTANT");
      t.text = string_at(u, "text");
      const long long index = u.contains("index") && u["index"].is_number_integer()
                                  ? u["index"].get<long long>()
                                  : position;
      indexed.emplace_back(index, std::move(t));
      ++position;
    }
    std::stable_sort(indexed.begin(), indexed.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Turn> turns;
    for (auto& [index, t] : indexed) turns.push_back(std::move(t));
    return normalize(id, Domain::kMovies, std::move(turns));
  });
}

LoadReport parse_esconv(const json& doc) {
  return parse_records(require_array(doc, "ESConv"), "esconv", [](const json& rec, std::size_t i) {
    if (!rec.is_object() || !rec.contains("dialog") || !rec["dialog"].is_array()) {
      throw InvalidInput("missing dialog array");
    }
    std::string id = "esconv-" + std::to_string(i);
    if (rec.contains("id")) id = rec["id"].is_string() ? rec["id"].get<std::string>() : rec["id"].dump();
    json meta = json::object();
    for (const char* key : {"problem_type", "emotion_type", "experience_type", "situation"}) {
      if (rec.contains(key) && rec[key].is_string()) meta[key] = rec[key];
    }
    std::vector<Turn> turns;
    for (const auto& u : rec["dialog"]) {
      Turn t;
      t.speaker = speaker_from(string_at(u, "speaker"), "seeker", "supporter");
      t.text = string_at(u, "content");
      if (u.contains("annotation") && u["annotation"].is_object() &&
          u["annotation"].contains("strategy") && u["annotation"]["strategy"].is_string()) {
        t.meta["strategy"] = u["annotation"]["strategy"];
      }
      turns.push_back(std::move(t));
    }
    return normalize(std::move(id), Domain::kSupport, std::move(turns), std::move(meta));
  });
}

LoadReport parse_normalized(const json& doc) {
  const json& records = doc.is_object() && doc.contains("dialogues") ? doc["dialogues"] : doc;
  return parse_records(require_array(records, "transcript"), "normalized",
                       [](const json& rec, std::size_t) {
    const auto id = string_at(rec, "id");
    const auto domain = parse_domain(rec.value("domain", std::string("generic")));
    if (!rec.contains("turns") || !rec["turns"].is_array()) {
      throw InvalidInput("missing turns array");
    }
    std::vector<Turn> turns;
    if (rec.contains("context") && rec["context"].is_array()) {
      for (const auto& c : rec["context"]) {
        turns.push_back({Speaker::kAssistant, c.get<std::string>(), json::object()});
      }
    }
    for (const auto& u : rec["turns"]) {
      Turn t;
      t.speaker = speaker_from(string_at(u, "speaker"), "user", "assistant");
      t.text = string_at(u, "text");
      if (u.contains("meta") && u["meta"].is_object()) t.meta = u["meta"];
      turns.push_back(std::move(t));
    }
    return normalize(id, domain, std::move(turns),
                     rec.contains("meta") && rec["meta"].is_object() ? rec["meta"]
                                                                      : json::object());
  });
}

namespace {

template <typename Parse>
LoadReport load_file(const std::filesystem::path& path, Parse parse) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const auto text = ss.str();
  if (trim(text).empty()) return {};
  const json doc = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) throw InvalidInput(path.string() + " is not valid JSON");
  return parse(doc);
}

}  // namespace

LoadReport load_ccpem(const std::filesystem::path& path) { return load_file(path, parse_ccpem); }
LoadReport load_esconv(const std::filesystem::path& path) {
  return load_file(path, parse_esconv);
}
LoadReport load_normalized(const std::filesystem::path& path) {
  return load_file(path, parse_normalized);
}

LoadReport load_transcripts(DatasetKind kind, const std::filesystem::path& path) {
  switch (kind) {
    case DatasetKind::kCcpem:
      return load_ccpem(path);
    case DatasetKind::kEsconv:
      return load_esconv(path);
    case DatasetKind::kNormalized:
      return load_normalized(path);
  }
  return load_normalized(path);
}

json to_json(const DialogueTranscript& d) {
  json turns = json::array();
  for (const auto& t : d.turns) {
    json turn{{"speaker", t.speaker == Speaker::kUser ? "user" : "assistant"}, {"text", t.text}};
    if (!t.meta.empty()) turn["meta"] = t.meta;
    turns.push_back(std::move(turn));
  }
  json out{{"id", d.id}, {"domain", to_string(d.domain)}, {"turns", std::move(turns)}};
  if (!d.context.empty()) out["context"] = d.context;
  if (!d.meta.empty()) out["meta"] = d.meta;
  return out;
}

}  // namespace cper::eval
