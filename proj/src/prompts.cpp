#include "cper/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "cper/errors.hpp"

namespace cper {

namespace {

bool slot_start(char c) { return std::islower(static_cast<unsigned char>(c)) || c == '_'; }
bool slot_char(char c) {
  return slot_start(c) || std::isdigit(static_cast<unsigned char>(c));
}

// Length of the "{name}" slot starting at `i`, or 0.
std::size_t slot_at(std::string_view s, std::size_t i) {
  if (s[i] != '{' || i + 1 >= s.size() || !slot_start(s[i + 1])) return 0;
  std::size_t j = i + 1;
  while (j < s.size() && slot_char(s[j])) ++j;
  return j < s.size() && s[j] == '}' ? j - i + 1 : 0;
}

}  // namespace

std::string fill_template(std::string_view tmpl, const PromptValues& values) {
  std::string out;
  out.reserve(tmpl.size() * 2);
  for (std::size_t i = 0; i < tmpl.size();) {
    if (const auto len = slot_at(tmpl, i)) {
      const auto name = tmpl.substr(i + 1, len - 2);
      const auto it = values.find(name);
      if (it == values.end()) {
        throw InvalidInput("no value for prompt slot {" + std::string(name) + "}");
      }
      out += it->second;
      i += len;
    } else {
      out += tmpl[i++];
    }
  }
  return out;
}

std::vector<std::string> placeholders(std::string_view tmpl) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (const auto len = slot_at(tmpl, i)) {
      out.emplace_back(tmpl.substr(i + 1, len - 2));
      i += len - 1;
    }
  }
  return out;
}

std::string load_prompt(std::string_view name, const std::optional<std::filesystem::path>& dir) {
  if (dir) {
    const auto path = *dir / (std::string(name) + ".txt");
    if (std::ifstream in{path}) {
      std::ostringstream ss;
      ss << in.rdbuf();
      return ss.str();
    }
  }
  if (auto body = detail::embedded_prompt(name)) return std::string(*body);
  throw InvalidInput("unknown prompt template: " + std::string(name));
}

PromptSet PromptSet::defaults() { return load(std::nullopt); }

PromptSet PromptSet::load(const std::optional<std::filesystem::path>& dir) {
  PromptSet p{load_prompt("gen", dir), load_prompt("feedback", dir), load_prompt("select", dir),
              load_prompt("refine", dir)};
  p.validate();
  return p;
}

void PromptSet::validate() const {
  struct Required {
    const char* template_name;
    const std::string* body;
    std::vector<const char*> slots;
  };
  const Required required[] = {
      {"gen", &gen, {"user_input"}},
      {"feedback",
       &fb,
       {"previous_persona_text", "conversation_history", "knowledge_gap", "user_input",
        "initial_response"}},
      {"select", &select, {"user_input", "previous_persona_text", "feedback"}},
      {"refine",
       &refine,
       {"selected_persona_text", "conversation_history", "user_input", "feedback"}},
  };
  std::vector<std::string> missing;
  for (const auto& r : required) {
    const auto present = placeholders(*r.body);
    for (const char* slot : r.slots) {
      if (std::find(present.begin(), present.end(), slot) == present.end()) {
        missing.push_back(std::string(r.template_name) + ":{" + slot + "}");
      }
    }
  }
  if (!missing.empty()) {
    std::string what = "prompt templates missing slots:";
    for (const auto& m : missing) what += " " + m;
    throw InvalidInput(what);
  }
}

}  // namespace cper
