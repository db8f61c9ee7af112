#include "cper/structured_output.hpp"

#include <cctype>

#include "cper/text.hpp"

namespace cper {

using nlohmann::json;

namespace {

std::optional<json> parse_object(std::string_view text) {
  json v = json::parse(text.begin(), text.end(), nullptr, /*allow_exceptions=*/false);
  if (v.is_discarded() || !v.is_object()) return std::nullopt;
  return v;
}

std::string strip_fences(std::string_view text) {
  std::string out;
  for (auto& line : split(text, '\n')) {
    if (trim(line).starts_with("```")) continue;
    out += line;
    out += '\n';
  }
  return out;
}

// From the first '{' to its matching '}', honoring both quote styles.
std::optional<std::string> outermost_object(std::string_view text) {
  const auto start = text.find('{');
  if (start == std::string_view::npos) return std::nullopt;
  int depth = 0;
  char quote = 0;
  for (std::size_t i = start; i < text.size(); ++i) {
    const char c = text[i];
    if (quote) {
      if (c == '\\') {
        ++i;
      } else if (c == quote) {
        quote = 0;
      }
      continue;
    }
    if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}' && --depth == 0) {
      return std::string(text.substr(start, i - start + 1));
    }
  }
  return std::nullopt;
}

std::string requote(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  char quote = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (!quote) {
      if (c == '"' || c == '\'') {
        quote = c;
        out += '"';
      } else {
        out += c;
      }
      continue;
    }
    if (c == '\\' && i + 1 < text.size()) {
      const char next = text[++i];
      if (quote == '\'' && next == '\'') {
        out += '\'';
      } else {
        out += '\\';
        out += next;
      }
    } else if (c == quote) {
      quote = 0;
      out += '"';
    } else if (c == '"') {
      out += "\\\"";
    } else {
      out += c;
    }
  }
  return out;
}

std::string drop_trailing_commas(std::string_view text) {
  std::string out;
  bool in_string = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      out += c;
      if (c == '\\' && i + 1 < text.size()) {
        out += text[++i];
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') in_string = true;
    if (c == ',') {
      std::size_t j = i + 1;
      while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
      if (j < text.size() && (text[j] == '}' || text[j] == ']')) continue;
    }
    out += c;
  }
  return out;
}

}  // namespace

std::optional<ParsedOutput> parse_structured_output(std::string_view text) {
  if (auto v = parse_object(trim(text))) return ParsedOutput{std::move(*v), {}};

  ParsedOutput out;
  std::string work(text);
  if (contains(work, "```")) {
    work = strip_fences(work);
    out.repairs.emplace_back("code-fence");
  }
  auto object = outermost_object(work);
  if (!object) return std::nullopt;
  if (trim(work) != *object) out.repairs.emplace_back("surrounding-text");
  work = std::move(*object);

  if (contains(work, "'")) {
    auto requoted = requote(work);
    if (requoted != work) {
      out.repairs.emplace_back("single-quotes");
      work = std::move(requoted);
    }
  }
  auto trimmed = drop_trailing_commas(work);
  if (trimmed != work) {
    out.repairs.emplace_back("trailing-comma");
    work = std::move(trimmed);
  }

  auto v = parse_object(work);
  if (!v) return std::nullopt;
  out.value = std::move(*v);
  return out;
}

const json* find_field(const json& object, std::string_view key) {
  if (!object.is_object()) return nullptr;
  for (auto it = object.begin(); it != object.end(); ++it) {
    if (iequals(it.key(), key)) return &it.value();
  }
  return nullptr;
}

std::optional<std::string> text_field(const json& object, std::string_view key) {
  const json* v = find_field(object, key);
  if (!v || v->is_null()) return std::nullopt;
  if (v->is_string()) return v->get<std::string>();
  return v->dump();
}

}  // namespace cper
