#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cper {

// Slot values keyed by placeholder name (without braces).
using PromptValues = std::map<std::string, std::string, std::less<>>;

// Replaces every {name} slot in one pass. Values are inserted verbatim and
// never rescanned. Throws InvalidInput if the template has a slot with no
// value.
std::string fill_template(std::string_view tmpl, const PromptValues& values);

// Names of the {identifier} slots in a template, in order of appearance.
std::vector<std::string> placeholders(std::string_view tmpl);

// Template by name ("gen", "feedback", "judge_movies", ...). A file
// <dir>/<name>.txt overrides the compiled-in default. Throws InvalidInput for
// an unknown name with no file.
std::string load_prompt(std::string_view name,
                        const std::optional<std::filesystem::path>& dir = std::nullopt);

// The four templates driving one conversation turn.
struct PromptSet {
  std::string gen;
  std::string fb;
  std::string select;
  std::string refine;

  static PromptSet defaults();
  static PromptSet load(const std::optional<std::filesystem::path>& dir);

  // Throws InvalidInput naming every required slot a template lacks.
  void validate() const;
};

namespace detail {
std::optional<std::string_view> embedded_prompt(std::string_view name);
}

}  // namespace cper
