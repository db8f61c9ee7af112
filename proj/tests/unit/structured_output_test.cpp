#include "cper/structured_output.hpp"

#include <gtest/gtest.h>

#include <fstream>

namespace cper {
namespace {

using nlohmann::json;

json load_cases() {
  std::ifstream in(std::string(CPER_FIXTURES_DIR) + "/parser/cases.json");
  return json::parse(in);
}

TEST(StructuredOutputTest, FixtureSuite) {
  const auto cases = load_cases();
  ASSERT_GE(cases.size(), 20u);
  for (const auto& c : cases) {
    SCOPED_TRACE(c["name"].get<std::string>());
    const auto parsed = parse_structured_output(c["text"].get<std::string>());
    if (!c["valid"].get<bool>()) {
      EXPECT_FALSE(parsed.has_value());
      continue;
    }
    ASSERT_TRUE(parsed.has_value());
    EXPECT_EQ(parsed->value, c["value"]);
    EXPECT_EQ(parsed->repairs, c["repairs"].get<std::vector<std::string>>());
  }
}

TEST(StructuredOutputTest, FieldLookupIgnoresCase) {
  const auto v = json::parse(R"({"Feedback": "x", "count": 3, "none": null})");
  ASSERT_NE(find_field(v, "feedback"), nullptr);
  EXPECT_EQ(text_field(v, "FEEDBACK"), "x");
  EXPECT_EQ(text_field(v, "count"), "3");
  EXPECT_EQ(text_field(v, "none"), std::nullopt);
  EXPECT_EQ(text_field(v, "missing"), std::nullopt);
  EXPECT_EQ(find_field(json::array(), "x"), nullptr);
}

}  // namespace
}  // namespace cper
