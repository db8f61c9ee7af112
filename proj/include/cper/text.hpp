#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cper {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split(std::string_view s, char delimiter);
std::string join(std::span<const std::string> parts, std::string_view delimiter);
void replace_all(std::string& s, std::string_view from, std::string_view to);
bool contains(std::string_view haystack, std::string_view needle);

// Case-insensitive equality over ASCII.
bool iequals(std::string_view a, std::string_view b);

// Number formatted with a fixed count of fractional digits.
std::string fixed(double value, int digits);

}  // namespace cper
