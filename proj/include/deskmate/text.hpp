#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace deskmate::text {

std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
// Case-insensitive substring test.
bool icontains(std::string_view haystack, std::string_view needle);
std::string_view trim(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);
bool starts_with_icase(std::string_view s, std::string_view prefix);

}  // namespace deskmate::text
