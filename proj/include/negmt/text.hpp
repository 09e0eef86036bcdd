#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace negmt::text {

std::vector<std::string> split(std::string_view s, char delim);
std::vector<std::string> split_whitespace(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view delim);
std::string_view trim(std::string_view s);

/// ASCII-only lowercase; bytes >= 0x80 pass through so UTF-8 stays intact.
std::string ascii_lower(std::string_view s);

bool starts_with_ci(std::string_view s, std::string_view prefix);
bool valid_utf8(std::string_view s);

/// Strip a trailing '\r' left by CRLF files.
void chomp(std::string& line);

}  // namespace negmt::text
