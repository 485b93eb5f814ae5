#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace jumpnls {

/// Shortest decimal text that parses back to exactly `x`.
std::string format_number(double x);

void write_text_file(const std::filesystem::path& path, std::string_view text);

std::string read_text_file(const std::filesystem::path& path);

/// 64-bit FNV-1a digest as 16 hex digits.
std::string fnv1a_hex(std::string_view text);

}  // namespace jumpnls
