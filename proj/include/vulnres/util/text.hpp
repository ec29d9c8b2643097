#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace vulnres::text {

// Splits into lines without their terminators. A trailing '\n' does not
// produce an extra empty line.
std::vector<std::string_view> split_lines(std::string_view s);

// Byte offset of the start of every line (index 0 -> line 1).
std::vector<size_t> line_starts(std::string_view s);

// Bytes of lines [first, last] (1-based, inclusive) including terminators of
// all but possibly the final line of the file.
std::string_view slice_lines(std::string_view s, int first, int last);

std::string_view trim(std::string_view s);
std::string_view trim_right(std::string_view s);

// Strips leading and trailing blanks and collapses inner runs to one space.
std::string normalize_line(std::string_view line);

std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool ends_with_newline(std::string_view s);
size_t count_occurrences(std::string_view haystack, std::string_view needle);
std::string replace_all(std::string s, std::string_view from, std::string_view to);

bool is_ident_start(char c);
bool is_ident_char(char c);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace vulnres::text
