#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace xnf::text {

// Splits on '\n', dropping one trailing '\r' per line. A final newline does
// not produce an extra empty line.
std::vector<std::string_view> split_lines(std::string_view text);

// Splits on runs of ' ' and '\t'.
std::vector<std::string_view> split_ws(std::string_view line);

std::string join(const std::vector<std::string>& parts, std::string_view sep = " ");

std::u32string decode_utf8(std::string_view s);

// Lowercases ASCII and the Latin-1 / Latin Extended-A uppercase letters; other
// code points pass through unchanged.
std::u32string casefold(std::string_view s);
std::string casefold_utf8(std::string_view s);

// Levenshtein distance over code points.
std::size_t edit_distance(std::u32string_view a, std::u32string_view b);

// 1 - edit_distance / max(len) over case-folded code points; 1 for two
// empty strings.
double normalized_similarity(std::string_view a, std::string_view b);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace xnf::text
