// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace dtsv {

// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

// Strict parse of a whole token; throws on trailing garbage.
double parse_double(std::string_view s, std::string_view what = "number");
long long parse_int(std::string_view s, std::string_view what = "integer");

std::vector<std::string> split_whitespace(std::string_view line);
std::string_view trim(std::string_view s);

// Splits on '\n', dropping a trailing '\r' per line; no final empty line.
std::vector<std::string> split_lines(std::string_view text);

// Whole-file I/O; failures throw with ErrorKind::io naming the path.
std::string read_text_file(const std::filesystem::path& path);
// Writes via a temporary sibling and rename, so readers never see a
// partial file.
void write_text_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace dtsv
