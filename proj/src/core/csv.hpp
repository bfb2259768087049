#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace roadfc::csv {

using Row = std::vector<std::string>;

/// RFC 4180 reader: comma separated, double-quote quoting with "" escapes,
/// CRLF or LF line endings. A UTF-8 byte-order mark is skipped.
std::vector<Row> parse(std::string_view text);

/// Reads and parses a file. Throws InputError naming the path on failure.
std::vector<Row> read_file(const std::filesystem::path& path);

/// Quotes a field when it contains a comma, quote or newline.
std::string escape(std::string_view field);

/// Shortest decimal text that round-trips the double exactly.
std::string format_double(double value);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace roadfc::csv
