#ifndef EMBNLI_IO_HPP
#define EMBNLI_IO_HPP

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace embnli {

/// Writes via a temporary sibling file and renames it into place, so readers
/// never observe a partially written output.
void write_file_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& writer,
                       bool binary = false);

std::string read_file(const std::filesystem::path& path);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Shortest general-format rendering with `precision` significant digits.
std::string format_double(double value, int precision = 9);

/// Strict full-token parse; returns false on trailing garbage or overflow.
bool parse_double(std::string_view text, double& out);

/// Splits on runs of spaces/tabs, dropping empty fields.
std::vector<std::string_view> split_ws(std::string_view line);

std::vector<std::string> split(std::string_view text, char sep);

std::string_view trim(std::string_view s);

}  // namespace embnli

#endif  // EMBNLI_IO_HPP
