#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fedstale {

/// Locale-independent rendering with 17 significant digits (round-trips).
std::string format_double(double value);

/// Writes `content` to `path` through a temporary file and a rename, so the
/// destination is either absent or complete. Throws IoError.
void write_text_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_text(const std::filesystem::path& path);

/// Splits on `sep`, trimming ASCII whitespace around each field.
std::vector<std::string> split_trimmed(std::string_view text, char sep);
std::string_view trim(std::string_view text);

}  // namespace fedstale
