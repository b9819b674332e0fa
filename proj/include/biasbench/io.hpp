#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace biasbench {

/// Whole-file read. Throws Error naming the path when unreadable.
std::string read_file(const std::filesystem::path& path);

/// Writes via a sibling temporary file and rename, so readers never observe a
/// partially written file. Throws Error when the path is unwritable.
void write_file(const std::filesystem::path& path, std::string_view contents);

/// printf-style "%.<digits>g" formatting.
std::string format_general(double value, int significant_digits);

/// printf-style "%.<places>f" formatting.
std::string format_fixed(double value, int places);

}  // namespace biasbench
