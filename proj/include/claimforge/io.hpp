#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace claimforge {

std::string read_file(const std::filesystem::path& path);

// Splits file content into lines, dropping the trailing newline and any '\r'.
std::vector<std::string> read_lines(const std::filesystem::path& path);

// Writes through a temp file in the same directory, then renames over the
// destination. Readers never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path,
                       const std::string& content);

bool is_blank(const std::string& line);

}  // namespace claimforge
