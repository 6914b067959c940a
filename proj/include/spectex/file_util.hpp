#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace spectex {

/// Reads a whole file. Throws IoError if it cannot be opened or read.
std::vector<std::byte> read_file_bytes(const std::filesystem::path& path);

/// Writes `bytes` to a sibling temporary file and renames it over `path`, so
/// readers never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::byte> bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

} // namespace spectex
