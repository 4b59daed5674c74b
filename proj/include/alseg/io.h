#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace alseg {

// Writes via a sibling temp file and rename so readers never see partial data.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

}  // namespace alseg
