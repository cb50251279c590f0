#pragma once

#include <string>

namespace spinlab {

// Write-to-temp-then-rename; partial writes never land at `path`.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);  // ParseError if unreadable

}  // namespace spinlab
