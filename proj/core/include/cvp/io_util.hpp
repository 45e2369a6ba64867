#pragma once

#include <cstdint>
#include <string>

namespace cvp {

// Shortest decimal form that round-trips the exact double (via to_chars).
// Used everywhere a double is written, so identical values always produce
// identical bytes.
std::string format_double(double v);
std::string format_int(std::int64_t v);

// Writes `content` to a temp file in the same directory and renames it over
// `path`, so readers never observe a partial file.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

}  // namespace cvp
