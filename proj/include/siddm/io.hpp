#pragma once

#include <string>

namespace siddm {

/// Writes via a sibling temp file and rename, so readers never see a
/// partial file.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

/// printf("%.17g"), enough digits to round-trip any double.
std::string format_double(double value);
/// Six significant digits, for human-facing summaries.
std::string format_short(double value);

}  // namespace siddm
