#pragma once

// Helpers shared by the line-oriented text formats.

#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace fieldloc::text {

/// 17 significant digits; survives a read/write cycle bit-exactly.
std::string fmt(double v);

std::vector<std::string_view> split(std::string_view line);

/// Parses a finite double; throws FormatError naming `what` otherwise.
double parse_double(std::string_view token, std::string_view what);
long long parse_int(std::string_view token, std::string_view what);

std::ifstream open_in(const std::string& path);
std::ofstream open_out(const std::string& path);

}  // namespace fieldloc::text
