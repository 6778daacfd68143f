#pragma once

#include <string>
#include <vector>

namespace pnc::cli {

/// Shortest text that reads back to the same double.
std::string fmt(double value);
std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& s, char sep);
/// Whole-string numeric parses; throw InvalidParameter naming `what`.
double parse_double(const std::string& s, const std::string& what);
long parse_int(const std::string& s, const std::string& what);
/// Comma-separated doubles.
std::vector<double> parse_list(const std::string& s, const std::string& what);
/// "lo:hi:step" inclusive of hi (within step / 1e6).
std::vector<double> parse_range(const std::string& s, const std::string& what);
std::string join(const std::vector<double>& values, char sep = ',');

} // namespace pnc::cli
