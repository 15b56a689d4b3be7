#pragma once

#include <string>
#include <vector>

namespace pfedlia {

// 17 significant digits, enough to round-trip any double, so output files can
// be compared byte-for-byte.
std::string format_double(double v);

std::string join(const std::vector<std::string>& parts, char sep);
std::string join_doubles(const std::vector<double>& vals, char sep);
std::string join_ints(const std::vector<int>& vals, char sep);

}  // namespace pfedlia
