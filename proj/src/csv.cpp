#include "pfedlia/csv.hpp"

#include <cstdio>

namespace pfedlia {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string join(const std::vector<std::string>& parts, char sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out.push_back(sep);
        out += parts[i];
    }
    return out;
}

std::string join_doubles(const std::vector<double>& vals, char sep) {
    std::string out;
    for (std::size_t i = 0; i < vals.size(); ++i) {
        if (i) out.push_back(sep);
        out += format_double(vals[i]);
    }
    return out;
}

std::string join_ints(const std::vector<int>& vals, char sep) {
    std::string out;
    for (std::size_t i = 0; i < vals.size(); ++i) {
        if (i) out.push_back(sep);
        out += std::to_string(vals[i]);
    }
    return out;
}

}  // namespace pfedlia
