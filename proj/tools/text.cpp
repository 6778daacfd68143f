#include "text.hpp"

#include <charconv>
#include <cmath>

#include "pnc/errors.hpp"

namespace pnc::cli {

std::string fmt(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string::size_type start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos - start)));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

double parse_double(const std::string& s, const std::string& what) {
    const std::string t = trim(s);
    double v = 0.0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size())
        throw InvalidParameter(what + ": '" + s + "' is not a number");
    return v;
}

long parse_int(const std::string& s, const std::string& what) {
    const std::string t = trim(s);
    long v = 0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size())
        throw InvalidParameter(what + ": '" + s + "' is not an integer");
    return v;
}

std::vector<double> parse_list(const std::string& s, const std::string& what) {
    std::vector<double> out;
    if (trim(s).empty()) return out;
    for (const auto& part : split(s, ',')) out.push_back(parse_double(part, what));
    return out;
}

std::vector<double> parse_range(const std::string& s, const std::string& what) {
    const auto parts = split(s, ':');
    if (parts.size() != 3) throw InvalidParameter(what + ": expected lo:hi:step, got '" + s + "'");
    const double lo = parse_double(parts[0], what), hi = parse_double(parts[1], what);
    const double step = parse_double(parts[2], what);
    if (!(step > 0.0) || !(hi >= lo) || (hi - lo) / step > 1e6)
        throw InvalidParameter(what + ": range needs lo <= hi and a positive step");
    std::vector<double> out;
    const long n = static_cast<long>(std::floor((hi - lo) / step + 1e-6));
    for (long i = 0; i <= n; ++i) out.push_back(lo + step * static_cast<double>(i));
    return out;
}

std::string join(const std::vector<double>& values, char sep) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += sep;
        out += fmt(values[i]);
    }
    return out;
}

} // namespace pnc::cli
