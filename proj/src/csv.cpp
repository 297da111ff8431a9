#include "plantcast/csv.hpp"

#include <charconv>
#include <cstdio>

namespace plantcast::csv {

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

std::optional<std::int64_t> parse_int(std::string_view s) {
    s = trim(s);
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string format_fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

bool next_data_line(std::istream& in, std::string& line) {
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        return true;
    }
    return false;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
    for (const unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

} // namespace plantcast::csv

namespace plantcast {

std::string stamp_line(const Stamp& stamp) {
    return "# plantcast fingerprint=" + stamp.fingerprint + " seed=" + std::to_string(stamp.seed);
}

std::optional<Stamp> parse_stamp_line(std::string_view line) {
    constexpr std::string_view prefix = "# plantcast fingerprint=";
    line = csv::trim(line);
    if (line.substr(0, prefix.size()) != prefix) return std::nullopt;
    line.remove_prefix(prefix.size());
    const auto space = line.find(" seed=");
    if (space == std::string_view::npos) return std::nullopt;
    const auto seed = csv::parse_int(line.substr(space + 6));
    if (!seed || *seed < 0) return std::nullopt;
    return Stamp{std::string(line.substr(0, space)), static_cast<std::uint64_t>(*seed)};
}

std::optional<Stamp> peek_stamp(std::istream& in) {
    const auto start = in.tellg();
    std::string line;
    std::optional<Stamp> stamp;
    if (std::getline(in, line)) stamp = parse_stamp_line(line);
    in.clear();
    in.seekg(start);
    return stamp;
}

} // namespace plantcast
