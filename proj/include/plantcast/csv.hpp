#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace plantcast::csv {

// Splits on commas. Fields are not quoted anywhere in this project's formats.
std::vector<std::string_view> split(std::string_view line);

std::string_view trim(std::string_view s);

std::optional<double> parse_double(std::string_view s);
std::optional<std::int64_t> parse_int(std::string_view s);

// Shortest text that parses back to the same double.
std::string format_double(double v);

// Fixed-point with `decimals` digits after the point.
std::string format_fixed(double v, int decimals);

// Reads the next line that is neither blank nor a `#` comment. Strips a
// trailing '\r'. Returns false at end of stream.
bool next_data_line(std::istream& in, std::string& line);

// FNV-1a, used for config and data fingerprints.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

} // namespace plantcast::csv

namespace plantcast {

// Provenance line embedded at the top of every stage artifact.
struct Stamp {
    std::string fingerprint;
    std::uint64_t seed = 0;

    bool operator==(const Stamp&) const = default;
};

// `# plantcast fingerprint=<hex> seed=<n>`
std::string stamp_line(const Stamp& stamp);
std::optional<Stamp> parse_stamp_line(std::string_view line);

// Reads the stamp from the first line of a stream and rewinds it.
std::optional<Stamp> peek_stamp(std::istream& in);

} // namespace plantcast
