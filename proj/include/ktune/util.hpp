#pragma once

#include <cstdint>
#include <cstdio>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ktune {

// Error raised for invalid user input (config files, bad arguments, malformed
// documents). Everything else uses std::runtime_error.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Formats a double with 17 significant digits so that parsing the string
// recovers the exact same bits. Used by every text artifact we write.
inline std::string format_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& text, const std::string& what);
long long parse_int(const std::string& text, const std::string& what);

std::vector<std::string> split_csv_line(const std::string& line);
std::string join_csv(const std::vector<std::string>& fields);

// FNV-1a, used for space fingerprints and the builtin kernel tables.
inline std::uint64_t fnv1a_bytes(const void* data, std::size_t len,
                                 std::uint64_t seed = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t seed = 0xcbf29ce484222325ull) {
    return fnv1a_bytes(s.data(), s.size(), seed);
}

// Runs fn(i) for i in [0, count) on up to `jobs` threads. Each item is
// independent; callers index into pre-sized result vectors so the outcome does
// not depend on scheduling. jobs <= 1 runs inline.
void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& fn);

} // namespace ktune
