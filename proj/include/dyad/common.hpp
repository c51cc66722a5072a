#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dyad {

// Input/validation problems (bad files, bad configs, violated invariants).
// The CLI maps these to exit status 1; anything else is a runtime failure (2).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {
inline void append_parts(std::ostringstream&) {}
template <typename T, typename... Rest>
void append_parts(std::ostringstream& os, const T& v, const Rest&... rest) {
    os << v;
    append_parts(os, rest...);
}
}  // namespace detail

template <typename... Parts>
[[noreturn]] void fail(const Parts&... parts) {
    std::ostringstream os;
    detail::append_parts(os, parts...);
    throw ValidationError(os.str());
}

// Shortest round-trip decimal form, locale independent.
inline std::string format_double(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

inline double parse_double(std::string_view s, const std::string& context) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        fail(context, ": bad number '", std::string(s), "'");
    return v;
}

inline long long parse_int(std::string_view s, const std::string& context) {
    long long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        fail(context, ": bad integer '", std::string(s), "'");
    return v;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path.string(), ": cannot open file");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(path.string(), ": cannot open file for writing");
    out << content;
    if (!out) fail(path.string(), ": write failed");
}

// FNV-1a, used for content hashing in tests and the fallback embedder.
inline uint64_t fnv1a64(std::string_view s, uint64_t seed = 1469598103934665603ull) {
    uint64_t h = seed;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace dyad
