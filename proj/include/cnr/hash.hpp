#pragma once

#include <cstdint>
#include <cstdio>
#include <string>

namespace cnr {

/// 64-bit FNV-1a.
[[nodiscard]] inline std::uint64_t fnv1a(const std::string& bytes)
{
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

[[nodiscard]] inline std::string hash_hex(std::uint64_t h)
{
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace cnr
