#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace stylerm {

// Deterministic across platforms, unlike std::hash.
constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// Hex digest of SHA-256(data). Used as the content part of cache keys.
std::string sha256_hex(std::string_view data);

}  // namespace stylerm
