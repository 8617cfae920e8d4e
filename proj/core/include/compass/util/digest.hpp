#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace compass::util {

// 64-bit FNV-1a. Stable across platforms; used for prompt/content addressing,
// not for anything adversarial.
constexpr std::uint64_t fnv1a64(std::string_view data,
                                std::uint64_t seed = 0xcbf29ce484222325ull) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= static_cast<std::uint64_t>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string to_hex(std::uint64_t value);

// Lowercase 16-char hex digest of the input.
std::string digest_hex(std::string_view data);

// Digest of a (system_text, user_text) pair with an unambiguous separator.
std::string prompt_digest(std::string_view system_text, std::string_view user_text);

} // namespace compass::util
