#include "compass/util/digest.hpp"

#include <array>

namespace compass::util {

std::string to_hex(std::uint64_t value) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = kHex[value & 0xf];
        value >>= 4;
    }
    return out;
}

std::string digest_hex(std::string_view data) {
    return to_hex(fnv1a64(data));
}

std::string prompt_digest(std::string_view system_text, std::string_view user_text) {
    std::uint64_t h = fnv1a64(system_text);
    h = fnv1a64("\x1f", h); // separator so ("ab","c") != ("a","bc")
    h = fnv1a64(user_text, h);
    return to_hex(h);
}

} // namespace compass::util
