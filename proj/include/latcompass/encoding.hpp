#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace latcompass {

std::string base64_encode(std::span<const std::uint8_t> bytes);
// Throws Error(InvalidArgument) on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::uint64_t fnv1a64(std::string_view data);
// "fnv1a64:" followed by 16 lowercase hex digits.
std::string digest_hex(std::string_view data);

// Opaque unique token, e.g. "img-3f9c0a1b2d4e5f60".
std::string make_token(std::string_view prefix);

// ISO-8601 UTC with microseconds, e.g. "2026-10-16T17:45:00.123456Z".
std::string iso8601(std::chrono::system_clock::time_point t);

}  // namespace latcompass
