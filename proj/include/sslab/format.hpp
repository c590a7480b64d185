#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace sslab {

// Shortest decimal string that parses back to the same double.
std::string format_double(double v);
// Strict parse of a whole field; throws ParseError naming `what` on failure.
double parse_double(std::string_view text, std::string_view what);

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull);
std::string hex64(std::uint64_t v);

} // namespace sslab
