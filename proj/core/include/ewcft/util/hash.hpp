#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace ewcft::util {

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

// Lower-case 16-digit hex rendering of fnv1a64.
std::string hash_hex(std::string_view bytes);

}  // namespace ewcft::util
