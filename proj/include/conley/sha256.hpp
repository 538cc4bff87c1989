#pragma once

#include <string>
#include <string_view>

namespace conley {

// Hex digest of the SHA-256 of the bytes, used for content-addressed
// result caching.
std::string sha256_hex(std::string_view data);

}  // namespace conley
