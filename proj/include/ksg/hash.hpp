#pragma once

#include <string>
#include <string_view>

namespace ksg {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// `prefix` + first 16 hex digits of SHA-256 over the parts joined by U+001F.
/// Used for every content-derived id so that replayed runs reproduce ids.
std::string stable_id(std::string_view prefix, std::string_view first, std::string_view second);

}  // namespace ksg
