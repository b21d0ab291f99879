#pragma once

#include <string>
#include <string_view>

namespace drp {

// SHA-256 of `data`, rendered as 64 lowercase hex characters.
std::string sha256_hex(std::string_view data);

} // namespace drp
