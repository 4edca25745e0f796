#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace forge {

std::string base64_encode(std::span<const std::uint8_t> data);

// Throws IoError on malformed input.
std::vector<std::uint8_t> base64_decode(const std::string& text);

}  // namespace forge
