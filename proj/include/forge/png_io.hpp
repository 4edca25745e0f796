#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "forge/image.hpp"

namespace forge {

// Lossless 8-bit PNG, the only image format the pipeline reads or writes.
// Encoding is deterministic: fixed filter (none), fixed zlib level, single
// IDAT chunk, no ancillary chunks. Supported on decode: bit depth 8, color
// types gray / gray+alpha / RGB / RGBA, no interlacing.

std::vector<std::uint8_t> encode_png(const ImageBuffer& img);

// Throws IoError on anything that is not a supported PNG.
ImageBuffer decode_png(std::span<const std::uint8_t> data);

void write_png(const std::filesystem::path& path, const ImageBuffer& img);
ImageBuffer read_png(const std::filesystem::path& path);

}  // namespace forge
