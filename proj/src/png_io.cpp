#include "forge/png_io.hpp"

#include <zlib.h>

#include <cstdlib>
#include <cstring>
#include <fstream>

#include "forge/errors.hpp"

namespace forge {
namespace {

constexpr std::uint8_t kSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(std::uint8_t(v >> 24));
  out.push_back(std::uint8_t(v >> 16));
  out.push_back(std::uint8_t(v >> 8));
  out.push_back(std::uint8_t(v));
}

std::uint32_t read_u32(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
         (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::uint8_t* data, std::size_t len) {
  put_u32(out, static_cast<std::uint32_t>(len));
  const std::size_t type_pos = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data, data + len);
  const auto crc = crc32(0, out.data() + type_pos, static_cast<uInt>(4 + len));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

int color_type_for_channels(int channels) {
  switch (channels) {
    case 1: return 0;
    case 2: return 4;
    case 3: return 2;
    case 4: return 6;
    default:
      throw IoError("png: unsupported channel count " + std::to_string(channels));
  }
}

int channels_for_color_type(int color_type) {
  switch (color_type) {
    case 0: return 1;
    case 2: return 3;
    case 4: return 2;
    case 6: return 4;
    default:
      throw IoError("png: unsupported color type " + std::to_string(color_type));
  }
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a);
  const int pb = std::abs(p - b);
  const int pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const ImageBuffer& img) {
  img.validate();
  const int bpp = img.channels;
  const std::size_t row_bytes = static_cast<std::size_t>(img.width) * bpp;
  const auto pixel_bytes = to_bytes8(img);

  // Raw stream: every scanline prefixed with filter type 0.
  std::vector<std::uint8_t> raw;
  raw.reserve(static_cast<std::size_t>(img.height) * (row_bytes + 1));
  for (int y = 0; y < img.height; ++y) {
    raw.push_back(0);
    raw.insert(raw.end(), pixel_bytes.begin() + y * row_bytes,
               pixel_bytes.begin() + (y + 1) * row_bytes);
  }

  uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> compressed(comp_len);
  if (compress2(compressed.data(), &comp_len, raw.data(),
                static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw IoError("png: zlib compression failed");
  compressed.resize(comp_len);

  std::vector<std::uint8_t> out;
  out.insert(out.end(), kSignature, kSignature + 8);

  std::uint8_t ihdr[13];
  ihdr[0] = std::uint8_t(img.width >> 24);
  ihdr[1] = std::uint8_t(img.width >> 16);
  ihdr[2] = std::uint8_t(img.width >> 8);
  ihdr[3] = std::uint8_t(img.width);
  ihdr[4] = std::uint8_t(img.height >> 24);
  ihdr[5] = std::uint8_t(img.height >> 16);
  ihdr[6] = std::uint8_t(img.height >> 8);
  ihdr[7] = std::uint8_t(img.height);
  ihdr[8] = 8;  // bit depth
  ihdr[9] = std::uint8_t(color_type_for_channels(img.channels));
  ihdr[10] = 0;  // compression
  ihdr[11] = 0;  // filter method
  ihdr[12] = 0;  // no interlace
  append_chunk(out, "IHDR", ihdr, sizeof(ihdr));
  append_chunk(out, "IDAT", compressed.data(), compressed.size());
  append_chunk(out, "IEND", nullptr, 0);
  return out;
}

ImageBuffer decode_png(std::span<const std::uint8_t> data) {
  if (data.size() < 8 || std::memcmp(data.data(), kSignature, 8) != 0)
    throw IoError("png: bad signature");

  int width = 0, height = 0, channels = 0;
  bool have_ihdr = false;
  std::vector<std::uint8_t> idat;

  std::size_t pos = 8;
  while (pos + 12 <= data.size()) {
    const std::uint32_t len = read_u32(data.data() + pos);
    if (pos + 12 + len > data.size()) throw IoError("png: truncated chunk");
    const char* type = reinterpret_cast<const char*>(data.data() + pos + 4);
    const std::uint8_t* payload = data.data() + pos + 8;
    const std::uint32_t stored_crc = read_u32(data.data() + pos + 8 + len);
    const auto crc = crc32(0, data.data() + pos + 4, 4 + len);
    if (static_cast<std::uint32_t>(crc) != stored_crc)
      throw IoError("png: chunk CRC mismatch");

    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw IoError("png: bad IHDR length");
      width = static_cast<int>(read_u32(payload));
      height = static_cast<int>(read_u32(payload + 4));
      const int bit_depth = payload[8];
      const int color_type = payload[9];
      const int interlace = payload[12];
      if (bit_depth != 8) throw IoError("png: only 8-bit depth supported");
      if (interlace != 0) throw IoError("png: interlaced images not supported");
      channels = channels_for_color_type(color_type);
      if (width <= 0 || height <= 0) throw IoError("png: bad dimensions");
      have_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), payload, payload + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    // Ancillary chunks are skipped.
    pos += 12 + len;
  }
  if (!have_ihdr || idat.empty()) throw IoError("png: missing IHDR or IDAT");

  const int bpp = channels;
  const std::size_t row_bytes = static_cast<std::size_t>(width) * bpp;
  const std::size_t raw_size = static_cast<std::size_t>(height) * (row_bytes + 1);
  std::vector<std::uint8_t> raw(raw_size);
  uLongf raw_len = static_cast<uLongf>(raw_size);
  if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
      raw_len != raw_size)
    throw IoError("png: zlib decompression failed");

  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(height) * row_bytes);
  std::vector<std::uint8_t> prev_row(row_bytes, 0);
  for (int y = 0; y < height; ++y) {
    const std::uint8_t filter = raw[y * (row_bytes + 1)];
    const std::uint8_t* src = raw.data() + y * (row_bytes + 1) + 1;
    std::uint8_t* dst = pixels.data() + y * row_bytes;
    switch (filter) {
      case 0:
        std::memcpy(dst, src, row_bytes);
        break;
      case 1:  // Sub
        for (std::size_t i = 0; i < row_bytes; ++i)
          dst[i] = std::uint8_t(src[i] + (i >= std::size_t(bpp) ? dst[i - bpp] : 0));
        break;
      case 2:  // Up
        for (std::size_t i = 0; i < row_bytes; ++i)
          dst[i] = std::uint8_t(src[i] + prev_row[i]);
        break;
      case 3:  // Average
        for (std::size_t i = 0; i < row_bytes; ++i) {
          const int left = i >= std::size_t(bpp) ? dst[i - bpp] : 0;
          dst[i] = std::uint8_t(src[i] + (left + prev_row[i]) / 2);
        }
        break;
      case 4:  // Paeth
        for (std::size_t i = 0; i < row_bytes; ++i) {
          const int left = i >= std::size_t(bpp) ? dst[i - bpp] : 0;
          const int upleft = i >= std::size_t(bpp) ? prev_row[i - bpp] : 0;
          dst[i] = std::uint8_t(src[i] + paeth(left, prev_row[i], upleft));
        }
        break;
      default:
        throw IoError("png: unknown filter type " + std::to_string(filter));
    }
    std::memcpy(prev_row.data(), dst, row_bytes);
  }

  ImageBuffer img;
  img.height = height;
  img.width = width;
  img.channels = channels;
  img.pixels.resize(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) img.pixels[i] = pixels[i] / 255.0;
  return img;
}

void write_png(const std::filesystem::path& path, const ImageBuffer& img) {
  const auto bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

ImageBuffer read_png(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_png(bytes);
}

}  // namespace forge
